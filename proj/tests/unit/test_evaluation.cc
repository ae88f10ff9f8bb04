#include <doctest.h>

#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "mlcfl/container.h"
#include "mlcfl/evaluation.h"
#include "test_util.h"

using namespace mlcfl;
using namespace mlcfl::evaluation;

namespace {

// Counts pairs directly instead of going through a confusion matrix.
double f1_oracle(const std::vector<Label>& truth, const std::vector<Label>& pred) {
  std::set<Label> classes(truth.begin(), truth.end());
  classes.insert(pred.begin(), pred.end());
  double total = 0.0;
  for (Label c : classes) {
    double tp = 0, fp = 0, fn = 0, sup = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (truth[i] == c) ++sup;
      if (truth[i] == c && pred[i] == c) ++tp;
      if (truth[i] != c && pred[i] == c) ++fp;
      if (truth[i] == c && pred[i] != c) ++fn;
    }
    const double p = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double r = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    const double w = sup / static_cast<double>(truth.size());
    if (p + r > 0) total += 2.0 * w * p * r / (p + r);
  }
  return total;
}

PipelineConfig small_config() {
  PipelineConfig c;
  c.midlevel.dict_k = 8;
  c.midlevel.kmeans_max_iter = 20;
  c.mlpl.scales = {2, 3};
  c.mlpl.n_iter = 2;
  c.mlpl.model_null_class = false;
  c.mlpl.kmeans_max_iter = 20;
  c.synth.n_classes = 3;
  c.synth.patterns_per_class = {2};
  c.synth.segments_per_pattern = 2;
  c.synth.samples_per_segment = 192;
  c.synth.noise = 0.05;
  c.synth.n_subjects = 2;
  c.seed = 11;
  return c;
}

std::vector<dataio::Frame> synth_frames(const PipelineConfig& c) {
  const auto s = dataio::synth_streams(c.synth, c.seed);
  return dataio::frame_streams(s.streams, c.framing);
}

std::string fitted_bytes(const FeaturePipeline& p, const TrainedClassifier& clf) {
  ModelContainer m;
  m.pipeline = p;
  m.classifier = clf;
  m.level = p.top_level();
  return encode_model(m);
}

std::string report_text(const EvalReport& r) {
  std::ostringstream os;
  write_report(os, r);
  return os.str();
}

}  // namespace

TEST_CASE("weighted_f1: worked example against the counting oracle") {
  const std::vector<Label> truth = {1, 1, 1, 2};
  const std::vector<Label> pred = {1, 1, 2, 2};
  const Metrics m = metrics(confusion(truth, pred));
  REQUIRE(m.per_class.size() == 2);
  // Class 1: tp 2, fp 0, fn 1. Class 2: tp 1, fp 1, fn 0.
  CHECK(m.per_class[0].precision == doctest::Approx(1.0));
  CHECK(m.per_class[0].recall == doctest::Approx(2.0 / 3.0));
  CHECK(m.per_class[0].f1 == doctest::Approx(0.8));
  CHECK(m.per_class[0].weight == doctest::Approx(0.75));
  CHECK(m.per_class[1].precision == doctest::Approx(0.5));
  CHECK(m.per_class[1].recall == doctest::Approx(1.0));
  CHECK(m.per_class[1].f1 == doctest::Approx(2.0 / 3.0));
  CHECK(m.per_class[1].weight == doctest::Approx(0.25));
  CHECK(std::abs(m.weighted_f1 - f1_oracle(truth, pred)) < 1e-12);
  CHECK(m.weighted_f1 == doctest::Approx(0.75 * 0.8 + 0.25 * 2.0 / 3.0));
  CHECK(m.accuracy == doctest::Approx(0.75));
  CHECK_FALSE(m.zero_division);
}

TEST_CASE("weighted_f1: perfect, disjoint and errors") {
  const std::vector<Label> t = {0, 1, 2, 2, 1};
  CHECK(weighted_f1(t, t) == 1.0);
  CHECK(weighted_f1(t, std::vector<Label>{5, 6, 7, 7, 6}) == 0.0);
  CHECK(metrics(confusion(t, std::vector<Label>{5, 6, 7, 7, 6})).zero_division);
  CHECK_THROWS_AS(weighted_f1(t, std::vector<Label>{0, 1}), Error);
  CHECK_THROWS_AS(weighted_f1(std::vector<Label>{}, std::vector<Label>{}), Error);
  CHECK_THROWS_AS(accuracy(t, std::vector<Label>{0}), Error);
}

TEST_CASE("weighted_f1: 1000 random pairs match the oracle and survive relabeling") {
  Rng rng(1);
  for (int t = 0; t < 1000; ++t) {
    const std::size_t n = 1 + rng.uniform_index(60);
    const std::size_t k = 1 + rng.uniform_index(6);
    std::vector<Label> truth(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      truth[i] = static_cast<Label>(rng.uniform_index(k));
      pred[i] = rng.uniform() < 0.5 ? truth[i] : static_cast<Label>(rng.uniform_index(k + 1));
    }
    const double f = weighted_f1(truth, pred);
    CHECK(std::abs(f - f1_oracle(truth, pred)) < 1e-12);
    CHECK(f >= 0.0);
    CHECK(f <= 1.0);
    std::vector<Label> perm(k + 1);
    std::iota(perm.begin(), perm.end(), 10);
    rng.shuffle(std::span<Label>(perm));
    std::vector<Label> pt(n), pp(n);
    for (std::size_t i = 0; i < n; ++i) {
      pt[i] = perm[static_cast<std::size_t>(truth[i])];
      pp[i] = perm[static_cast<std::size_t>(pred[i])];
    }
    CHECK(std::abs(weighted_f1(pt, pp) - f) < 1e-12);
    const Metrics m = metrics(confusion(truth, pred));
    double wsum = 0.0;
    for (const auto& c : m.per_class) wsum += c.weight;
    CHECK(wsum == doctest::Approx(1.0));
  }
}

TEST_CASE("accuracy: examples and balanced-class weighted recall") {
  const std::vector<Label> t = {0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
  CHECK(accuracy(t, t) == 1.0);
  std::vector<Label> wrong = t;
  for (Label& l : wrong) l = 1 - l;
  CHECK(accuracy(t, wrong) == 0.0);
  std::vector<Label> half = t;
  for (std::size_t i = 0; i < 5; ++i) half[i] = 1 - half[i];
  CHECK(accuracy(t, half) == doctest::Approx(0.5));
  const Metrics m = metrics(confusion(t, half));
  double wrecall = 0.0;
  for (const auto& c : m.per_class) wrecall += c.weight * c.recall;
  CHECK(m.accuracy == doctest::Approx(wrecall));
}

TEST_CASE("confusion: counts are consistent with the matrix and merge adds up") {
  Rng rng(2);
  ConfusionCounts pooled;
  std::int64_t n_all = 0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 1 + rng.uniform_index(40);
    std::vector<Label> truth(n), pred(n);
    for (std::size_t i = 0; i < n; ++i) {
      truth[i] = static_cast<Label>(rng.uniform_index(5));
      pred[i] = static_cast<Label>(rng.uniform_index(5));
    }
    const ConfusionCounts c = confusion(truth, pred);
    std::int64_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < c.classes.size(); ++i) {
      tp += c.tp(i);
      fp += c.fp(i);
      fn += c.fn(i);
      std::int64_t col = 0;
      for (std::size_t r = 0; r < c.classes.size(); ++r) col += c.matrix[r][i];
      CHECK(c.tp(i) + c.fp(i) == col);
    }
    CHECK(tp + fp == static_cast<std::int64_t>(n));
    CHECK(tp + fn == static_cast<std::int64_t>(n));
    CHECK(c.total() == static_cast<std::int64_t>(n));
    pooled.merge(c);
    n_all += static_cast<std::int64_t>(n);
  }
  CHECK(pooled.total() == n_all);
}

TEST_CASE("run_cv: deterministic, scores every fold and keeps subjects apart") {
  PipelineConfig c = small_config();
  c.level = FeatureLevel::kCompl;
  c.classifier.kind = classifiers::Kind::kNcc;
  const auto frames = synth_frames(c);
  dataio::SplitParams sp;
  sp.mode = dataio::SplitMode::kSubjectGroups;
  sp.k = 2;
  const auto plan = dataio::make_splits(frames, sp);
  REQUIRE(plan.folds.size() == 2);
  for (const auto& f : plan.folds) {
    std::set<std::string> train_subjects, test_subjects;
    for (auto i : f.train) train_subjects.insert(frames[i].source.subject_id);
    for (auto i : f.test) test_subjects.insert(frames[i].source.subject_id);
    for (const auto& s : test_subjects) CHECK(train_subjects.count(s) == 0);
  }
  const EvalReport a = run_cv(frames, plan, c);
  const EvalReport b = run_cv(frames, plan, c);
  CHECK(report_text(a) == report_text(b));
  CHECK(a.pooled_counts.total() == static_cast<std::int64_t>(frames.size()));
  CHECK(a.pooled.weighted_f1 >= 0.0);
  CHECK(a.pooled.weighted_f1 <= 1.0);
  const std::string text = report_text(a);
  CHECK(text.rfind("mlcfl-report-version: 1\n", 0) == 0);
  CHECK(text.find("weighted_f1") != std::string::npos);
}

TEST_CASE("run_cv: poisoning the test fold leaves every fitted parameter unchanged") {
  PipelineConfig c = small_config();
  c.level = FeatureLevel::kMlcf;
  c.classifier.kind = classifiers::Kind::kSvm;
  auto frames = synth_frames(c);
  dataio::SplitParams sp;
  sp.k = 4;
  sp.seed = 5;
  const auto full = dataio::make_splits(frames, sp);
  dataio::SplitPlan plan;
  plan.folds = {full.folds[1]};

  std::string clean;
  const auto capture = [](std::string* out) {
    return [out](std::size_t, const FeaturePipeline& p, const TrainedClassifier& clf) {
      *out = fitted_bytes(p, clf);
    };
  };
  run_cv(frames, plan, c, {}, capture(&clean));
  for (auto i : plan.folds[0].test) {
    frames[i].samples.setConstant(7.77e5);
    frames[i].label = 2;
  }
  std::string poisoned;
  const EvalReport r = run_cv(frames, plan, c, {}, capture(&poisoned));
  CHECK_FALSE(clean.empty());
  CHECK(clean == poisoned);
  CHECK(r.folds[0].n_test == plan.folds[0].test.size());

  frames[plan.folds[0].train.front()].samples.setConstant(7.77e5);
  std::string leaked;
  run_cv(frames, plan, c, {}, capture(&leaked));
  CHECK(leaked != clean);
}

TEST_CASE("compare_levels: twelve cells in level-major order over a shared split") {
  PipelineConfig c = small_config();
  const auto frames = synth_frames(c);
  dataio::SplitParams sp;
  sp.k = 2;
  sp.seed = 3;
  const auto plan = dataio::make_splits(frames, sp);
  const auto cells = compare_levels(frames, plan, c);
  REQUIRE(cells.size() == 12);
  const FeatureLevel levels[] = {FeatureLevel::kLow, FeatureLevel::kMid, FeatureLevel::kCompl,
                                 FeatureLevel::kMlcf};
  const classifiers::Kind kinds[] = {classifiers::Kind::kKnn, classifiers::Kind::kSvm,
                                     classifiers::Kind::kNcc};
  for (std::size_t i = 0; i < 12; ++i) {
    CHECK(cells[i].level == levels[i / 3]);
    CHECK(cells[i].classifier == kinds[i % 3]);
    CHECK(cells[i].pooled_counts.total() == static_cast<std::int64_t>(frames.size()));
  }
  PipelineConfig single = c;
  single.level = FeatureLevel::kCompl;
  single.classifier.kind = classifiers::Kind::kSvm;
  const EvalReport alone = run_cv(frames, plan, single);
  CHECK(alone.pooled.weighted_f1 == cells[7].pooled.weighted_f1);
  CHECK(alone.folds[0].pred == cells[7].folds[0].pred);

  std::ostringstream table, metrics_csv;
  write_comparison_table(table, cells);
  write_metrics_table(metrics_csv, cells);
  std::istringstream lines(table.str());
  std::string line;
  std::vector<std::string> rows;
  while (std::getline(lines, line)) rows.push_back(line);
  REQUIRE(rows.size() == 6);
  CHECK(rows[0] == "# mlcfl-comparison-version,1");
  CHECK(rows[1] == "level,knn,svm,ncc");
  CHECK(rows[2].rfind("low,", 0) == 0);
  CHECK(rows[5].rfind("mlcf,", 0) == 0);
  CHECK(metrics_csv.str().rfind("# mlcfl-metrics-version,1\n", 0) == 0);
}
