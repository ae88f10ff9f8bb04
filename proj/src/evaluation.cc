#include "mlcfl/evaluation.h"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>

namespace mlcfl::evaluation {
namespace {

constexpr const char* kModule = "evaluation";

constexpr classifiers::Kind kAllKinds[] = {classifiers::Kind::kKnn, classifiers::Kind::kSvm,
                                           classifiers::Kind::kNcc};
constexpr FeatureLevel kAllLevels[] = {FeatureLevel::kLow, FeatureLevel::kMid,
                                       FeatureLevel::kCompl, FeatureLevel::kMlcf};

void check_lengths(std::span<const Label> truth, std::span<const Label> pred) {
  if (truth.size() != pred.size()) {
    throw Error(kModule, "truth has " + std::to_string(truth.size()) +
                             " labels but prediction has " + std::to_string(pred.size()));
  }
  if (truth.empty()) throw Error(kModule, "no labels to score");
}

std::size_t index_of(const std::vector<Label>& classes, Label l) {
  return static_cast<std::size_t>(
      std::lower_bound(classes.begin(), classes.end(), l) - classes.begin());
}

double ratio(std::int64_t num, std::int64_t den, bool& zero_division) {
  if (den == 0) {
    zero_division = true;
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

std::pair<double, double> mean_std(const std::vector<double>& v) {
  if (v.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  return {mean, std::sqrt(var / static_cast<double>(v.size()))};
}

std::string label_name(const EvalReport& r, Label l) {
  if (l >= 0 && static_cast<std::size_t>(l) < r.label_names.size())
    return r.label_names[static_cast<std::size_t>(l)];
  return std::to_string(l);
}

struct FoldData {
  std::vector<dataio::Frame> train;
  std::vector<dataio::Frame> test;
};

FoldData gather(std::span<const dataio::Frame> frames, const dataio::Fold& fold) {
  FoldData d;
  d.train.reserve(fold.train.size());
  d.test.reserve(fold.test.size());
  for (std::size_t i : fold.train) {
    if (i >= frames.size()) throw Error(kModule, "split refers to a frame out of range");
    d.train.push_back(frames[i]);
  }
  for (std::size_t i : fold.test) {
    if (i >= frames.size()) throw Error(kModule, "split refers to a frame out of range");
    d.test.push_back(frames[i]);
  }
  if (d.train.empty()) throw Error(kModule, "fold has no training frames");
  return d;
}

std::vector<std::string> absent_class_warnings(std::span<const Label> train,
                                               std::span<const Label> test) {
  const std::set<Label> seen(train.begin(), train.end());
  std::set<Label> missing;
  for (Label l : test)
    if (!seen.count(l)) missing.insert(l);
  std::vector<std::string> out;
  for (Label l : missing) {
    out.push_back("class " + std::to_string(l) +
                  " is absent from the training frames; its test frames are still scored");
  }
  return out;
}

FoldResult score_fold(std::size_t fold, std::size_t n_train, const TrainedClassifier& clf,
                      const DataMatrix& test_x, std::vector<Label> truth) {
  FoldResult r;
  r.fold = fold;
  r.n_train = n_train;
  r.n_test = truth.size();
  r.pred.reserve(truth.size());
  for (Eigen::Index i = 0; i < test_x.rows(); ++i)
    r.pred.push_back(clf.predict(test_x.row(i).transpose()));
  r.truth = std::move(truth);
  r.counts = confusion(r.truth, r.pred);
  r.metrics = metrics(r.counts);
  return r;
}

void finalize(EvalReport& report) {
  std::vector<double> f1s, accs;
  bool zero_division = false;
  for (const auto& f : report.folds) {
    report.pooled_counts.merge(f.counts);
    if (f.n_test > 0) {
      f1s.push_back(f.metrics.weighted_f1);
      accs.push_back(f.metrics.accuracy);
      zero_division = zero_division || f.metrics.zero_division;
    }
  }
  report.pooled = metrics(report.pooled_counts);
  zero_division = zero_division || report.pooled.zero_division;
  std::tie(report.mean_weighted_f1, report.std_weighted_f1) = mean_std(f1s);
  std::tie(report.mean_accuracy, report.std_accuracy) = mean_std(accs);
  for (const auto& f : report.folds) {
    if (f.n_test == 0) report.notes.push_back("fold " + std::to_string(f.fold) + " has no test frames");
    for (const auto& w : f.warnings) report.notes.push_back("fold " + std::to_string(f.fold) + ": " + w);
  }
  if (zero_division) {
    report.notes.push_back(
        "a precision or recall had a zero denominator (class never predicted or absent from "
        "the truth); that ratio was taken as 0");
  }
}

}  // namespace

// ---------------------------------------------------------------------------

std::int64_t ConfusionCounts::tp(std::size_t i) const { return matrix[i][i]; }

std::int64_t ConfusionCounts::fp(std::size_t i) const {
  std::int64_t s = 0;
  for (std::size_t t = 0; t < classes.size(); ++t)
    if (t != i) s += matrix[t][i];
  return s;
}

std::int64_t ConfusionCounts::fn(std::size_t i) const {
  std::int64_t s = 0;
  for (std::size_t p = 0; p < classes.size(); ++p)
    if (p != i) s += matrix[i][p];
  return s;
}

std::int64_t ConfusionCounts::support(std::size_t i) const {
  std::int64_t s = 0;
  for (std::int64_t v : matrix[i]) s += v;
  return s;
}

std::int64_t ConfusionCounts::total() const {
  std::int64_t s = 0;
  for (const auto& row : matrix)
    for (std::int64_t v : row) s += v;
  return s;
}

void ConfusionCounts::merge(const ConfusionCounts& other) {
  std::vector<Label> all = classes;
  all.insert(all.end(), other.classes.begin(), other.classes.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  std::vector<std::vector<std::int64_t>> m(all.size(), std::vector<std::int64_t>(all.size(), 0));
  const auto add = [&](const ConfusionCounts& c) {
    for (std::size_t t = 0; t < c.classes.size(); ++t) {
      const std::size_t ti = index_of(all, c.classes[t]);
      for (std::size_t p = 0; p < c.classes.size(); ++p)
        m[ti][index_of(all, c.classes[p])] += c.matrix[t][p];
    }
  };
  add(*this);
  add(other);
  classes = std::move(all);
  matrix = std::move(m);
}

ConfusionCounts confusion(std::span<const Label> truth, std::span<const Label> pred) {
  if (truth.size() != pred.size()) check_lengths(truth, pred);
  ConfusionCounts c;
  c.classes.assign(truth.begin(), truth.end());
  c.classes.insert(c.classes.end(), pred.begin(), pred.end());
  std::sort(c.classes.begin(), c.classes.end());
  c.classes.erase(std::unique(c.classes.begin(), c.classes.end()), c.classes.end());
  c.matrix.assign(c.classes.size(), std::vector<std::int64_t>(c.classes.size(), 0));
  for (std::size_t i = 0; i < truth.size(); ++i)
    ++c.matrix[index_of(c.classes, truth[i])][index_of(c.classes, pred[i])];
  return c;
}

Metrics metrics(const ConfusionCounts& counts) {
  Metrics m;
  m.n = counts.total();
  if (m.n == 0) return m;
  std::int64_t correct = 0;
  for (std::size_t i = 0; i < counts.classes.size(); ++i) {
    ClassMetrics c;
    c.label = counts.classes[i];
    c.support = counts.support(i);
    const std::int64_t tp = counts.tp(i);
    correct += tp;
    c.precision = ratio(tp, tp + counts.fp(i), m.zero_division);
    c.recall = ratio(tp, tp + counts.fn(i), m.zero_division);
    const double pr = c.precision + c.recall;
    c.f1 = pr > 0.0 ? 2.0 * c.precision * c.recall / pr : 0.0;
    c.weight = static_cast<double>(c.support) / static_cast<double>(m.n);
    m.weighted_f1 += c.weight * c.f1;
    m.per_class.push_back(c);
  }
  m.accuracy = static_cast<double>(correct) / static_cast<double>(m.n);
  return m;
}

double weighted_f1(std::span<const Label> truth, std::span<const Label> pred) {
  check_lengths(truth, pred);
  return metrics(confusion(truth, pred)).weighted_f1;
}

double accuracy(std::span<const Label> truth, std::span<const Label> pred) {
  check_lengths(truth, pred);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += truth[i] == pred[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

// ---------------------------------------------------------------------------

EvalReport run_cv(std::span<const dataio::Frame> frames, const dataio::SplitPlan& plan,
                  const PipelineConfig& config, std::span<const std::string> label_names,
                  const FoldObserver& observer) {
  EvalReport report;
  report.level = config.level;
  report.classifier = config.classifier.kind;
  report.label_names.assign(label_names.begin(), label_names.end());
  report.config_echo = canonical_config_string(config);
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    const FoldData data = gather(frames, plan.folds[f]);
    const std::vector<Label> train_y = frame_labels(data.train);
    std::vector<std::string> warnings;
    const FeaturePipeline pipeline =
        FeaturePipeline::fit(data.train, config, config.level, &warnings);
    const LevelFeatures train_x = pipeline.transform(data.train, config.level);
    const TrainedClassifier clf = fit_classifier(train_x.at(config.level), train_y, config);
    if (observer) observer(f, pipeline, clf);
    const LevelFeatures test_x = pipeline.transform(data.test, config.level);
    FoldResult r = score_fold(f, data.train.size(), clf, test_x.at(config.level),
                              frame_labels(data.test));
    r.warnings = std::move(warnings);
    if (config.level == FeatureLevel::kMlcf) {
      for (auto& w : absent_class_warnings(train_y, r.truth)) r.warnings.push_back(std::move(w));
    }
    report.folds.push_back(std::move(r));
  }
  finalize(report);
  return report;
}

std::vector<EvalReport> compare_levels(std::span<const dataio::Frame> frames,
                                       const dataio::SplitPlan& plan,
                                       const PipelineConfig& config,
                                       std::span<const std::string> label_names) {
  std::vector<EvalReport> cells;
  for (FeatureLevel level : kAllLevels) {
    for (classifiers::Kind kind : kAllKinds) {
      PipelineConfig cell = config;
      cell.level = level;
      cell.classifier.kind = kind;
      EvalReport r;
      r.level = level;
      r.classifier = kind;
      r.label_names.assign(label_names.begin(), label_names.end());
      r.config_echo = canonical_config_string(cell);
      cells.push_back(std::move(r));
    }
  }
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    const FoldData data = gather(frames, plan.folds[f]);
    const std::vector<Label> train_y = frame_labels(data.train);
    const std::vector<Label> test_y = frame_labels(data.test);
    std::vector<std::string> warnings;
    const FeaturePipeline pipeline =
        FeaturePipeline::fit(data.train, config, FeatureLevel::kMlcf, &warnings);
    const LevelFeatures train_x = pipeline.transform(data.train, FeatureLevel::kMlcf);
    const LevelFeatures test_x = pipeline.transform(data.test, FeatureLevel::kMlcf);
    const std::vector<std::string> absent = absent_class_warnings(train_y, test_y);
    for (auto& cell : cells) {
      PipelineConfig cc = config;
      cc.classifier.kind = cell.classifier;
      const TrainedClassifier clf = fit_classifier(train_x.at(cell.level), train_y, cc);
      FoldResult r = score_fold(f, data.train.size(), clf, test_x.at(cell.level), test_y);
      if (cell.level == FeatureLevel::kMlcf) {
        r.warnings = warnings;
        r.warnings.insert(r.warnings.end(), absent.begin(), absent.end());
      }
      cell.folds.push_back(std::move(r));
    }
  }
  for (auto& cell : cells) finalize(cell);
  return cells;
}

// ---------------------------------------------------------------------------

void write_report(std::ostream& out, const EvalReport& r) {
  out << "mlcfl-report-version: " << kReportFormatVersion << '\n';
  out << "level: " << to_string(r.level) << '\n';
  out << "classifier: " << classifiers::to_string(r.classifier) << '\n';
  out << "folds: " << r.folds.size() << '\n';
  out << "frames: " << r.pooled.n << '\n';
  out << "weighted_f1: " << format_real(r.pooled.weighted_f1) << '\n';
  out << "accuracy: " << format_real(r.pooled.accuracy) << '\n';
  out << "weighted_f1_fold_mean: " << format_real(r.mean_weighted_f1) << '\n';
  out << "weighted_f1_fold_std: " << format_real(r.std_weighted_f1) << '\n';
  out << "accuracy_fold_mean: " << format_real(r.mean_accuracy) << '\n';
  out << "accuracy_fold_std: " << format_real(r.std_accuracy) << '\n';
  for (const auto& f : r.folds) {
    const std::string k = "fold." + std::to_string(f.fold) + ".";
    out << k << "n_train: " << f.n_train << '\n';
    out << k << "n_test: " << f.n_test << '\n';
    out << k << "weighted_f1: " << format_real(f.metrics.weighted_f1) << '\n';
    out << k << "accuracy: " << format_real(f.metrics.accuracy) << '\n';
  }
  for (const auto& c : r.pooled.per_class) {
    const std::string k = "class." + label_name(r, c.label) + ".";
    out << k << "precision: " << format_real(c.precision) << '\n';
    out << k << "recall: " << format_real(c.recall) << '\n';
    out << k << "f1: " << format_real(c.f1) << '\n';
    out << k << "weight: " << format_real(c.weight) << '\n';
    out << k << "support: " << c.support << '\n';
  }
  out << "confusion (rows truth, columns predicted):\n";
  out << "truth\\pred";
  for (Label l : r.pooled_counts.classes) out << ',' << label_name(r, l);
  out << '\n';
  for (std::size_t t = 0; t < r.pooled_counts.classes.size(); ++t) {
    out << label_name(r, r.pooled_counts.classes[t]);
    for (std::int64_t v : r.pooled_counts.matrix[t]) out << ',' << v;
    out << '\n';
  }
  for (const auto& n : r.notes) out << "note: " << n << '\n';
  out << "config:\n" << r.config_echo << '\n';
}

void write_metrics_table(std::ostream& out, std::span<const EvalReport> reports) {
  out << "# mlcfl-metrics-version," << kReportFormatVersion << '\n';
  out << "level,classifier,fold,n_test,weighted_f1,accuracy\n";
  for (const auto& r : reports) {
    const std::string prefix = std::string(to_string(r.level)) + "," +
                               std::string(classifiers::to_string(r.classifier)) + ",";
    for (const auto& f : r.folds) {
      out << prefix << f.fold << ',' << f.n_test << ',' << format_real(f.metrics.weighted_f1)
          << ',' << format_real(f.metrics.accuracy) << '\n';
    }
    out << prefix << "pooled," << r.pooled.n << ',' << format_real(r.pooled.weighted_f1) << ','
        << format_real(r.pooled.accuracy) << '\n';
    out << prefix << "mean," << r.pooled.n << ',' << format_real(r.mean_weighted_f1) << ','
        << format_real(r.mean_accuracy) << '\n';
    out << prefix << "std," << r.pooled.n << ',' << format_real(r.std_weighted_f1) << ','
        << format_real(r.std_accuracy) << '\n';
  }
}

void write_comparison_table(std::ostream& out, std::span<const EvalReport> reports) {
  out << "# mlcfl-comparison-version," << kReportFormatVersion << '\n';
  out << "level";
  for (classifiers::Kind k : kAllKinds) out << ',' << classifiers::to_string(k);
  out << '\n';
  for (FeatureLevel level : kAllLevels) {
    bool any = false;
    std::string row(to_string(level));
    for (classifiers::Kind k : kAllKinds) {
      row += ',';
      for (const auto& r : reports) {
        if (r.level == level && r.classifier == k) {
          row += format_real(r.pooled.weighted_f1);
          any = true;
          break;
        }
      }
    }
    if (any) out << row << '\n';
  }
}

}  // namespace mlcfl::evaluation
