#include "mlcfl/pipeline.h"

#include <algorithm>
#include <map>
#include <string>

#include "mlcfl/rng.h"

namespace mlcfl {
namespace {

constexpr const char* kModule = "pipeline";

// Seed tags for the independently seeded stages.
constexpr std::uint64_t kCodebookSeed = 1;
constexpr std::uint64_t kMlplSeed = 2;
constexpr std::uint64_t kClassifierSeed = 3;

int level_rank(FeatureLevel level) {
  switch (level) {
    case FeatureLevel::kLow:
      return 0;
    case FeatureLevel::kMid:
      return 1;
    case FeatureLevel::kCompl:
      return 2;
    case FeatureLevel::kMlcf:
      return 3;
  }
  return 0;
}

bool needs_bow(FeatureLevel up_to) { return level_rank(up_to) >= 1; }

DataMatrix rows_of(std::span<const dataio::Frame> frames,
                   const auto& extract) {
  std::vector<Vector> rows;
  rows.reserve(frames.size());
  for (const auto& f : frames) rows.push_back(extract(f));
  return lowlevel::stack_rows(rows);
}

}  // namespace

Vector LowLevelStage::raw(const dataio::Frame& frame) const {
  switch (family) {
    case lowlevel::Family::kStat:
      return lowlevel::stat_features(frame.samples);
    case lowlevel::Family::kFft:
      return lowlevel::fft_features(frame.samples, fft_coeffs);
    case lowlevel::Family::kEcdfPca:
      return lowlevel::ecdf_features(frame.samples, ecdf_points);
  }
  throw Error(kModule, "unknown low-level family");
}

FeatureVector LowLevelStage::transform(const dataio::Frame& frame) const {
  Vector v = raw(frame);
  if (pca) v = lowlevel::pca_transform(*pca, v);
  if (normalizer) v = lowlevel::zscore_apply(*normalizer, v);
  FeatureVector out;
  out.values = std::move(v);
  out.level = FeatureLevel::kLow;
  out.source = frame.source;
  std::string params = std::string(lowlevel::to_string(family));
  params += ";fft=" + std::to_string(fft_coeffs) + ";ecdf=" + std::to_string(ecdf_points);
  if (pca) params += ";pca=" + std::to_string(pca->n_components);
  if (normalizer) params += ";zscore";
  out.provenance = make_provenance("lowlevel", params);
  return out;
}

LowLevelStage fit_lowlevel(std::span<const dataio::Frame> frames,
                           const PipelineConfig::LowLevel& config) {
  if (frames.empty()) throw Error(kModule, "no training frames");
  LowLevelStage stage;
  stage.family = config.family;
  stage.fft_coeffs = config.fft_coeffs;
  stage.ecdf_points = config.ecdf_points;
  DataMatrix rows = rows_of(frames, [&](const dataio::Frame& f) { return stage.raw(f); });
  if (config.family == lowlevel::Family::kEcdfPca) {
    stage.pca = lowlevel::pca_fit(rows, config.pca_components);
    stage.pca->n_points = config.ecdf_points;
    rows = lowlevel::pca_transform(*stage.pca, rows);
  }
  if (config.zscore) stage.normalizer = lowlevel::zscore_fit(rows);
  return stage;
}

const DataMatrix& LevelFeatures::at(FeatureLevel level) const {
  switch (level) {
    case FeatureLevel::kLow:
      return low;
    case FeatureLevel::kMid:
      return mid;
    case FeatureLevel::kCompl:
      return compl_;
    case FeatureLevel::kMlcf:
      return mlcf;
  }
  return low;
}

FeaturePipeline FeaturePipeline::fit(std::span<const dataio::Frame> train,
                                     const PipelineConfig& config,
                                     FeatureLevel up_to,
                                     std::vector<std::string>* warnings) {
  if (train.empty()) throw Error(kModule, "no training frames");
  FeaturePipeline p;
  p.channels_ = train.front().channel_count();
  p.window_ = train.front().window();
  for (const auto& f : train) {
    if (f.channel_count() != p.channels_ || f.window() != p.window_) {
      throw Error(kModule, "training frames disagree on shape");
    }
  }
  p.l1_normalize_ = config.midlevel.l1_normalize;
  p.low_ = fit_lowlevel(train, config.lowlevel);

  if (needs_bow(up_to)) {
    midlevel::BowFitOptions bow;
    bow.sub = config.midlevel.sub;
    bow.feature = {config.lowlevel.family, config.lowlevel.fft_coeffs,
                   config.lowlevel.ecdf_points};
    bow.scope = config.midlevel.scope;
    bow.dict_k = config.midlevel.dict_k;
    bow.kmeans.max_iter = config.midlevel.kmeans_max_iter;
    bow.kmeans.seed = derive_seed(config.seed, kCodebookSeed);
    p.bow_ = midlevel::fit_bow_encoder(train, bow);
  }

  if (up_to == FeatureLevel::kMlcf) {
    const LevelFeatures feats = p.transform(train, FeatureLevel::kCompl);
    const std::vector<Label> y = frame_labels(train);
    mlpl::TrainConfig tc = config.mlpl;
    tc.seed = derive_seed(config.seed, kMlplSeed);
    tc.skip_small_classes = true;
    std::map<Label, std::size_t> support;
    for (Label l : y) ++support[l];
    const int max_scale = *std::max_element(tc.scales.begin(), tc.scales.end());
    if (warnings) {
      for (const auto& [label, n] : support) {
        if (n < static_cast<std::size_t>(max_scale) && (label != 0 || tc.model_null_class)) {
          warnings->push_back("class " + std::to_string(label) + " has " +
                              std::to_string(n) +
                              " training frames; not given latent models");
        }
      }
    }
    p.mlpl_ = mlpl::mlpl_fit(feats.compl_, y, tc, config.jobs);
  }
  return p;
}

LevelFeatures FeaturePipeline::transform(std::span<const dataio::Frame> frames,
                                         FeatureLevel up_to) const {
  if (level_rank(up_to) > level_rank(top_level())) {
    throw Error(kModule, "pipeline was fitted up to level '" +
                             std::string(to_string(top_level())) + "', cannot produce '" +
                             std::string(to_string(up_to)) + "'");
  }
  for (const auto& f : frames) {
    if (f.channel_count() != channels_ || f.window() != window_) {
      throw Error(kModule, "frame shape " + std::to_string(f.channel_count()) + "x" +
                               std::to_string(f.window()) +
                               " does not match the model's " + std::to_string(channels_) +
                               "x" + std::to_string(window_));
    }
  }
  LevelFeatures out;
  std::vector<Vector> low, mid, compl_rows;
  for (const auto& f : frames) {
    const FeatureVector lf = low_.transform(f);
    low.push_back(lf.values);
    if (needs_bow(up_to)) {
      const midlevel::BowHistogram h = midlevel::bow_encode(*bow_, f);
      mid.push_back(midlevel::histogram_values(h, l1_normalize_));
      if (level_rank(up_to) >= 2)
        compl_rows.push_back(midlevel::compl_concat(lf, h, l1_normalize_).values);
    }
  }
  const auto stack = [&](const std::vector<Vector>& rows, std::size_t dim) {
    if (rows.empty()) return DataMatrix(0, static_cast<Eigen::Index>(dim));
    return lowlevel::stack_rows(rows);
  };
  out.low = stack(low, dimension(FeatureLevel::kLow));
  if (needs_bow(up_to)) out.mid = stack(mid, dimension(FeatureLevel::kMid));
  if (level_rank(up_to) >= 2) out.compl_ = stack(compl_rows, dimension(FeatureLevel::kCompl));
  if (up_to == FeatureLevel::kMlcf) out.mlcf = mlpl::mlpl_transform(*mlpl_, out.compl_);
  return out;
}

FeatureLevel FeaturePipeline::top_level() const {
  if (mlpl_) return FeatureLevel::kMlcf;
  if (bow_) return FeatureLevel::kCompl;
  return FeatureLevel::kLow;
}

std::size_t FeaturePipeline::dimension(FeatureLevel level) const {
  std::size_t low = 0;
  if (low_.pca) {
    low = low_.pca->n_components;
  } else {
    switch (low_.family) {
      case lowlevel::Family::kStat:
        low = lowlevel::stat_dimension(channels_);
        break;
      case lowlevel::Family::kFft:
        low = low_.fft_coeffs * channels_;
        break;
      case lowlevel::Family::kEcdfPca:
        low = low_.ecdf_points * channels_;
        break;
    }
  }
  const std::size_t mid = bow_ ? bow_->histogram_dimension() : 0;
  switch (level) {
    case FeatureLevel::kLow:
      return low;
    case FeatureLevel::kMid:
      return mid;
    case FeatureLevel::kCompl:
      return low + mid;
    case FeatureLevel::kMlcf:
      return mlpl_ ? mlpl_->embedding_dimension() : 0;
  }
  return 0;
}

FeaturePipeline FeaturePipeline::assemble(std::size_t channels, std::size_t window,
                                          LowLevelStage low,
                                          std::optional<midlevel::BowEncoder> bow,
                                          std::optional<mlpl::MlplModel> mlpl,
                                          bool l1_normalize) {
  FeaturePipeline p;
  p.channels_ = channels;
  p.window_ = window;
  p.low_ = std::move(low);
  p.bow_ = std::move(bow);
  p.mlpl_ = std::move(mlpl);
  p.l1_normalize_ = l1_normalize;
  return p;
}

// ---------------------------------------------------------------------------

Label TrainedClassifier::predict(const Eigen::Ref<const Vector>& x) const {
  switch (kind) {
    case classifiers::Kind::kKnn:
      return classifiers::knn_predict(std::get<classifiers::KnnModel>(model), x);
    case classifiers::Kind::kSvm:
      return classifiers::linear_predict(std::get<classifiers::LinearClassifier>(model), x);
    case classifiers::Kind::kNcc:
      return classifiers::ncc_predict(std::get<classifiers::NccModel>(model), x);
  }
  throw Error(kModule, "unknown classifier");
}

std::size_t TrainedClassifier::dimension() const {
  return std::visit(
      [](const auto& m) -> std::size_t {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, classifiers::KnnModel>) {
          return static_cast<std::size_t>(m.points.cols());
        } else if constexpr (std::is_same_v<T, classifiers::LinearClassifier>) {
          return static_cast<std::size_t>(m.weights.rows());
        } else {
          return static_cast<std::size_t>(m.centroids.cols());
        }
      },
      model);
}

TrainedClassifier fit_classifier(const DataMatrix& x, std::span<const Label> y,
                                 const PipelineConfig& config) {
  TrainedClassifier out;
  out.kind = config.classifier.kind;
  switch (config.classifier.kind) {
    case classifiers::Kind::kKnn:
      out.model = classifiers::knn_fit(
          x, std::vector<Label>(y.begin(), y.end()),
          std::min<std::size_t>(config.classifier.neighbor_k, y.size()));
      break;
    case classifiers::Kind::kSvm: {
      mlpl::SolverOptions so = config.mlpl.solver;
      so.seed = derive_seed(config.seed, kClassifierSeed);
      out.model = classifiers::linear_fit(x, y, config.classifier.svm_c, so);
      break;
    }
    case classifiers::Kind::kNcc:
      out.model = classifiers::ncc_fit(x, y);
      break;
  }
  return out;
}

std::vector<Label> frame_labels(std::span<const dataio::Frame> frames) {
  std::vector<Label> y;
  y.reserve(frames.size());
  for (const auto& f : frames) y.push_back(f.label);
  return y;
}

}  // namespace mlcfl
