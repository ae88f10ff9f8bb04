#ifndef MLCFL_PIPELINE_H_
#define MLCFL_PIPELINE_H_

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "mlcfl/classifiers.h"
#include "mlcfl/config.h"
#include "mlcfl/dataio.h"
#include "mlcfl/lowlevel.h"
#include "mlcfl/midlevel.h"
#include "mlcfl/mlpl.h"

namespace mlcfl {

// Fitted low-level extractor: raw descriptor, optional PCA, optional z-score.
struct LowLevelStage {
  lowlevel::Family family = lowlevel::Family::kFft;
  std::size_t fft_coeffs = 10;
  std::size_t ecdf_points = 60;
  std::optional<lowlevel::PcaParams> pca;
  std::optional<lowlevel::NormalizerParams> normalizer;

  Vector raw(const dataio::Frame& frame) const;
  FeatureVector transform(const dataio::Frame& frame) const;
};

LowLevelStage fit_lowlevel(std::span<const dataio::Frame> frames,
                           const PipelineConfig::LowLevel& config);

// Per-level feature rows for a batch of frames. Levels above the requested
// one are left empty.
struct LevelFeatures {
  DataMatrix low;
  DataMatrix mid;
  DataMatrix compl_;
  DataMatrix mlcf;

  const DataMatrix& at(FeatureLevel level) const;
};

class FeaturePipeline {
 public:
  FeaturePipeline() = default;

  // Fits everything from `train` alone: low-level normalizer and PCA,
  // codebooks, and (for the mlcf level) the latent models. Warnings, such as
  // classes too small to model, are appended to `warnings`.
  static FeaturePipeline fit(std::span<const dataio::Frame> train,
                             const PipelineConfig& config, FeatureLevel up_to,
                             std::vector<std::string>* warnings = nullptr);

  LevelFeatures transform(std::span<const dataio::Frame> frames,
                          FeatureLevel up_to) const;

  FeatureLevel top_level() const;
  std::size_t dimension(FeatureLevel level) const;
  std::size_t channel_count() const { return channels_; }
  std::size_t window() const { return window_; }

  const LowLevelStage& low() const { return low_; }
  const std::optional<midlevel::BowEncoder>& bow() const { return bow_; }
  const std::optional<mlpl::MlplModel>& mlpl() const { return mlpl_; }
  bool l1_normalize() const { return l1_normalize_; }

  // Used by the model container when loading.
  static FeaturePipeline assemble(std::size_t channels, std::size_t window,
                                  LowLevelStage low,
                                  std::optional<midlevel::BowEncoder> bow,
                                  std::optional<mlpl::MlplModel> mlpl,
                                  bool l1_normalize);

 private:
  std::size_t channels_ = 0;
  std::size_t window_ = 0;
  LowLevelStage low_;
  std::optional<midlevel::BowEncoder> bow_;
  std::optional<mlpl::MlplModel> mlpl_;
  bool l1_normalize_ = false;
};

struct TrainedClassifier {
  classifiers::Kind kind = classifiers::Kind::kKnn;
  std::variant<classifiers::KnnModel, classifiers::LinearClassifier,
               classifiers::NccModel>
      model;

  Label predict(const Eigen::Ref<const Vector>& x) const;
  std::size_t dimension() const;
};

TrainedClassifier fit_classifier(const DataMatrix& x, std::span<const Label> y,
                                 const PipelineConfig& config);

std::vector<Label> frame_labels(std::span<const dataio::Frame> frames);

}  // namespace mlcfl

#endif  // MLCFL_PIPELINE_H_
