#ifndef MLCFL_CONFIG_H_
#define MLCFL_CONFIG_H_

#include <cstdint>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "mlcfl/classifiers.h"
#include "mlcfl/common.h"
#include "mlcfl/dataio.h"
#include "mlcfl/lowlevel.h"
#include "mlcfl/midlevel.h"
#include "mlcfl/mlpl.h"

namespace mlcfl {

// Every tunable of a run. Defaults reproduce the reference experiment setup:
// 64-sample frames with 50% overlap, 20-sample sub-frames, 300 words per
// channel, alpha 1, latent scales {5, 10}, 3 alternations, 5 neighbors,
// 60 ECDF points and 30 principal components.
struct PipelineConfig {
  dataio::CsvSchema data;
  dataio::FramingParams framing;

  struct LowLevel {
    lowlevel::Family family = lowlevel::Family::kFft;
    std::size_t fft_coeffs = 10;
    std::size_t ecdf_points = 60;
    std::size_t pca_components = 30;
    bool zscore = true;
  } lowlevel;

  struct MidLevel {
    std::size_t dict_k = 300;
    midlevel::SubframeParams sub;
    midlevel::Scope scope = midlevel::Scope::kPerChannel;
    bool l1_normalize = false;
    std::size_t kmeans_max_iter = 100;
  } midlevel;

  // mlpl.seed is ignored; every stage derives its seed from `seed`.
  mlpl::TrainConfig mlpl;

  struct Classifier {
    classifiers::Kind kind = classifiers::Kind::kKnn;
    std::size_t neighbor_k = 5;
    double svm_c = 1.0;
  } classifier;

  FeatureLevel level = FeatureLevel::kMlcf;
  dataio::SplitParams split;

  struct Eval {
    bool compare_levels = false;
  } eval;

  dataio::SynthSpec synth;

  std::uint64_t seed = 0;
  std::size_t jobs = 1;
};

// Fully resolved form, every key present. Keys are emitted sorted, so the
// dump is canonical.
nlohmann::json to_json(const PipelineConfig& config);

// Rejects unknown keys and wrongly typed values; missing keys keep defaults.
PipelineConfig config_from_json(const nlohmann::json& j);
PipelineConfig load_config(const std::filesystem::path& path);

std::string canonical_config_string(const PipelineConfig& config);

}  // namespace mlcfl

#endif  // MLCFL_CONFIG_H_
