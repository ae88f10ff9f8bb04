#ifndef MLCFL_CONTAINER_H_
#define MLCFL_CONTAINER_H_

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mlcfl/config.h"
#include "mlcfl/pipeline.h"

namespace mlcfl {

inline constexpr std::uint32_t kModelFormatVersion = 1;
inline constexpr std::string_view kModelMagic = "MLCFLMDL";

// Everything needed to predict: a single self-describing file. The config is
// kept as the exact JSON text it was trained with.
struct ModelContainer {
  std::string config_json;
  std::vector<std::string> label_names;
  FeatureLevel level = FeatureLevel::kMlcf;
  FeaturePipeline pipeline;
  TrainedClassifier classifier;
  // Creation metadata. Deliberately free of timestamps and host names so
  // that retraining with the same inputs reproduces the file exactly.
  std::string creator;

  PipelineConfig config() const;
};

std::string encode_model(const ModelContainer& model);
// Rejects a wrong magic, any other format version, and trailing bytes.
ModelContainer decode_model(std::string_view bytes);

// Writes via a temporary file in the same directory, then renames.
void save_model(const ModelContainer& model, const std::filesystem::path& path);
ModelContainer load_model(const std::filesystem::path& path);

std::string read_file(const std::filesystem::path& path, std::string_view module);
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes,
                       std::string_view module);

std::string creator_string();

}  // namespace mlcfl

#endif  // MLCFL_CONTAINER_H_
