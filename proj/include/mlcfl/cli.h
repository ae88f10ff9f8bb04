#ifndef MLCFL_CLI_H_
#define MLCFL_CLI_H_

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mlcfl/config.h"
#include "mlcfl/container.h"
#include "mlcfl/evaluation.h"

namespace mlcfl::cli {

// Flag values that override config keys when present.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::optional<FeatureLevel> level;
  std::optional<classifiers::Kind> classifier;
};

PipelineConfig resolve_config(const std::optional<std::filesystem::path>& config_path,
                              const Overrides& overrides);

struct TrainSummary {
  ModelContainer model;
  std::vector<std::string> warnings;
};

TrainSummary cmd_train(const PipelineConfig& config, const std::filesystem::path& data,
                       const std::filesystem::path& model_out, std::ostream& log);

// Writes report.txt and metrics.csv (plus comparison.csv in compare-levels
// mode) into out_dir. Returns the headline report.
std::vector<evaluation::EvalReport> cmd_eval(const PipelineConfig& config,
                                             const std::filesystem::path& data,
                                             const std::filesystem::path& out_dir,
                                             std::ostream& log);

// Writes one CSV row per frame to out and the resolved config to
// out + ".config.json". `data_config` overrides the stored data schema and
// framing when given.
void cmd_predict(const std::filesystem::path& model_path, const std::filesystem::path& data,
                 const std::filesystem::path& out,
                 const std::optional<PipelineConfig>& data_config, std::ostream& log);

void cmd_synth(const PipelineConfig& config, const std::filesystem::path& out,
               std::ostream& log);

// Full command line entry point; returns the process exit status.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mlcfl::cli

#endif  // MLCFL_CLI_H_
