#ifndef MLCFL_COMMON_H_
#define MLCFL_COMMON_H_

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace mlcfl {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
// Data sets are stored one instance per row so that rows are contiguous.
using DataMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Class index. 0 is the null class and is treated like any other class.
using Label = int;

// Every error raised by the library carries the name of the module that
// detected it, so the CLI can report "<module>: <message>".
class Error : public std::runtime_error {
 public:
  Error(std::string module, const std::string& message)
      : std::runtime_error(module + ": " + message),
        module_(std::move(module)) {}

  const std::string& module() const { return module_; }

 private:
  std::string module_;
};

// Where a frame came from. Used to check that low- and mid-level features
// being concatenated describe the same frame.
struct FrameSource {
  std::string subject_id;
  std::size_t offset = 0;

  bool operator==(const FrameSource&) const = default;
};

enum class FeatureLevel { kLow, kMid, kCompl, kMlcf };

std::string_view to_string(FeatureLevel level);
FeatureLevel parse_feature_level(std::string_view name);

struct FeatureVector {
  Vector values;
  FeatureLevel level = FeatureLevel::kLow;
  // Extractor name plus a hash of its parameters, e.g. "fft[n=10]#1a2b...".
  std::string provenance;
  FrameSource source;

  std::size_t size() const { return static_cast<std::size_t>(values.size()); }
};

// FNV-1a over a parameter description string; used for provenance tags.
std::uint64_t parameter_hash(std::string_view description);
std::string make_provenance(std::string_view extractor,
                            std::string_view parameters);

// Full-precision "%.17g" form used by every text output.
std::string format_real(double value);

}  // namespace mlcfl

#endif  // MLCFL_COMMON_H_
