#include "mlcfl/common.h"

#include <cstdio>

namespace mlcfl {

std::string_view to_string(FeatureLevel level) {
  switch (level) {
    case FeatureLevel::kLow:
      return "low";
    case FeatureLevel::kMid:
      return "mid";
    case FeatureLevel::kCompl:
      return "compl";
    case FeatureLevel::kMlcf:
      return "mlcf";
  }
  return "unknown";
}

FeatureLevel parse_feature_level(std::string_view name) {
  if (name == "low") return FeatureLevel::kLow;
  if (name == "mid") return FeatureLevel::kMid;
  if (name == "compl") return FeatureLevel::kCompl;
  if (name == "mlcf") return FeatureLevel::kMlcf;
  throw Error("config", "unknown feature level '" + std::string(name) +
                            "' (expected low|mid|compl|mlcf)");
}

std::uint64_t parameter_hash(std::string_view description) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : description) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string make_provenance(std::string_view extractor,
                            std::string_view parameters) {
  char hash[17];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(parameter_hash(parameters)));
  std::string out(extractor);
  out += '[';
  out += parameters;
  out += "]#";
  out += hash;
  return out;
}

std::string format_real(double value) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

}  // namespace mlcfl
