#include "mlcfl/config.h"

#include <fstream>
#include <set>
#include <string>

namespace mlcfl {
namespace {

constexpr const char* kModule = "config";
using nlohmann::json;

json column_to_json(const dataio::ColumnRef& ref) {
  if (ref.index >= 0) return ref.index;
  return ref.name;
}

dataio::ColumnRef column_from_json(const json& j, const std::string& key) {
  if (j.is_string()) return dataio::ColumnRef::named(j.get<std::string>());
  if (j.is_number_integer() && j.get<int>() >= 0) return dataio::ColumnRef::at(j.get<int>());
  throw Error(kModule, "'" + key + "' must be a column name or a non-negative index");
}

// Reads keys from one JSON object and rejects whatever was not read.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw Error(kModule, "'" + path_ + "' must be an object");
  }
  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) {
        throw Error(kModule, "unknown key '" + qualified(key) + "'");
      }
    }
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw Error(kModule, "wrong type for '" + qualified(key) + "'");
    }
  }

  const json* child(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string qualified(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename Enum, typename Parse>
void get_enum(Section& s, const std::string& key, Enum& out, Parse parse) {
  std::string name;
  bool present = false;
  if (const json* v = s.child(key)) {
    if (!v->is_string()) throw Error(kModule, "'" + s.qualified(key) + "' must be a string");
    name = v->get<std::string>();
    present = true;
  }
  if (present) out = parse(name);
}

}  // namespace

json to_json(const PipelineConfig& c) {
  json channels = json::array();
  for (const auto& ch : c.data.channels) channels.push_back(column_to_json(ch));
  json scales = json::array();
  for (int s : c.mlpl.scales) scales.push_back(s);
  json patterns = json::array();
  for (auto p : c.synth.patterns_per_class) patterns.push_back(p);

  json j;
  j["data"] = {
      {"delimiter", std::string(1, c.data.delimiter)},
      {"has_header", c.data.has_header},
      {"subject", column_to_json(c.data.subject)},
      {"timestamp", column_to_json(c.data.timestamp)},
      {"channels", channels},
      {"label", column_to_json(c.data.label)},
      {"null_label", c.data.null_label},
      {"sample_rate", c.data.sample_rate},
      {"trim_chars", c.data.trim_chars},
  };
  j["framing"] = {
      {"window", c.framing.window},
      {"overlap", c.framing.overlap},
      {"label_policy", std::string(dataio::to_string(c.framing.policy))},
  };
  j["lowlevel"] = {
      {"family", std::string(lowlevel::to_string(c.lowlevel.family))},
      {"fft_coeffs", c.lowlevel.fft_coeffs},
      {"ecdf_points", c.lowlevel.ecdf_points},
      {"pca_components", c.lowlevel.pca_components},
      {"zscore", c.lowlevel.zscore},
  };
  j["midlevel"] = {
      {"dict_k", c.midlevel.dict_k},
      {"sub_window", c.midlevel.sub.window},
      {"sub_overlap", c.midlevel.sub.overlap},
      {"scope", std::string(midlevel::to_string(c.midlevel.scope))},
      {"l1_normalize", c.midlevel.l1_normalize},
      {"kmeans_max_iter", c.midlevel.kmeans_max_iter},
  };
  j["mlpl"] = {
      {"alpha", c.mlpl.alpha},
      {"n_iter", c.mlpl.n_iter},
      {"scales", scales},
      {"model_null_class", c.mlpl.model_null_class},
      {"negative_cap", c.mlpl.negative_cap},
      {"init_restarts", c.mlpl.init_restarts},
      {"solver_tol", c.mlpl.solver.tol},
      {"solver_max_epochs", c.mlpl.solver.max_epochs},
  };
  j["classifier"] = {
      {"kind", std::string(classifiers::to_string(c.classifier.kind))},
      {"neighbor_k", c.classifier.neighbor_k},
      {"svm_c", c.classifier.svm_c},
  };
  j["level"] = std::string(to_string(c.level));
  j["split"] = {
      {"mode", std::string(dataio::to_string(c.split.mode))},
      {"k", c.split.k},
      {"stratified", c.split.stratified},
  };
  j["eval"] = {{"compare_levels", c.eval.compare_levels}};
  j["synth"] = {
      {"n_classes", c.synth.n_classes},
      {"patterns_per_class", patterns},
      {"segments_per_pattern", c.synth.segments_per_pattern},
      {"samples_per_segment", c.synth.samples_per_segment},
      {"noise", c.synth.noise},
      {"channels", c.synth.channels},
      {"n_subjects", c.synth.n_subjects},
      {"sample_rate", c.synth.sample_rate},
  };
  j["seed"] = c.seed;
  j["jobs"] = c.jobs;
  return j;
}

PipelineConfig config_from_json(const json& j) {
  PipelineConfig c;
  Section root(j, "");
  if (const json* d = root.child("data")) {
    Section s(*d, "data");
    std::string delimiter(1, c.data.delimiter);
    s.get("delimiter", delimiter);
    if (delimiter.size() != 1) throw Error(kModule, "'data.delimiter' must be one character");
    c.data.delimiter = delimiter[0];
    s.get("has_header", c.data.has_header);
    if (const json* v = s.child("subject")) c.data.subject = column_from_json(*v, "data.subject");
    if (const json* v = s.child("timestamp")) c.data.timestamp = column_from_json(*v, "data.timestamp");
    if (const json* v = s.child("label")) c.data.label = column_from_json(*v, "data.label");
    if (const json* v = s.child("channels")) {
      if (!v->is_array() || v->empty()) {
        throw Error(kModule, "'data.channels' must be a non-empty array");
      }
      c.data.channels.clear();
      for (const auto& ch : *v) c.data.channels.push_back(column_from_json(ch, "data.channels"));
    }
    s.get("null_label", c.data.null_label);
    s.get("sample_rate", c.data.sample_rate);
    s.get("trim_chars", c.data.trim_chars);
    s.finish();
  }
  if (const json* f = root.child("framing")) {
    Section s(*f, "framing");
    s.get("window", c.framing.window);
    s.get("overlap", c.framing.overlap);
    get_enum(s, "label_policy", c.framing.policy, dataio::parse_label_policy);
    s.finish();
  }
  if (const json* l = root.child("lowlevel")) {
    Section s(*l, "lowlevel");
    get_enum(s, "family", c.lowlevel.family, lowlevel::parse_family);
    s.get("fft_coeffs", c.lowlevel.fft_coeffs);
    s.get("ecdf_points", c.lowlevel.ecdf_points);
    s.get("pca_components", c.lowlevel.pca_components);
    s.get("zscore", c.lowlevel.zscore);
    s.finish();
  }
  if (const json* m = root.child("midlevel")) {
    Section s(*m, "midlevel");
    s.get("dict_k", c.midlevel.dict_k);
    s.get("sub_window", c.midlevel.sub.window);
    s.get("sub_overlap", c.midlevel.sub.overlap);
    get_enum(s, "scope", c.midlevel.scope, midlevel::parse_scope);
    s.get("l1_normalize", c.midlevel.l1_normalize);
    s.get("kmeans_max_iter", c.midlevel.kmeans_max_iter);
    s.finish();
  }
  if (const json* m = root.child("mlpl")) {
    Section s(*m, "mlpl");
    s.get("alpha", c.mlpl.alpha);
    s.get("n_iter", c.mlpl.n_iter);
    s.get("scales", c.mlpl.scales);
    s.get("model_null_class", c.mlpl.model_null_class);
    s.get("negative_cap", c.mlpl.negative_cap);
    s.get("init_restarts", c.mlpl.init_restarts);
    s.get("solver_tol", c.mlpl.solver.tol);
    s.get("solver_max_epochs", c.mlpl.solver.max_epochs);
    s.finish();
  }
  if (const json* k = root.child("classifier")) {
    Section s(*k, "classifier");
    get_enum(s, "kind", c.classifier.kind, classifiers::parse_kind);
    s.get("neighbor_k", c.classifier.neighbor_k);
    s.get("svm_c", c.classifier.svm_c);
    s.finish();
  }
  get_enum(root, "level", c.level, parse_feature_level);
  if (const json* sp = root.child("split")) {
    Section s(*sp, "split");
    get_enum(s, "mode", c.split.mode, dataio::parse_split_mode);
    s.get("k", c.split.k);
    s.get("stratified", c.split.stratified);
    s.finish();
  }
  if (const json* e = root.child("eval")) {
    Section s(*e, "eval");
    s.get("compare_levels", c.eval.compare_levels);
    s.finish();
  }
  if (const json* sy = root.child("synth")) {
    Section s(*sy, "synth");
    s.get("n_classes", c.synth.n_classes);
    s.get("patterns_per_class", c.synth.patterns_per_class);
    s.get("segments_per_pattern", c.synth.segments_per_pattern);
    s.get("samples_per_segment", c.synth.samples_per_segment);
    s.get("noise", c.synth.noise);
    s.get("channels", c.synth.channels);
    s.get("n_subjects", c.synth.n_subjects);
    s.get("sample_rate", c.synth.sample_rate);
    s.finish();
  }
  root.get("seed", c.seed);
  root.get("jobs", c.jobs);
  root.finish();

  c.mlpl.validate();
  if (c.classifier.neighbor_k < 1) throw Error(kModule, "'classifier.neighbor_k' must be >= 1");
  if (!(c.classifier.svm_c > 0.0)) throw Error(kModule, "'classifier.svm_c' must be positive");
  if (c.midlevel.dict_k < 1) throw Error(kModule, "'midlevel.dict_k' must be >= 1");
  return c;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(kModule, "cannot open config file '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw Error(kModule, "cannot parse '" + path.string() + "': " + e.what());
  }
  return config_from_json(j);
}

std::string canonical_config_string(const PipelineConfig& config) {
  return to_json(config).dump(2);
}

}  // namespace mlcfl
