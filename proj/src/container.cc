#include "mlcfl/container.h"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>

#include "mlcfl/binary_io.h"

namespace mlcfl {
namespace {

constexpr const char* kModule = "container";

void write_labels(ByteWriter& w, std::span<const Label> labels) {
  w.u64(labels.size());
  for (Label l : labels) w.i64(l);
}

std::vector<Label> read_labels(ByteReader& r) {
  std::vector<Label> labels(r.count());
  for (Label& l : labels) l = static_cast<Label>(r.i64());
  return labels;
}

void write_normalizer(ByteWriter& w, const lowlevel::NormalizerParams& n) {
  w.vector(n.mean);
  w.vector(n.stddev);
}

lowlevel::NormalizerParams read_normalizer(ByteReader& r) {
  lowlevel::NormalizerParams n;
  n.mean = r.vector();
  n.stddev = r.vector();
  if (n.mean.size() != n.stddev.size()) throw Error(kModule, "corrupt normalizer");
  return n;
}

void write_low(ByteWriter& w, const LowLevelStage& s) {
  w.u8(static_cast<std::uint8_t>(s.family));
  w.u64(s.fft_coeffs);
  w.u64(s.ecdf_points);
  w.u8(s.pca ? 1 : 0);
  if (s.pca) {
    w.u64(s.pca->n_points);
    w.u64(s.pca->n_components);
    w.matrix(s.pca->basis);
    w.vector(s.pca->center);
    w.vector(s.pca->eigenvalues);
  }
  w.u8(s.normalizer ? 1 : 0);
  if (s.normalizer) write_normalizer(w, *s.normalizer);
}

lowlevel::Family read_family(ByteReader& r) {
  const std::uint8_t f = r.u8();
  if (f > static_cast<std::uint8_t>(lowlevel::Family::kEcdfPca))
    throw Error(kModule, "corrupt low-level family");
  return static_cast<lowlevel::Family>(f);
}

bool read_flag(ByteReader& r) {
  const std::uint8_t f = r.u8();
  if (f > 1) throw Error(kModule, "corrupt flag byte");
  return f == 1;
}

LowLevelStage read_low(ByteReader& r) {
  LowLevelStage s;
  s.family = read_family(r);
  s.fft_coeffs = r.u64();
  s.ecdf_points = r.u64();
  if (read_flag(r)) {
    lowlevel::PcaParams p;
    p.n_points = r.u64();
    p.n_components = r.u64();
    p.basis = r.matrix<Matrix>();
    p.center = r.vector();
    p.eigenvalues = r.vector();
    if (p.basis.rows() != p.center.size() ||
        p.basis.cols() != static_cast<Eigen::Index>(p.n_components))
      throw Error(kModule, "corrupt PCA parameters");
    s.pca = std::move(p);
  }
  if (read_flag(r)) s.normalizer = read_normalizer(r);
  return s;
}

void write_bow(ByteWriter& w, const midlevel::BowEncoder& b) {
  w.u64(b.sub.window);
  w.f64(b.sub.overlap);
  w.u8(static_cast<std::uint8_t>(b.feature.family));
  w.u64(b.feature.fft_coeffs);
  w.u64(b.feature.ecdf_points);
  w.u8(static_cast<std::uint8_t>(b.scope));
  w.u64(b.normalizers.size());
  for (const auto& n : b.normalizers) write_normalizer(w, n);
  w.u64(b.codebooks.size());
  for (const auto& c : b.codebooks) {
    w.matrix(c.centroids);
    w.u64(c.seed);
    w.u64(c.iterations);
  }
}

midlevel::BowEncoder read_bow(ByteReader& r) {
  midlevel::BowEncoder b;
  b.sub.window = r.u64();
  b.sub.overlap = r.f64();
  b.feature.family = read_family(r);
  b.feature.fft_coeffs = r.u64();
  b.feature.ecdf_points = r.u64();
  const std::uint8_t scope = r.u8();
  if (scope > 1) throw Error(kModule, "corrupt codebook scope");
  b.scope = static_cast<midlevel::Scope>(scope);
  b.normalizers.resize(r.count());
  for (auto& n : b.normalizers) n = read_normalizer(r);
  b.codebooks.resize(r.count());
  for (auto& c : b.codebooks) {
    c.centroids = r.matrix<DataMatrix>();
    c.seed = r.u64();
    c.iterations = r.u64();
  }
  if (b.codebooks.size() != b.normalizers.size() || b.codebooks.empty())
    throw Error(kModule, "corrupt codebooks");
  return b;
}

void write_mlpl(ByteWriter& w, const mlpl::MlplModel& m) {
  w.u64(m.input_dim);
  write_labels(w, m.classes);
  w.u64(m.scales.size());
  for (int s : m.scales) w.i64(s);
  w.u64(m.models.size());
  for (const auto& cm : m.models) {
    w.i64(cm.class_id);
    w.i64(cm.scale);
    w.matrix(cm.weights);
  }
  const mlpl::TrainConfig& c = m.config;
  w.f64(c.alpha);
  w.u64(c.n_iter);
  w.u64(c.scales.size());
  for (int s : c.scales) w.i64(s);
  w.u64(c.seed);
  w.u8(c.model_null_class ? 1 : 0);
  w.u64(c.negative_cap);
  w.u8(c.skip_small_classes ? 1 : 0);
  w.f64(c.solver.tol);
  w.u64(c.solver.max_epochs);
  w.u64(c.solver.seed);
  w.u64(c.kmeans_max_iter);
  w.u64(c.init_restarts);
  w.u64(m.objective_traces.size());
  for (const auto& t : m.objective_traces) w.doubles(t);
}

std::vector<int> read_ints(ByteReader& r) {
  std::vector<int> v(r.count());
  for (int& x : v) x = static_cast<int>(r.i64());
  return v;
}

mlpl::MlplModel read_mlpl(ByteReader& r) {
  mlpl::MlplModel m;
  m.input_dim = r.u64();
  m.classes = read_labels(r);
  m.scales = read_ints(r);
  m.models.resize(r.count());
  for (auto& cm : m.models) {
    cm.class_id = static_cast<Label>(r.i64());
    cm.scale = static_cast<int>(r.i64());
    cm.weights = r.matrix<Matrix>();
    if (cm.weights.rows() != static_cast<Eigen::Index>(m.input_dim) ||
        cm.weights.cols() != cm.scale + 1)
      throw Error(kModule, "corrupt latent model");
  }
  if (m.models.size() != m.classes.size() * m.scales.size())
    throw Error(kModule, "corrupt latent model table");
  mlpl::TrainConfig& c = m.config;
  c.alpha = r.f64();
  c.n_iter = r.u64();
  c.scales = read_ints(r);
  c.seed = r.u64();
  c.model_null_class = read_flag(r);
  c.negative_cap = r.u64();
  c.skip_small_classes = read_flag(r);
  c.solver.tol = r.f64();
  c.solver.max_epochs = r.u64();
  c.solver.seed = r.u64();
  c.kmeans_max_iter = r.u64();
  c.init_restarts = r.u64();
  m.objective_traces.resize(r.count());
  for (auto& t : m.objective_traces) t = r.doubles();
  return m;
}

void write_classifier(ByteWriter& w, const TrainedClassifier& c) {
  w.u8(static_cast<std::uint8_t>(c.kind));
  switch (c.kind) {
    case classifiers::Kind::kKnn: {
      const auto& m = std::get<classifiers::KnnModel>(c.model);
      w.matrix(m.points);
      write_labels(w, m.labels);
      w.u64(m.neighbor_k);
      break;
    }
    case classifiers::Kind::kSvm: {
      const auto& m = std::get<classifiers::LinearClassifier>(c.model);
      write_labels(w, m.classes);
      w.matrix(m.weights);
      w.f64(m.c);
      break;
    }
    case classifiers::Kind::kNcc: {
      const auto& m = std::get<classifiers::NccModel>(c.model);
      write_labels(w, m.classes);
      w.matrix(m.centroids);
      break;
    }
  }
}

TrainedClassifier read_classifier(ByteReader& r) {
  TrainedClassifier c;
  const std::uint8_t kind = r.u8();
  if (kind > static_cast<std::uint8_t>(classifiers::Kind::kNcc))
    throw Error(kModule, "corrupt classifier kind");
  c.kind = static_cast<classifiers::Kind>(kind);
  switch (c.kind) {
    case classifiers::Kind::kKnn: {
      classifiers::KnnModel m;
      m.points = r.matrix<DataMatrix>();
      m.labels = read_labels(r);
      m.neighbor_k = r.u64();
      if (m.labels.size() != static_cast<std::size_t>(m.points.rows()) ||
          m.neighbor_k < 1 || m.neighbor_k > m.labels.size())
        throw Error(kModule, "corrupt nearest-neighbor model");
      c.model = std::move(m);
      break;
    }
    case classifiers::Kind::kSvm: {
      classifiers::LinearClassifier m;
      m.classes = read_labels(r);
      m.weights = r.matrix<Matrix>();
      m.c = r.f64();
      if (m.weights.cols() != static_cast<Eigen::Index>(m.classes.size()))
        throw Error(kModule, "corrupt linear model");
      c.model = std::move(m);
      break;
    }
    case classifiers::Kind::kNcc: {
      classifiers::NccModel m;
      m.classes = read_labels(r);
      m.centroids = r.matrix<DataMatrix>();
      if (m.centroids.rows() != static_cast<Eigen::Index>(m.classes.size()))
        throw Error(kModule, "corrupt centroid model");
      c.model = std::move(m);
      break;
    }
  }
  return c;
}

}  // namespace

PipelineConfig ModelContainer::config() const {
  try {
    return config_from_json(nlohmann::json::parse(config_json));
  } catch (const nlohmann::json::exception& e) {
    throw Error(kModule, std::string("stored config is not valid JSON: ") + e.what());
  }
}

std::string creator_string() { return "mlcfl 0.1.0"; }

std::string encode_model(const ModelContainer& model) {
  ByteWriter w;
  w.raw(kModelMagic);
  w.u32(kModelFormatVersion);
  w.str(model.creator);
  w.str(model.config_json);
  w.u64(model.label_names.size());
  for (const auto& name : model.label_names) w.str(name);
  w.u8(static_cast<std::uint8_t>(model.level));
  const FeaturePipeline& p = model.pipeline;
  w.u64(p.channel_count());
  w.u64(p.window());
  w.u8(p.l1_normalize() ? 1 : 0);
  write_low(w, p.low());
  w.u8(p.bow() ? 1 : 0);
  if (p.bow()) write_bow(w, *p.bow());
  w.u8(p.mlpl() ? 1 : 0);
  if (p.mlpl()) write_mlpl(w, *p.mlpl());
  write_classifier(w, model.classifier);
  return w.bytes();
}

ModelContainer decode_model(std::string_view bytes) {
  if (bytes.size() < kModelMagic.size() || bytes.substr(0, kModelMagic.size()) != kModelMagic)
    throw Error(kModule, "not a model container (bad magic)");
  ByteReader r(bytes.substr(kModelMagic.size()), kModule);
  const std::uint32_t version = r.u32();
  if (version != kModelFormatVersion) {
    throw Error(kModule, "unsupported model container version " + std::to_string(version) +
                             " (this build reads version " +
                             std::to_string(kModelFormatVersion) + ")");
  }
  ModelContainer m;
  m.creator = r.str();
  m.config_json = r.str();
  m.label_names.resize(r.count());
  for (auto& name : m.label_names) name = r.str();
  const std::uint8_t level = r.u8();
  if (level > static_cast<std::uint8_t>(FeatureLevel::kMlcf))
    throw Error(kModule, "corrupt feature level");
  m.level = static_cast<FeatureLevel>(level);
  const std::size_t channels = r.u64();
  const std::size_t window = r.u64();
  const bool l1 = read_flag(r);
  LowLevelStage low = read_low(r);
  std::optional<midlevel::BowEncoder> bow;
  if (read_flag(r)) bow = read_bow(r);
  std::optional<mlpl::MlplModel> mlpl;
  if (read_flag(r)) mlpl = read_mlpl(r);
  m.pipeline = FeaturePipeline::assemble(channels, window, std::move(low), std::move(bow),
                                         std::move(mlpl), l1);
  m.classifier = read_classifier(r);
  if (!r.at_end()) throw Error(kModule, "trailing bytes after model container");
  (void)m.config();
  if (m.classifier.dimension() != m.pipeline.dimension(m.level))
    throw Error(kModule, "classifier dimension does not match the feature pipeline");
  return m;
}

std::string read_file(const std::filesystem::path& path, std::string_view module) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(std::string(module), "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes,
                       std::string_view module) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(std::string(module), "cannot write '" + tmp.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      out.close();
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw Error(std::string(module), "write failed for '" + tmp.string() + "'");
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw Error(std::string(module), "cannot move output into '" + path.string() + "'");
  }
}

void save_model(const ModelContainer& model, const std::filesystem::path& path) {
  write_file_atomic(path, encode_model(model), kModule);
}

ModelContainer load_model(const std::filesystem::path& path) {
  return decode_model(read_file(path, kModule));
}

}  // namespace mlcfl
