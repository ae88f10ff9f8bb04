#include "mlcfl/cli.h"

#include <algorithm>
#include <fstream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <utility>

#include <CLI11.hpp>

#include "mlcfl/container.h"
#include "mlcfl/rng.h"

namespace mlcfl::cli {
namespace {

constexpr const char* kModule = "cli";
constexpr std::uint64_t kSplitSeed = 4;

// Contents are staged in memory and written only once a command has fully
// succeeded. If a write fails midway, files already written are removed.
class Outputs {
 public:
  void add(std::filesystem::path path, std::string bytes) {
    files_.emplace_back(std::move(path), std::move(bytes));
  }
  void commit() {
    std::vector<std::filesystem::path> done;
    try {
      for (const auto& [path, bytes] : files_) {
        write_file_atomic(path, bytes, kModule);
        done.push_back(path);
      }
    } catch (...) {
      std::error_code ec;
      for (const auto& p : done) std::filesystem::remove(p, ec);
      throw;
    }
  }

 private:
  std::vector<std::pair<std::filesystem::path, std::string>> files_;
};

std::vector<dataio::Frame> load_frames(const PipelineConfig& config,
                                       const std::filesystem::path& data,
                                       std::vector<std::string>& label_names) {
  dataio::LoadResult loaded = dataio::load_csv(data, config.data);
  label_names = std::move(loaded.label_names);
  return dataio::frame_streams(loaded.streams, config.framing);
}

std::string dim_or_na(const FeaturePipeline& p, FeatureLevel level) {
  const int rank = static_cast<int>(level);
  if (rank > static_cast<int>(p.top_level())) return "n/a";
  if (level == FeatureLevel::kMlcf && !p.mlpl()) return "n/a";
  return std::to_string(p.dimension(level));
}

std::string name_of(std::span<const std::string> names, Label l) {
  if (l >= 0 && static_cast<std::size_t>(l) < names.size())
    return names[static_cast<std::size_t>(l)];
  return std::to_string(l);
}

std::string config_sidecar(const PipelineConfig& config) {
  return canonical_config_string(config) + "\n";
}

std::filesystem::path sidecar_path(const std::filesystem::path& out) {
  std::filesystem::path p = out;
  p += ".config.json";
  return p;
}

}  // namespace

PipelineConfig resolve_config(const std::optional<std::filesystem::path>& config_path,
                              const Overrides& overrides) {
  PipelineConfig c = config_path ? load_config(*config_path) : PipelineConfig{};
  if (overrides.seed) c.seed = *overrides.seed;
  if (overrides.jobs) c.jobs = *overrides.jobs;
  if (overrides.level) c.level = *overrides.level;
  if (overrides.classifier) c.classifier.kind = *overrides.classifier;
  if (c.jobs < 1) throw Error("config", "'jobs' must be >= 1");
  c.split.seed = derive_seed(c.seed, kSplitSeed);
  return c;
}

TrainSummary cmd_train(const PipelineConfig& config, const std::filesystem::path& data,
                       const std::filesystem::path& model_out, std::ostream& log) {
  std::vector<std::string> label_names;
  const std::vector<dataio::Frame> frames = load_frames(config, data, label_names);
  if (frames.empty()) throw Error(kModule, "no frames in '" + data.string() + "'");

  TrainSummary s;
  FeaturePipeline pipeline = FeaturePipeline::fit(frames, config, config.level, &s.warnings);
  const LevelFeatures feats = pipeline.transform(frames, config.level);
  const std::vector<Label> y = frame_labels(frames);
  s.model.classifier = fit_classifier(feats.at(config.level), y, config);
  s.model.config_json = canonical_config_string(config);
  s.model.label_names = label_names;
  s.model.level = config.level;
  s.model.creator = creator_string();
  s.model.pipeline = std::move(pipeline);

  Outputs outputs;
  outputs.add(model_out, encode_model(s.model));
  outputs.commit();

  const FeaturePipeline& p = s.model.pipeline;
  log << "frames: " << frames.size() << '\n';
  log << "classes: " << std::set<Label>(y.begin(), y.end()).size() << '\n';
  log << "dim.low: " << dim_or_na(p, FeatureLevel::kLow) << '\n';
  log << "dim.mid: " << dim_or_na(p, FeatureLevel::kMid) << '\n';
  log << "dim.compl: " << dim_or_na(p, FeatureLevel::kCompl) << '\n';
  log << "dim.mlcf: " << dim_or_na(p, FeatureLevel::kMlcf) << '\n';
  if (p.mlpl()) {
    const auto& m = *p.mlpl();
    for (std::size_t i = 0; i < m.models.size(); ++i) {
      log << "objective.K" << m.models[i].scale << "." << name_of(label_names, m.models[i].class_id)
          << ':';
      for (double v : m.objective_traces[i]) log << ' ' << format_real(v);
      log << '\n';
    }
  }
  for (const auto& w : s.warnings) log << "warning: " << w << '\n';
  log << "model: " << model_out.string() << '\n';
  log << "config:\n" << s.model.config_json << '\n';
  return s;
}

std::vector<evaluation::EvalReport> cmd_eval(const PipelineConfig& config,
                                             const std::filesystem::path& data,
                                             const std::filesystem::path& out_dir,
                                             std::ostream& log) {
  std::vector<std::string> label_names;
  const std::vector<dataio::Frame> frames = load_frames(config, data, label_names);
  const dataio::SplitPlan plan = dataio::make_splits(frames, config.split);
  std::vector<evaluation::EvalReport> reports;
  if (config.eval.compare_levels) {
    reports = evaluation::compare_levels(frames, plan, config, label_names);
  } else {
    reports.push_back(evaluation::run_cv(frames, plan, config, label_names));
  }

  std::ostringstream report_txt, metrics_csv;
  for (std::size_t i = 0; i < reports.size(); ++i) {
    if (i > 0) report_txt << "\n";
    evaluation::write_report(report_txt, reports[i]);
  }
  evaluation::write_metrics_table(metrics_csv, reports);

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(kModule, "cannot create output directory '" + out_dir.string() + "'");
  Outputs outputs;
  outputs.add(out_dir / "report.txt", report_txt.str());
  outputs.add(out_dir / "metrics.csv", metrics_csv.str());
  if (config.eval.compare_levels) {
    std::ostringstream table;
    evaluation::write_comparison_table(table, reports);
    outputs.add(out_dir / "comparison.csv", table.str());
  }
  outputs.add(out_dir / "config.json", config_sidecar(config));
  outputs.commit();

  const auto& head = [&]() -> const evaluation::EvalReport& {
    for (const auto& r : reports)
      if (r.level == config.level && r.classifier == config.classifier.kind) return r;
    return reports.front();
  }();
  log << "frames: " << frames.size() << '\n';
  log << "folds: " << plan.folds.size() << '\n';
  if (config.eval.compare_levels) {
    for (const auto& r : reports) {
      log << "cell " << to_string(r.level) << '/' << classifiers::to_string(r.classifier)
          << " weighted_f1: " << format_real(r.pooled.weighted_f1) << '\n';
    }
  }
  log << "weighted_f1 (" << to_string(head.level) << '/'
      << classifiers::to_string(head.classifier) << "): " << format_real(head.pooled.weighted_f1)
      << " (fold mean " << format_real(head.mean_weighted_f1) << " +/- "
      << format_real(head.std_weighted_f1) << ")\n";
  log << "accuracy: " << format_real(head.pooled.accuracy) << '\n';
  for (const auto& n : head.notes) log << "note: " << n << '\n';
  log << "reports: " << out_dir.string() << '\n';
  log << "config:\n" << canonical_config_string(config) << '\n';
  return reports;
}

void cmd_predict(const std::filesystem::path& model_path, const std::filesystem::path& data,
                 const std::filesystem::path& out,
                 const std::optional<PipelineConfig>& data_config, std::ostream& log) {
  const ModelContainer model = load_model(model_path);
  PipelineConfig config = model.config();
  if (data_config) {
    config.data = data_config->data;
    config.framing = data_config->framing;
  }
  const FeaturePipeline& p = model.pipeline;
  if (config.data.channels.size() != p.channel_count() || config.framing.window != p.window()) {
    throw Error(kModule, "feature dimension mismatch: data config gives " +
                             std::to_string(config.data.channels.size()) + " channels x " +
                             std::to_string(config.framing.window) +
                             " samples per frame, model expects " +
                             std::to_string(p.channel_count()) + " x " +
                             std::to_string(p.window()));
  }
  std::vector<std::string> data_labels;
  const std::vector<dataio::Frame> frames = load_frames(config, data, data_labels);
  const LevelFeatures feats = p.transform(frames, model.level);
  const DataMatrix& x = feats.at(model.level);
  if (!frames.empty() && static_cast<std::size_t>(x.cols()) != model.classifier.dimension()) {
    throw Error(kModule, "feature dimension mismatch: features have " +
                             std::to_string(x.cols()) + " values, classifier expects " +
                             std::to_string(model.classifier.dimension()));
  }

  const std::span<const std::string> names = model.label_names;
  std::ostringstream csv;
  csv << "subject,start,end,predicted,predicted_label";
  std::vector<Label> columns;
  std::string prefix;
  switch (model.classifier.kind) {
    case classifiers::Kind::kKnn: {
      const auto& m = std::get<classifiers::KnnModel>(model.classifier.model);
      std::set<Label> s(m.labels.begin(), m.labels.end());
      columns.assign(s.begin(), s.end());
      prefix = "votes_";
      break;
    }
    case classifiers::Kind::kSvm:
      columns = std::get<classifiers::LinearClassifier>(model.classifier.model).classes;
      prefix = "score_";
      break;
    case classifiers::Kind::kNcc:
      columns = std::get<classifiers::NccModel>(model.classifier.model).classes;
      prefix = "distance_";
      break;
  }
  for (Label l : columns) csv << ',' << prefix << name_of(names, l);
  csv << '\n';

  for (std::size_t i = 0; i < frames.size(); ++i) {
    const Vector v = x.row(static_cast<Eigen::Index>(i)).transpose();
    std::vector<std::string> cells;
    Label pred = 0;
    switch (model.classifier.kind) {
      case classifiers::Kind::kKnn: {
        const auto det = classifiers::knn_predict_detail(
            std::get<classifiers::KnnModel>(model.classifier.model), v);
        pred = det.label;
        std::map<Label, std::size_t> votes;
        for (const auto& vote : det.votes) votes[vote.label] = vote.votes;
        for (Label l : columns) cells.push_back(std::to_string(votes[l]));
        break;
      }
      case classifiers::Kind::kSvm: {
        const auto& m = std::get<classifiers::LinearClassifier>(model.classifier.model);
        pred = classifiers::linear_predict(m, v);
        const Vector s = classifiers::linear_scores(m, v);
        for (Eigen::Index c = 0; c < s.size(); ++c) cells.push_back(format_real(s[c]));
        break;
      }
      case classifiers::Kind::kNcc: {
        const auto& m = std::get<classifiers::NccModel>(model.classifier.model);
        pred = classifiers::ncc_predict(m, v);
        for (Eigen::Index c = 0; c < m.centroids.rows(); ++c)
          cells.push_back(format_real((m.centroids.row(c).transpose() - v).norm()));
        break;
      }
    }
    const auto& src = frames[i].source;
    csv << src.subject_id << ',' << src.offset << ',' << src.offset + frames[i].window() << ','
        << pred << ',' << name_of(names, pred);
    for (const auto& c : cells) csv << ',' << c;
    csv << '\n';
  }

  Outputs outputs;
  outputs.add(out, csv.str());
  outputs.add(sidecar_path(out), config_sidecar(config));
  outputs.commit();
  log << "frames: " << frames.size() << '\n';
  log << "predictions: " << out.string() << '\n';
  log << "config:\n" << canonical_config_string(config) << '\n';
}

void cmd_synth(const PipelineConfig& config, const std::filesystem::path& out,
               std::ostream& log) {
  const dataio::SynthResult synth = dataio::synth_streams(config.synth, config.seed);
  std::ostringstream csv;
  dataio::write_csv(csv, synth.streams, synth.label_names);
  Outputs outputs;
  outputs.add(out, csv.str());
  outputs.add(sidecar_path(out), config_sidecar(config));
  outputs.commit();
  std::size_t samples = 0;
  for (const auto& s : synth.streams) samples += s.length();
  log << "streams: " << synth.streams.size() << '\n';
  log << "samples: " << samples << '\n';
  log << "data: " << out.string() << '\n';
  log << "config:\n" << canonical_config_string(config) << '\n';
}

// ---------------------------------------------------------------------------

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-level complementary feature learning for sensor-based action recognition"};
  app.require_subcommand(1);
  app.set_version_flag("--version", creator_string());

  std::string config_path, data_path, model_path, out_path, level, classifier;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;

  const auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Override the config seed");
    sub->add_option("--jobs", jobs, "Worker threads")->check(CLI::PositiveNumber);
  };
  const auto features = [&](CLI::App* sub) {
    sub->add_option("--level", level, "Feature level")
        ->check(CLI::IsMember({"low", "mid", "compl", "mlcf"}));
    sub->add_option("--classifier", classifier, "Classifier")
        ->check(CLI::IsMember({"knn", "svm", "ncc"}));
  };

  CLI::App* train = app.add_subcommand("train", "Fit the pipeline on all data and save a model");
  common(train);
  features(train);
  train->add_option("--data", data_path, "Input CSV")->required();
  train->add_option("--model,--out", model_path, "Model container to write")->required();

  CLI::App* eval = app.add_subcommand("eval", "Cross-validate and write report files");
  common(eval);
  features(eval);
  eval->add_option("--data", data_path, "Input CSV")->required();
  eval->add_option("--out", out_path, "Report directory")->required();

  CLI::App* predict = app.add_subcommand("predict", "Predict every frame of a data file");
  common(predict);
  predict->add_option("--model", model_path, "Model container")->required();
  predict->add_option("--data", data_path, "Input CSV")->required();
  predict->add_option("--out", out_path, "Prediction CSV to write")->required();

  CLI::App* synth = app.add_subcommand("synth", "Write a synthetic data set as CSV");
  common(synth);
  synth->add_option("--out", out_path, "CSV to write")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    Overrides o;
    CLI::App* active = app.get_subcommands().front();
    if (active->count("--seed")) o.seed = seed;
    if (active->count("--jobs")) o.jobs = jobs;
    if (!level.empty()) o.level = parse_feature_level(level);
    if (!classifier.empty()) o.classifier = classifiers::parse_kind(classifier);
    std::optional<std::filesystem::path> cfg;
    if (!config_path.empty()) cfg = config_path;

    if (active == train) {
      cmd_train(resolve_config(cfg, o), data_path, model_path, out);
    } else if (active == eval) {
      cmd_eval(resolve_config(cfg, o), data_path, out_path, out);
    } else if (active == predict) {
      std::optional<PipelineConfig> data_config;
      if (cfg) data_config = resolve_config(cfg, o);
      cmd_predict(model_path, data_path, out_path, data_config, out);
    } else {
      cmd_synth(resolve_config(cfg, o), out_path, out);
    }
  } catch (const Error& e) {
    err << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "mlcfl: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace mlcfl::cli
