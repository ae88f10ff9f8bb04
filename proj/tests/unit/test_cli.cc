#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mlcfl/cli.h"
#include "test_util.h"

using namespace mlcfl;
namespace fs = std::filesystem;

namespace {

struct Result {
  int status = 0;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "mlcfl");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  Result r;
  r.status = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

void spit(const fs::path& p, const std::string& s) {
  std::ofstream(p, std::ios::binary) << s;
}

std::size_t line_count(const std::string& s) {
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

// Fresh directory with a small config and a synthetic CSV.
struct Workspace {
  fs::path dir;
  fs::path config;
  fs::path data;

  explicit Workspace(const std::string& name) {
    dir = fs::temp_directory_path() / ("mlcfl_test_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    config = dir / "config.json";
    data = dir / "data.csv";
    spit(config, R"({
      "midlevel": {"dict_k": 6, "kmeans_max_iter": 10},
      "mlpl": {"scales": [2], "n_iter": 2, "model_null_class": false},
      "synth": {"n_classes": 2, "segments_per_pattern": 2, "samples_per_segment": 160},
      "split": {"k": 2},
      "seed": 4
    })");
    const Result r = run_cli({"synth", "--config", config.string(), "--out", data.string()});
    REQUIRE(r.status == 0);
  }
  ~Workspace() { fs::remove_all(dir); }
};

}  // namespace

TEST_CASE("cli: usage errors exit nonzero and help exits zero") {
  CHECK(run_cli({}).status != 0);
  CHECK(run_cli({"frobnicate"}).status != 0);
  CHECK(run_cli({"--help"}).status == 0);
  CHECK(run_cli({"train", "--data", "x.csv"}).status != 0);
  CHECK(run_cli({"train", "--data", "x.csv", "--model", "m", "--level", "ultra"}).status != 0);
  CHECK(run_cli({"eval", "--data", "x.csv", "--out", "o", "--classifier", "rf"}).status != 0);
  const Result v = run_cli({"--version"});
  CHECK(v.status == 0);
  CHECK(v.out.find("mlcfl") != std::string::npos);
}

TEST_CASE("cli: missing data names the path and writes nothing") {
  Workspace w("missing");
  const fs::path model = w.dir / "model.bin";
  const Result r = run_cli({"train", "--config", w.config.string(), "--data",
                            (w.dir / "nope.csv").string(), "--model", model.string()});
  CHECK(r.status == 1);
  CHECK(r.err.find("nope.csv") != std::string::npos);
  CHECK(r.err.find("dataio") == 0);
  CHECK_FALSE(fs::exists(model));
}

TEST_CASE("cli: train then predict, echoing the resolved config") {
  Workspace w("roundtrip");
  const fs::path model = w.dir / "model.bin";
  const Result t = run_cli({"train", "--config", w.config.string(), "--data", w.data.string(),
                            "--model", model.string(), "--classifier", "svm"});
  REQUIRE(t.status == 0);
  CHECK(t.out.find("dim.low: 30") != std::string::npos);
  CHECK(t.out.find("dim.mid: 18") != std::string::npos);
  CHECK(t.out.find("dim.compl: 48") != std::string::npos);
  CHECK(t.out.find("objective.K2.") != std::string::npos);
  CHECK(t.out.find("\"kind\": \"svm\"") != std::string::npos);

  const fs::path pred = w.dir / "pred.csv";
  const Result p = run_cli({"predict", "--model", model.string(), "--data", w.data.string(),
                            "--out", pred.string()});
  REQUIRE(p.status == 0);
  const std::string csv = slurp(pred);
  CHECK(csv.rfind("subject,start,end,predicted,predicted_label,score_", 0) == 0);

  const ModelContainer m = load_model(model);
  const PipelineConfig c = m.config();
  CHECK(c.classifier.kind == classifiers::Kind::kSvm);
  const auto s = dataio::synth_streams(c.synth, c.seed);
  const auto frames = dataio::frame_streams(s.streams, c.framing);
  CHECK(line_count(csv) == frames.size() + 1);
  const auto x = m.pipeline.transform(frames, m.level).at(m.level);
  std::istringstream rows(csv);
  std::string line;
  std::getline(rows, line);
  for (std::size_t i = 0; i < frames.size(); ++i) {
    REQUIRE(std::getline(rows, line));
    std::vector<std::string> cells;
    std::stringstream ls(line);
    for (std::string cell; std::getline(ls, cell, ',');) cells.push_back(cell);
    REQUIRE(cells.size() >= 5);
    CHECK(cells[1] == std::to_string(frames[i].source.offset));
    CHECK(std::stoi(cells[3]) ==
          m.classifier.predict(x.row(static_cast<Eigen::Index>(i)).transpose()));
  }
  const auto echo = nlohmann::json::parse(slurp(pred.string() + ".config.json"));
  CHECK(echo.dump(2) == m.config_json);
}

TEST_CASE("cli: empty data gives a header-only prediction file") {
  Workspace w("empty");
  const fs::path model = w.dir / "model.bin";
  REQUIRE(run_cli({"train", "--config", w.config.string(), "--data", w.data.string(), "--model",
                   model.string(), "--level", "compl"})
              .status == 0);
  const std::string all = slurp(w.data);
  const fs::path empty = w.dir / "empty.csv";
  spit(empty, all.substr(0, all.find('\n') + 1));
  const fs::path pred = w.dir / "pred.csv";
  const Result p = run_cli({"predict", "--model", model.string(), "--data", empty.string(),
                            "--out", pred.string()});
  REQUIRE(p.status == 0);
  const std::string csv = slurp(pred);
  CHECK(line_count(csv) == 1);
  CHECK(csv.find("votes_") != std::string::npos);
}

TEST_CASE("cli: mismatched data config, tampered model and partial outputs") {
  Workspace w("failures");
  const fs::path model = w.dir / "model.bin";
  REQUIRE(run_cli({"train", "--config", w.config.string(), "--data", w.data.string(), "--model",
                   model.string(), "--level", "mid", "--classifier", "ncc"})
              .status == 0);

  const fs::path other = w.dir / "other.json";
  spit(other, R"({"framing": {"window": 32}})");
  const fs::path pred = w.dir / "pred.csv";
  Result r = run_cli({"predict", "--model", model.string(), "--data", w.data.string(), "--out",
                      pred.string(), "--config", other.string()});
  CHECK(r.status == 1);
  CHECK(r.err.find("dimension mismatch") != std::string::npos);
  CHECK_FALSE(fs::exists(pred));

  std::string bytes = slurp(model);
  const std::uint32_t v = 7;
  std::memcpy(bytes.data() + 8, &v, 4);
  const fs::path tampered = w.dir / "tampered.bin";
  spit(tampered, bytes);
  r = run_cli({"predict", "--model", tampered.string(), "--data", w.data.string(), "--out",
               pred.string()});
  CHECK(r.status == 1);
  CHECK(r.err.find("version 7") != std::string::npos);
  CHECK_FALSE(fs::exists(pred));

  // The sidecar cannot be written, so the prediction file must not survive.
  fs::create_directories(w.dir / "pred.csv.config.json" / "blocker");
  r = run_cli({"predict", "--model", model.string(), "--data", w.data.string(), "--out",
               pred.string()});
  CHECK(r.status == 1);
  CHECK_FALSE(fs::exists(pred));
  for (const auto& e : fs::directory_iterator(w.dir))
    CHECK(e.path().filename().string().find(".tmp") == std::string::npos);
}

TEST_CASE("cli: eval writes versioned reports and repeats exactly") {
  Workspace w("eval");
  const fs::path a = w.dir / "a", b = w.dir / "b";
  const Result ra = run_cli({"eval", "--config", w.config.string(), "--data", w.data.string(),
                             "--out", a.string(), "--level", "compl", "--classifier", "knn"});
  REQUIRE(ra.status == 0);
  CHECK(ra.out.find("weighted_f1 (compl/knn): ") != std::string::npos);
  CHECK(ra.out.find("+/-") != std::string::npos);
  REQUIRE(run_cli({"eval", "--config", w.config.string(), "--data", w.data.string(), "--out",
                   b.string(), "--level", "compl", "--classifier", "knn"})
              .status == 0);
  for (const char* f : {"report.txt", "metrics.csv", "config.json"}) {
    REQUIRE(fs::exists(a / f));
    CHECK(slurp(a / f) == slurp(b / f));
  }
  CHECK_FALSE(fs::exists(a / "comparison.csv"));
  CHECK(slurp(a / "report.txt").rfind("mlcfl-report-version: 1", 0) == 0);
}
