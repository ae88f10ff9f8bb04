#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "mlcfl/cli.h"
#include "mlcfl/container.h"
#include "mlcfl/evaluation.h"
#include "mlcfl/mlpl.h"

namespace py = pybind11;
using namespace mlcfl;

namespace {

nlohmann::json to_nlohmann(const py::object& obj) {
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

py::object to_python(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

PipelineConfig config_arg(const py::object& config) {
  if (config.is_none()) return PipelineConfig{};
  if (py::isinstance<py::str>(config) || py::hasattr(config, "__fspath__"))
    return load_config(config.cast<std::filesystem::path>());
  return config_from_json(to_nlohmann(config));
}

py::dict report_dict(const evaluation::EvalReport& r) {
  py::dict d;
  d["level"] = std::string(to_string(r.level));
  d["classifier"] = std::string(classifiers::to_string(r.classifier));
  d["weighted_f1"] = r.pooled.weighted_f1;
  d["accuracy"] = r.pooled.accuracy;
  d["mean_weighted_f1"] = r.mean_weighted_f1;
  d["std_weighted_f1"] = r.std_weighted_f1;
  d["folds"] = r.folds.size();
  d["label_names"] = r.label_names;
  return d;
}

// frames: (n, channels, window) float64.
std::vector<dataio::Frame> frames_from_array(
    const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 3) throw Error("python", "frames must have shape (n, channels, window)");
  const auto n = a.shape(0), c = a.shape(1), w = a.shape(2);
  const auto view = a.unchecked<3>();
  std::vector<dataio::Frame> frames(static_cast<std::size_t>(n));
  for (py::ssize_t i = 0; i < n; ++i) {
    auto& f = frames[static_cast<std::size_t>(i)];
    f.samples.resize(c, w);
    for (py::ssize_t ch = 0; ch < c; ++ch)
      for (py::ssize_t t = 0; t < w; ++t) f.samples(ch, t) = view(i, ch, t);
    f.source.offset = static_cast<std::size_t>(i) * static_cast<std::size_t>(w);
  }
  return frames;
}

}  // namespace

PYBIND11_MODULE(mlcfl, m) {
  m.doc() = "Multi-level complementary feature learning for sensor-based action recognition";
  m.attr("__version__") = PROJECT_VERSION;
  py::register_exception<Error>(m, "MlcflError", PyExc_RuntimeError);

  m.def("default_config", [] { return to_python(to_json(PipelineConfig{})); },
        "Default pipeline configuration as a dict.");
  m.def("resolve_config", [](const py::object& config) { return to_python(to_json(config_arg(config))); },
        py::arg("config") = py::none(), "Fill in defaults and validate a config dict or file.");

  m.def(
      "weighted_f1",
      [](const std::vector<Label>& truth, const std::vector<Label>& pred) {
        return evaluation::weighted_f1(truth, pred);
      },
      py::arg("truth"), py::arg("pred"));
  m.def(
      "accuracy",
      [](const std::vector<Label>& truth, const std::vector<Label>& pred) {
        return evaluation::accuracy(truth, pred);
      },
      py::arg("truth"), py::arg("pred"));
  m.def(
      "embedding_dimension",
      [](std::size_t n_classes, const std::vector<int>& scales) {
        return mlpl::embedding_dimension(n_classes, scales);
      },
      py::arg("n_classes"), py::arg("scales"));

  m.def(
      "kmeans",
      [](const DataMatrix& samples, std::size_t k, std::uint64_t seed, std::size_t max_iter,
         std::size_t restarts) {
        const auto r = midlevel::kmeans_fit(samples, k, {max_iter, seed, restarts});
        py::dict d;
        d["centroids"] = r.codebook.centroids;
        d["assignment"] = r.assignment;
        d["inertia_trace"] = r.inertia_trace;
        d["converged"] = r.converged;
        return d;
      },
      py::arg("samples"), py::arg("k"), py::arg("seed") = 0, py::arg("max_iter") = 100,
      py::arg("restarts") = 1);

  m.def(
      "synth",
      [](const std::filesystem::path& out, const py::object& config) {
        std::ostringstream log;
        cli::cmd_synth(config_arg(config), out, log);
        return log.str();
      },
      py::arg("out"), py::arg("config") = py::none(),
      "Write a synthetic dataset as CSV; returns the log text.");
  m.def(
      "train",
      [](const std::filesystem::path& data, const std::filesystem::path& model,
         const py::object& config) {
        std::ostringstream log;
        const auto summary = cli::cmd_train(config_arg(config), data, model, log);
        py::dict d;
        d["log"] = log.str();
        d["warnings"] = summary.warnings;
        d["dimension"] = summary.model.classifier.dimension();
        return d;
      },
      py::arg("data"), py::arg("model"), py::arg("config") = py::none());
  m.def(
      "evaluate",
      [](const std::filesystem::path& data, const std::filesystem::path& out_dir,
         const py::object& config) {
        std::ostringstream log;
        py::list reports;
        for (const auto& r : cli::cmd_eval(config_arg(config), data, out_dir, log))
          reports.append(report_dict(r));
        return reports;
      },
      py::arg("data"), py::arg("out_dir"), py::arg("config") = py::none(),
      "Cross-validate; returns one dict per evaluated (level, classifier) cell.");
  m.def(
      "predict",
      [](const std::filesystem::path& model, const std::filesystem::path& data,
         const std::filesystem::path& out) {
        std::ostringstream log;
        cli::cmd_predict(model, data, out, std::nullopt, log);
      },
      py::arg("model"), py::arg("data"), py::arg("out"));

  py::class_<ModelContainer>(m, "Model")
      .def_static("load", &load_model, py::arg("path"))
      .def("save", [](const ModelContainer& self, const std::filesystem::path& p) { save_model(self, p); },
           py::arg("path"))
      .def_property_readonly("level", [](const ModelContainer& self) { return std::string(to_string(self.level)); })
      .def_property_readonly("label_names", [](const ModelContainer& self) { return self.label_names; })
      .def_property_readonly("config", [](const ModelContainer& self) {
        return to_python(nlohmann::json::parse(self.config_json));
      })
      .def_property_readonly("channels", [](const ModelContainer& self) { return self.pipeline.channel_count(); })
      .def_property_readonly("window", [](const ModelContainer& self) { return self.pipeline.window(); })
      .def(
          "transform",
          [](const ModelContainer& self,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& frames) {
            const auto f = frames_from_array(frames);
            return DataMatrix(self.pipeline.transform(f, self.level).at(self.level));
          },
          py::arg("frames"), "Features of frames shaped (n, channels, window).")
      .def(
          "predict",
          [](const ModelContainer& self,
             const py::array_t<double, py::array::c_style | py::array::forcecast>& frames) {
            const auto f = frames_from_array(frames);
            const DataMatrix x = self.pipeline.transform(f, self.level).at(self.level);
            std::vector<Label> out(f.size());
            for (Eigen::Index i = 0; i < x.rows(); ++i)
              out[static_cast<std::size_t>(i)] = self.classifier.predict(x.row(i).transpose());
            return out;
          },
          py::arg("frames"), "Class indices for frames shaped (n, channels, window).")
      .def("to_bytes", [](const ModelContainer& self) { return py::bytes(encode_model(self)); })
      .def_static("from_bytes", [](const py::bytes& b) { return decode_model(std::string(b)); });
}
