#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "panodepth/errors.hpp"
#include "panodepth/harness.hpp"

namespace py = pybind11;
using namespace panodepth;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using DoubleArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

Shape shape_of(const py::array& a) {
  Shape s;
  for (py::ssize_t i = 0; i < a.ndim(); ++i) s.push_back(static_cast<std::size_t>(a.shape(i)));
  return s;
}

template <typename T>
py::array_t<T> to_numpy(const Tensor<T>& t) {
  std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
  py::array_t<T> out(shape);
  std::copy(t.data().begin(), t.data().end(), out.mutable_data());
  return out;
}

py::array_t<float> depth_to_numpy(const DepthImage& d) {
  py::array_t<float> out({static_cast<py::ssize_t>(d.height), static_cast<py::ssize_t>(d.width)});
  std::copy(d.values.begin(), d.values.end(), out.mutable_data());
  return out;
}

DepthImage depth_from_numpy(const FloatArray& a) {
  if (a.ndim() != 2) throw DimensionError("expected a 2-D depth map");
  DepthImage d{static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)), {}};
  d.values.assign(a.data(), a.data() + a.size());
  return d;
}

ValidMask mask_for(const py::object& mask, std::size_t n) {
  if (mask.is_none()) return ValidMask(n, 1);
  auto m = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>::ensure(mask);
  if (!m || static_cast<std::size_t>(m.size()) != n) throw DimensionError("mask size does not match the depth maps");
  return ValidMask(m.data(), m.data() + m.size());
}

py::dict metrics_dict(const DepthMetrics& m) {
  py::dict d;
  d["abs_rel"] = m.abs_rel;
  d["sq_rel"] = m.sq_rel;
  d["rmse"] = m.rmse;
  d["rmse_log"] = m.rmse_log;
  d["delta1"] = m.delta1;
  d["delta2"] = m.delta2;
  d["delta3"] = m.delta3;
  return d;
}

ModelConfig model_config(const std::string& text) {
  auto cfg = nlohmann::json::parse(text).get<ModelConfig>();
  cfg.validate();
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Panoramic depth estimation core";

  // Later registrations are tried first, so the base class goes first.
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<DimensionError>(m, "DimensionError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  m.def("preset_config", [](const std::string& name) {
    ModelConfig cfg = name == "desk" ? ModelConfig::desk() : name == "tiny" ? ModelConfig::tiny() : ModelConfig::defaults();
    if (name != "paper" && name != "desk" && name != "tiny") throw ConfigError("unknown preset '" + name + "'");
    return nlohmann::json(cfg).dump();
  });
  m.def("run_config", [] { return nlohmann::json(RunConfig{}).dump(); });

  py::class_<DepthModel<float>>(m, "Model")
      .def(py::init([](const std::string& config_json, std::uint64_t seed) {
             return std::make_unique<DepthModel<float>>(model_config(config_json), seed);
           }),
           py::arg("config_json"), py::arg("seed") = 0)
      .def("forward",
           [](const DepthModel<float>& model, const FloatArray& image) {
             Tensor<float> x(shape_of(image), std::vector<float>(image.data(), image.data() + image.size()));
             NoGradGuard guard;
             return to_numpy(model(x));
           })
      .def("parameter_count", [](const DepthModel<float>& model) { return model.parameter_count(); })
      .def("parameter_groups", [](const DepthModel<float>& model) { return model.parameter_groups(); })
      .def("config_json", [](const DepthModel<float>& model) { return nlohmann::json(model.config()).dump(); });

  m.def(
      "depth_metrics",
      [](const DoubleArray& pred, const DoubleArray& gt, const py::object& mask) {
        if (pred.size() != gt.size()) throw DimensionError("prediction and ground truth differ in size");
        const auto n = static_cast<std::size_t>(pred.size());
        return metrics_dict(depth_metrics<double>({pred.data(), n}, {gt.data(), n}, mask_for(mask, n)));
      },
      py::arg("pred"), py::arg("gt"), py::arg("mask") = py::none());
  m.def(
      "align_depth",
      [](const DoubleArray& pred, const DoubleArray& gt, const py::object& mask) {
        if (pred.size() != gt.size()) throw DimensionError("prediction and ground truth differ in size");
        const auto n = static_cast<std::size_t>(pred.size());
        auto aligned = align_depth<double>({pred.data(), n}, {gt.data(), n}, mask_for(mask, n));
        py::array_t<double> out(pred.request().shape);
        std::copy(aligned.begin(), aligned.end(), out.mutable_data());
        return out;
      },
      py::arg("pred"), py::arg("gt"), py::arg("mask") = py::none());

  m.def("positional_encoding", [](std::size_t n, std::size_t d) { return to_numpy(positional_encoding<double>(n, d)); });

  m.def("read_pfm", [](const std::string& path) { return depth_to_numpy(read_pfm(path)); });
  m.def("write_pfm", [](const std::string& path, const FloatArray& depth) { write_pfm(path, depth_from_numpy(depth)); });

  m.def(
      "synth_room",
      [](std::uint64_t seed, std::size_t index, std::size_t height, std::size_t width) {
        const auto sample = synth_room(random_room(seed, index, height, width));
        return py::make_tuple(to_numpy(sample.rgb), depth_to_numpy(sample.depth));
      },
      py::arg("seed"), py::arg("index"), py::arg("height") = 128, py::arg("width") = 256);
  m.def(
      "room_ray_depth",
      [](std::array<double, 3> extent, std::array<double, 3> camera, double azimuth, double elevation) {
        return room_ray_depth(Room{{extent[0], extent[1], extent[2]}}, Vec3{camera[0], camera[1], camera[2]},
                              SphericalDirection{azimuth, elevation});
      });
  m.def(
      "write_synthetic_dataset",
      [](const std::string& out_dir, std::size_t count, std::uint64_t seed, std::size_t height, std::size_t width) {
        SynthDatasetOptions o;
        o.out_dir = out_dir;
        o.count = count;
        o.seed = seed;
        o.height = height;
        o.width = width;
        return write_synthetic_dataset(o);
      },
      py::arg("out_dir"), py::arg("count") = 16, py::arg("seed") = 0, py::arg("height") = 128,
      py::arg("width") = 256);

  m.def(
      "gradcheck",
      [](const std::string& block, std::uint64_t seed) {
        GradcheckOptions o;
        o.seed = seed;
        const auto r = gradcheck(block, o);
        py::dict d;
        d["block"] = r.block;
        d["max_rel_error"] = r.max_rel_error;
        d["worst_parameter"] = r.worst_parameter;
        d["passed"] = r.passed;
        d["seconds"] = r.seconds;
        return d;
      },
      py::arg("block"), py::arg("seed") = 7);
  m.def("gradcheck_blocks", &gradcheck_blocks);

  m.def(
      "train",
      [](const std::string& run_config_json) {
        const auto cfg = nlohmann::json::parse(run_config_json).get<RunConfig>();
        py::gil_scoped_release release;
        auto result = train(cfg, TrainOptions{.write_outputs = true, .quiet = true});
        return result.step_losses;
      },
      py::arg("run_config_json"));
}
