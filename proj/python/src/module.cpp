#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "orbitfilter/config.hpp"
#include "orbitfilter/dataset.hpp"
#include "orbitfilter/error.hpp"
#include "orbitfilter/experiment.hpp"
#include "orbitfilter/linksim.hpp"
#include "orbitfilter/models.hpp"
#include "orbitfilter/pipeline.hpp"
#include "orbitfilter/report.hpp"
#include "orbitfilter/serialize.hpp"
#include "orbitfilter/train.hpp"

namespace py = pybind11;
using namespace orbitfilter;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using LabelArray = py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>;

Array to_numpy(const std::vector<LabeledImage>& images) {
  const Shape per = images.empty() ? Shape{3, kImageSize, kImageSize} : images.front().pixels.shape();
  Array out({images.size(), per[0], per[1], per[2]});
  double* dst = out.mutable_data();
  for (const LabeledImage& im : images) {
    const auto src = im.pixels.data();
    dst = std::copy(src.begin(), src.end(), dst);
  }
  return out;
}

std::vector<LabeledImage> from_numpy(const Array& images, const LabelArray* labels) {
  if (images.ndim() != 4) throw ShapeError("images must have shape [N, C, H, W]");
  const auto n = static_cast<std::size_t>(images.shape(0));
  const Shape per{static_cast<std::size_t>(images.shape(1)), static_cast<std::size_t>(images.shape(2)),
                  static_cast<std::size_t>(images.shape(3))};
  if (labels && (labels->ndim() != 1 || static_cast<std::size_t>(labels->shape(0)) != n)) {
    throw ShapeError("labels must be a vector with one entry per image");
  }
  const std::size_t stride = shape_numel(per);
  std::vector<LabeledImage> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* src = images.data() + i * stride;
    Label label = Label::Natural;
    if (labels) {
      const std::int64_t v = labels->data()[i];
      if (v != 0 && v != 1) throw Error("labels must be 0 (natural) or 1 (artificial)");
      label = static_cast<Label>(v);
    }
    out.push_back({Tensor(per, std::vector<double>(src, src + stride)), label, ""});
  }
  return out;
}

LabelArray labels_of(const std::vector<Label>& labels) {
  LabelArray out(static_cast<py::ssize_t>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) out.mutable_data()[i] = static_cast<int>(labels[i]);
  return out;
}

py::dict metrics_dict(const Metrics& m) {
  py::dict d;
  d["tp"] = m.tp;
  d["fp"] = m.fp;
  d["fn"] = m.fn;
  d["tn"] = m.tn;
  d["precision"] = m.precision;
  d["recall"] = m.recall;
  d["f1"] = m.f1;
  d["accuracy"] = m.accuracy;
  return d;
}

py::dict report_dict(const RunReport& r) {
  py::dict d;
  d["mode"] = std::string(mode_name(r.mode));
  d["model"] = r.model;
  d["n_input"] = r.n_input;
  d["n_transmitted"] = r.n_transmitted;
  d["edge_time_s"] = r.edge_time_s;
  d["transmission_time_s"] = r.transmission_time_s;
  d["total_s"] = r.total_s;
  d["metrics"] = r.metrics ? py::object(metrics_dict(*r.metrics)) : py::none();
  return d;
}

LinkParams make_link(double base_latency_s, double per_image_s, double jitter_std_s,
                     std::uint64_t seed) {
  LinkParams p{base_latency_s, per_image_s, jitter_std_s, seed};
  p.validate();
  return p;
}

}  // namespace

PYBIND11_MODULE(_orbitfilter, m) {
  m.doc() = "Onboard image filtering and downlink timing simulator.";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ShapeError>(m, "ShapeError", base.ptr());
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<FormatError>(m, "FormatError", base.ptr());

  m.def("arch_names", &arch_names, "Names of the built-in architectures.");
  m.def("display_name", [](const std::string& arch) { return arch_display_name(arch); });

  m.def(
      "mac_count",
      [](const std::string& arch) {
        const MacReport r = mac_count(build_model(arch));
        py::list layers;
        for (const LayerMacs& l : r.layers) layers.append(py::make_tuple(l.description, l.macs));
        py::dict d;
        d["total"] = r.total;
        d["parameters"] = r.parameters;
        d["layers"] = layers;
        return d;
      },
      py::arg("arch"), "Per-image multiply-accumulate count and parameter count.");

  m.def(
      "transmit",
      [](std::size_t n, double base_latency_s, double per_image_s, double jitter_std_s,
         std::uint64_t seed) {
        const TransmitRecord r = transmit(n, make_link(base_latency_s, per_image_s, jitter_std_s, seed));
        return py::make_tuple(r.transmission_time_s, r.completion_s);
      },
      py::arg("n"), py::arg("base_latency_s"), py::arg("per_image_s"), py::arg("jitter_std_s") = 0.0,
      py::arg("seed") = 0,
      "Downlink n images; returns (total seconds, per-image completion times).");

  m.def(
      "calibrate",
      [](const std::vector<std::pair<double, double>>& points) {
        std::vector<CalibrationPoint> pts;
        for (const auto& [images, seconds] : points) pts.push_back({images, seconds});
        const Calibration c = calibrate(pts);
        return py::make_tuple(c.params.base_latency_s, c.params.per_image_s, c.residual_ss);
      },
      py::arg("points"),
      "Least-squares fit of seconds = a + b * images; returns (a, b, residual sum of squares).");

  m.def("default_link",
        []() {
          const LinkConfig l = default_link();
          return py::make_tuple(l.base_latency_s, l.per_image_s);
        });
  m.def("default_mac_rate", &default_mac_rate);

  m.def("normalize_config", [](const std::string& text) { return dump_config(parse_config(text)); },
        py::arg("text"), "Parse a config document and return it fully resolved.");

  m.def(
      "generate_synthetic",
      [](std::size_t n, std::uint64_t seed) {
        Rng rng(seed, "synth");
        const std::vector<LabeledImage> images = generate_synthetic(n, rng);
        std::vector<Label> labels;
        for (const auto& im : images) labels.push_back(im.label);
        return py::make_tuple(to_numpy(images), labels_of(labels));
      },
      py::arg("n"), py::arg("seed") = 1, "Returns (images [N,3,64,64], labels [N]).");

  m.def(
      "resize_bilinear",
      [](const Array& image, std::size_t h, std::size_t w) {
        if (image.ndim() != 3) throw ShapeError("image must have shape [C, H, W]");
        const Shape s{static_cast<std::size_t>(image.shape(0)), static_cast<std::size_t>(image.shape(1)),
                      static_cast<std::size_t>(image.shape(2))};
        const Tensor out = resize_bilinear(
            Tensor(s, std::vector<double>(image.data(), image.data() + image.size())), h, w);
        Array arr({out.dim(0), out.dim(1), out.dim(2)});
        std::copy(out.data().begin(), out.data().end(), arr.mutable_data());
        return arr;
      },
      py::arg("image"), py::arg("height") = kImageSize, py::arg("width") = kImageSize);

  m.def(
      "metrics",
      [](const LabelArray& truth, const LabelArray& predicted) {
        std::vector<Label> t, p;
        for (py::ssize_t i = 0; i < truth.size(); ++i) t.push_back(static_cast<Label>(truth.data()[i] != 0));
        for (py::ssize_t i = 0; i < predicted.size(); ++i) {
          p.push_back(static_cast<Label>(predicted.data()[i] != 0));
        }
        return metrics_dict(compute_metrics(t, p));
      },
      py::arg("truth"), py::arg("predicted"), "Confusion counts with artificial as positive.");

  py::class_<Model>(m, "Model")
      .def(py::init([](const std::string& arch, std::uint64_t seed) { return build_model(arch, seed); }),
           py::arg("arch"), py::arg("seed") = 0)
      .def_property_readonly("arch", &Model::arch)
      .def_property_readonly("trained", &Model::trained)
      .def_property_readonly("parameter_count", &Model::parameter_count)
      .def(
          "train",
          [](Model& model, const Array& images, const LabelArray& labels, std::size_t epochs,
             std::size_t batch, double lr, std::uint64_t seed) {
            const std::vector<LabeledImage> set = from_numpy(images, &labels);
            TrainConfig tc;
            tc.epochs = epochs;
            tc.batch = batch;
            tc.adam.lr = lr;
            tc.seed = seed;
            std::vector<EpochStats> history;
            {
              py::gil_scoped_release release;
              history = train_model(model, set, tc);
            }
            std::vector<std::pair<double, double>> out;
            for (const EpochStats& e : history) out.emplace_back(e.loss, e.train_accuracy);
            return out;
          },
          py::arg("images"), py::arg("labels"), py::arg("epochs") = 25, py::arg("batch") = 32,
          py::arg("lr") = 0.001, py::arg("seed") = 1,
          "Train in place; returns [(loss, train accuracy)] per epoch.")
      .def(
          "predict",
          [](Model& model, const Array& images) {
            const std::vector<LabeledImage> set = from_numpy(images, nullptr);
            return labels_of(predict(model, set));
          },
          py::arg("images"))
      .def("save", [](const Model& model, const std::filesystem::path& p) { save_model(model, p); })
      .def_static("load", [](const std::filesystem::path& p) { return load_model(p); });

  m.def(
      "run_experiment",
      [](const std::string& config_text, std::optional<std::filesystem::path> out_dir) {
        const ExperimentConfig config = parse_config(config_text);
        std::ostringstream log;
        ExperimentResult result;
        {
          py::gil_scoped_release release;
          result = run_experiment(config, log);
        }
        if (out_dir) write_outputs(config, result, *out_dir);
        py::list rows;
        for (std::size_t i = 0; i < result.table.rows.size(); ++i) {
          py::dict r = report_dict(result.table.rows[i]);
          const auto& saved = result.table.time_saved_pct[i];
          r["time_saved_pct"] = saved ? py::object(py::float_(*saved)) : py::none();
          rows.append(r);
        }
        py::dict d;
        d["rows"] = rows;
        d["markdown"] = render_table(result.table);
        d["csv"] = render_csv(result.table);
        d["log"] = log.str();
        return d;
      },
      py::arg("config") = "", py::arg("out_dir") = py::none(),
      "Run the configured comparison; optionally write the report files.");
}
