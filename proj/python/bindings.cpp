#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cxr/error.hpp"
#include "cxr/pipeline.hpp"

namespace py = pybind11;
using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

namespace {

cxr::GrayImage to_image(const Array& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-D array (height, width)");
  const auto h = static_cast<int>(a.shape(0));
  const auto w = static_cast<int>(a.shape(1));
  return cxr::GrayImage(w, h, std::vector<double>(a.data(), a.data() + a.size()));
}

Array to_array(const cxr::GrayImage& img) {
  Array out({img.height(), img.width()});
  std::copy(img.pixels().begin(), img.pixels().end(), out.mutable_data());
  return out;
}

py::array_t<bool> mask_to_array(const cxr::BinaryMask& m) {
  py::array_t<bool> out({m.height(), m.width()});
  auto v = out.mutable_unchecked<2>();
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) v(y, x) = m.at(x, y);
  return out;
}

Array sample_to_array(const cxr::MultiChannelSample& s) {
  const int h = s.channels[0].height(), w = s.channels[0].width();
  Array out({3, h, w});
  double* dst = out.mutable_data();
  for (const auto& c : s.channels) dst = std::copy(c.pixels().begin(), c.pixels().end(), dst);
  return out;
}

cxr::PreprocessMode mode_of(const std::string& name) {
  const auto m = cxr::parse_mode(name);
  if (!m) throw py::value_error("unknown mode '" + name + "'");
  return *m;
}

cxr::ClassLabel class_of(const std::string& name) {
  const auto c = cxr::parse_class(name);
  if (!c) throw py::value_error("unknown class '" + name + "'");
  return *c;
}

cxr::PipelineConfig config_of(const py::dict& overrides) {
  cxr::PipelineConfig cfg;
  for (const auto& [k, v] : overrides) cfg.set(py::str(k), py::str(v));
  return cfg;
}

py::object rate(const cxr::Rate& r) { return r ? py::cast(*r) : py::none(); }

py::dict report_dict(const cxr::ClassificationReport& r) {
  py::dict d;
  d["n"] = r.n;
  d["correct"] = r.correct;
  d["accuracy"] = r.accuracy;
  d["accuracy_ci"] = py::make_tuple(r.accuracy_ci.low, r.accuracy_ci.high);
  d["kappa"] = r.kappa;
  py::dict per_class;
  for (cxr::ClassLabel c : cxr::kAllClasses) {
    const auto& m = r.per_class[cxr::class_index(c)];
    py::dict e;
    e["precision"] = rate(m.precision);
    e["recall"] = rate(m.recall);
    e["f1"] = rate(m.f1);
    e["support"] = m.support;
    per_class[py::str(std::string(cxr::class_name(c)))] = e;
  }
  d["per_class"] = per_class;
  for (const auto& [key, avg] : {std::pair{"macro", &r.macro}, std::pair{"weighted", &r.weighted}}) {
    py::dict e;
    e["precision"] = rate(avg->precision);
    e["recall"] = rate(avg->recall);
    e["f1"] = rate(avg->f1);
    d[key] = e;
  }
  py::dict b;
  b["tp"] = r.binary.tp;
  b["fp"] = r.binary.fp;
  b["tn"] = r.binary.tn;
  b["fn"] = r.binary.fn;
  b["sensitivity"] = rate(r.binary_stats.sensitivity);
  b["specificity"] = rate(r.binary_stats.specificity);
  b["accuracy"] = rate(r.binary_stats.accuracy);
  b["f1"] = rate(r.binary_stats.f1);
  d["binary"] = b;
  d["warnings"] = r.warnings;
  d["text"] = cxr::render_report_text(r);
  return d;
}

cxr::ConfusionMatrix3 matrix_of(const std::vector<std::vector<std::uint64_t>>& rows) {
  if (rows.size() != 3) throw py::value_error("confusion matrix must be 3x3");
  cxr::ConfusionMatrix3::Counts c{};
  for (std::size_t i = 0; i < 3; ++i) {
    if (rows[i].size() != 3) throw py::value_error("confusion matrix must be 3x3");
    for (std::size_t j = 0; j < 3; ++j) c[i][j] = rows[i][j];
  }
  return cxr::ConfusionMatrix3(c);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Chest X-ray CAD pipeline core";

  static py::exception<cxr::Error> error(m, "CxrError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const cxr::Error& e) {
      const char* kind = e.kind() == cxr::ErrorKind::usage  ? "usage"
                         : e.kind() == cxr::ErrorKind::data ? "data"
                                                             : "numerical";
      py::set_error(error, (std::string(kind) + ": " + e.what()).c_str());
    }
  });

  m.def("load_image", [](const std::filesystem::path& p) { return to_array(cxr::load_image(p)); });
  m.def("save_image", [](const Array& a, const std::filesystem::path& p, int depth) {
    cxr::save_image(to_image(a), p, depth);
  }, py::arg("image"), py::arg("path"), py::arg("depth") = 8);

  m.def("generate_phantom", [](const std::string& cls, std::uint64_t seed, int size) {
    return to_array(cxr::generate_phantom(class_of(cls), seed, size));
  }, py::arg("cls"), py::arg("seed"), py::arg("size") = 128);

  m.def("bilateral_filter", [](const Array& a, int radius, double ss, double sr) {
    return to_array(cxr::bilateral_filter(to_image(a), radius, ss, sr));
  }, py::arg("image"), py::arg("radius") = 5, py::arg("sigma_space") = 3.0, py::arg("sigma_range") = 0.1);

  m.def("hist_equalize", [](const Array& a, int bins) {
    return to_array(cxr::hist_equalize(to_image(a), nullptr, bins));
  }, py::arg("image"), py::arg("bins") = 256);

  m.def("remove_diaphragm", [](const Array& a, const py::dict& overrides) {
    const auto r = cxr::remove_diaphragm(to_image(a), config_of(overrides).preprocess);
    return py::make_tuple(to_array(r.image), r.removed ? py::object(mask_to_array(r.mask)) : py::none(),
                          r.removed);
  }, py::arg("image"), py::arg("config") = py::dict());

  m.def("preprocess", [](const Array& a, const std::string& mode, const py::dict& overrides) {
    const auto r = cxr::preprocess_image(to_image(a), config_of(overrides).preprocess, mode_of(mode));
    return py::make_tuple(sample_to_array(r.sample), r.removed);
  }, py::arg("image"), py::arg("mode") = "full", py::arg("config") = py::dict(),
     "Returns a (3, 224, 224) sample and whether the diaphragm was removed.");

  m.def("param_count", [](std::size_t side, std::vector<std::size_t> blocks, std::size_t convs,
                          std::vector<std::size_t> head, int freeze_below) {
    cxr::NetConfig n{side, std::move(blocks), convs, std::move(head), freeze_below};
    const auto c = cxr::nn::param_count(n.build());
    return py::make_tuple(c.total, c.trainable);
  }, py::arg("input_size") = 32, py::arg("block_widths") = std::vector<std::size_t>{8, 16},
     py::arg("convs_per_block") = 1, py::arg("head_widths") = std::vector<std::size_t>{256, 128},
     py::arg("freeze_below") = 0);

  m.def("vgg16_transfer_param_count", [](int freeze_below) {
    const auto c = cxr::nn::param_count(cxr::nn::NetworkSpec::vgg16_transfer(freeze_below));
    return py::make_tuple(c.total, c.trainable);
  }, py::arg("freeze_below") = 5);

  m.def("report", [](const std::vector<std::vector<std::uint64_t>>& rows, const std::string& positive) {
    return report_dict(cxr::build_report(matrix_of(rows), class_of(positive)));
  }, py::arg("matrix"), py::arg("positive") = "covid19");

  m.def("wald_ci", [](std::uint64_t k, std::uint64_t n, double z, bool cc) {
    const auto ci = cxr::wald_ci(k, n, z, cc);
    return py::make_tuple(ci.low, ci.high);
  }, py::arg("successes"), py::arg("n"), py::arg("z") = 1.96, py::arg("continuity_correction") = true);

  m.def("stratified_split", [](const std::filesystem::path& manifest, double test, double val,
                               std::uint64_t seed) {
    const auto s = cxr::stratified_split(cxr::load_manifest(manifest), test, val, seed);
    auto paths = [](const std::vector<cxr::ManifestRecord>& rs) {
      std::vector<std::string> out;
      for (const auto& r : rs) out.push_back(r.path);
      return out;
    };
    return py::make_tuple(paths(s.train), paths(s.validation), paths(s.test));
  }, py::arg("manifest"), py::arg("test_fraction") = 0.1, py::arg("val_fraction") = 0.1, py::arg("seed") = 0);

  m.def("make_phantoms", [](const std::filesystem::path& out, std::size_t count, std::uint64_t seed, int size) {
    cxr::PhantomOptions o;
    o.out_dir = out;
    o.count = count;
    o.seed = seed;
    o.size = size;
    return cxr::cmd_phantom(o);
  }, py::arg("out_dir"), py::arg("count") = 10, py::arg("seed") = 0, py::arg("size") = 128);

  m.def("run_preprocess", [](const py::dict& overrides, const std::string& mode) {
    const auto cfg = config_of(overrides);
    const auto m = mode_of(mode);
    cxr::PreprocessSummary s = [&] {
      py::gil_scoped_release release;
      return cxr::cmd_preprocess(cfg, m);
    }();
    return py::make_tuple(s.images.size() - s.failed, s.failed);
  }, py::arg("config"), py::arg("mode") = "full");

  m.def("run", [](const py::dict& overrides, const std::string& mode) {
    const auto cfg = config_of(overrides);
    const auto m = mode_of(mode);
    cxr::RunResult r = [&] {
      py::gil_scoped_release release;
      return cxr::cmd_run(cfg, m);
    }();
    py::dict d = report_dict(r.report);
    d["best_epoch"] = r.best_epoch;
    std::vector<double> train_acc;
    for (const auto& e : r.history) train_acc.push_back(e.train_acc);
    d["train_acc"] = train_acc;
    d["out_dir"] = r.out_dir;
    return d;
  }, py::arg("config"), py::arg("mode") = "full");
}
