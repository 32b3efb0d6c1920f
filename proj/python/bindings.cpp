// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The wfanet-cpp Authors
//
// Thin numpy bindings. Configs and reports cross the boundary as JSON text;
// the Python package turns them into dicts.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>

#include "wfanet/data.hpp"
#include "wfanet/error.hpp"
#include "wfanet/gradcheck.hpp"
#include "wfanet/metrics.hpp"
#include "wfanet/network.hpp"
#include "wfanet/raster.hpp"
#include "wfanet/training.hpp"
#include "wfanet/wavelet.hpp"

namespace py = pybind11;
using namespace wfanet;

namespace {

using Array = py::array_t<float, py::array::c_style | py::array::forcecast>;

Raster to_raster(const Array& a) {
  if (a.ndim() != 3) throw DimensionError("expected a [bands x height x width] array");
  Raster r(a.shape(0), a.shape(1), a.shape(2));
  std::memcpy(r.values.data(), a.data(), r.values.size() * sizeof(float));
  return r;
}

Array to_array(const Raster& r) {
  Array out({r.bands, r.height, r.width});
  std::memcpy(out.mutable_data(), r.values.data(), r.values.size() * sizeof(float));
  return out;
}

Tensor to_tensor(const Array& a) { return to_raster(a).to_tensor(); }

Array to_array(const Tensor& t) {
  if (t.rank() != 3) throw DimensionError("expected a rank-3 tensor, got " + shape_to_string(t.shape()));
  Array out({t.dim(0), t.dim(1), t.dim(2)});
  std::memcpy(out.mutable_data(), t.data().data(), t.numel() * sizeof(float));
  return out;
}

std::vector<SamplePair> to_samples(const std::vector<std::tuple<Array, Array, std::optional<Array>>>& items) {
  std::vector<SamplePair> out;
  for (const auto& [pan, lrms, gt] : items) {
    SamplePair s{to_raster(pan), to_raster(lrms), std::nullopt};
    if (gt) s.gt = to_raster(*gt);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_wfanet, m) {
  m.doc() = "Wavelet-domain pansharpening network";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<DimensionError>(m, "DimensionError", base);
  py::register_exception<ContractError>(m, "ContractError", base);
  py::register_exception<ConfigError>(m, "ConfigError", base);
  py::register_exception<FormatError>(m, "FormatError", base);
  py::register_exception<ValidationError>(m, "ValidationError", base);
  py::register_exception<NumericError>(m, "NumericError", base);

  m.def("dwt2", [](const Array& x) {
    NoGradGuard no_grad;
    const WaveletBands b = dwt2(to_tensor(x));
    return py::make_tuple(to_array(b.ll), to_array(b.lh), to_array(b.hl), to_array(b.hh));
  });
  m.def("idwt2", [](const Array& ll, const Array& lh, const Array& hl, const Array& hh) {
    NoGradGuard no_grad;
    return to_array(idwt2({to_tensor(ll), to_tensor(lh), to_tensor(hl), to_tensor(hh)}));
  });

  py::class_<Wfanet>(m, "_Network")
      .def(py::init([](const std::string& config) { return Wfanet::create(NetworkConfig::from_json(nlohmann::json::parse(config))); }))
      .def_static("load", &Wfanet::load)
      .def("save", &Wfanet::save)
      .def("forward",
           [](const Wfanet& net, const Array& pan, const Array& lrms) {
             NoGradGuard no_grad;
             return to_array(net.forward(to_tensor(pan), to_tensor(lrms)));
           })
      .def("fuse", [](const Wfanet& net, const Array& pan, const Array& lrms) {
        return to_array(fuse(net, to_raster(pan), to_raster(lrms)));
      })
      .def_property_readonly("config_json", [](const Wfanet& net) { return net.config().to_json().dump(); })
      .def_property_readonly("param_names", [](const Wfanet& net) { return net.params().names(); })
      .def_property_readonly("param_count", [](const Wfanet& net) { return net.params().total_elements(); })
      .def_property_readonly("checksum", [](const Wfanet& net) { return net.params().checksum(); });

  m.def("_train", [](const std::string& net_config, const std::string& train_config,
                     const std::vector<std::tuple<Array, Array, std::optional<Array>>>& samples) {
    const auto data = to_samples(samples);
    py::gil_scoped_release release;
    TrainResult r = train(NetworkConfig::from_json(nlohmann::json::parse(net_config)),
                          TrainConfig::from_json(nlohmann::json::parse(train_config)), data);
    return std::make_pair(r.network, r.report.to_json().dump());
  });

  m.def("synth_scene", [](std::uint64_t seed, std::size_t bands, std::size_t height, std::size_t width) {
    return to_array(synth_scene(seed, bands, height, width));
  });
  m.def("wald_degrade", [](const Array& image, std::size_t ratio, std::optional<double> sigma) {
    return to_array(wald_degrade(to_raster(image), ratio, sigma.value_or(default_blur_sigma(ratio))));
  }, py::arg("image"), py::arg("ratio") = 4, py::arg("sigma") = py::none());
  m.def("make_sample_pair", [](std::uint64_t seed, std::size_t bands, std::size_t size, std::size_t ratio) {
    const SamplePair s = make_sample_pair(seed, bands, size, ratio);
    return py::make_tuple(to_array(s.pan), to_array(s.lrms), to_array(*s.gt));
  }, py::arg("seed"), py::arg("bands") = 8, py::arg("size") = 64, py::arg("ratio") = 4);
  m.def("load_raster", [](const std::filesystem::path& path) { return to_array(load_raster(path, RangeCheck::kNone)); });
  m.def("save_raster", [](const Array& a, const std::filesystem::path& path) { save_raster(to_raster(a), path); });

  m.def("sam", [](const Array& ref, const Array& test) { return sam(to_raster(ref), to_raster(test)); });
  m.def("ergas", [](const Array& ref, const Array& test, std::size_t ratio) {
    return ergas(to_raster(ref), to_raster(test), ratio);
  }, py::arg("ref"), py::arg("test"), py::arg("ratio") = 4);
  m.def("psnr", [](const Array& ref, const Array& test) { return psnr(to_raster(ref), to_raster(test)); });
  m.def("q2n", [](const Array& ref, const Array& test) { return q2n(to_raster(ref), to_raster(test)).value; });
  m.def("hqnr", &hqnr, py::arg("d_lambda"), py::arg("d_s"));
  m.def("_reduced_report", [](const Array& ref, const Array& test, std::size_t ratio) {
    return reduced_resolution_report(to_raster(ref), to_raster(test), ratio).to_json().dump();
  });
  m.def("_full_report", [](const Array& fused, const Array& ms, const Array& pan, std::size_t ratio) {
    return full_resolution_report(to_raster(fused), to_raster(ms), to_raster(pan), ratio, default_blur_sigma(ratio))
        .to_json()
        .dump();
  });

  m.def("gradient_battery", [](double tolerance, std::uint64_t seed) {
    py::gil_scoped_release release;
    std::vector<std::pair<std::string, bool>> out;
    for (const auto& c : gradient_battery(tolerance, seed)) out.emplace_back(c.name, c.passed);
    return out;
  }, py::arg("tolerance") = 1e-3, py::arg("seed") = 2024);
}
