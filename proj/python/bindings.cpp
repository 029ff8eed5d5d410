// SPDX-License-Identifier: Apache-2.0
//
// ctpred: continuous-time channel prediction with tensor neural ODEs
// Copyright (C) 2026 The ctpred authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include <pybind11/complex.h>
#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <cstring>
#include <sstream>

#include "ctpred/baselines.hpp"
#include "ctpred/cli.hpp"
#include "ctpred/evalkit.hpp"
#include "ctpred/tnode.hpp"
#include "ctpred/training.hpp"

namespace py = pybind11;
using namespace ctpred;

namespace {

using ComplexArray = py::array_t<Complex, py::array::c_style | py::array::forcecast>;

CMatrix to_cmatrix(const ComplexArray& a) {
  if (a.ndim() != 2) throw ShapeError("expected a 2-D complex array, got " + std::to_string(a.ndim()) + " dimensions");
  const auto rows = static_cast<std::size_t>(a.shape(0)), cols = static_cast<std::size_t>(a.shape(1));
  std::vector<Complex> data(a.data(), a.data() + rows * cols);
  return CMatrix(rows, cols, std::move(data));
}

ComplexArray to_array(const CMatrix& m) {
  ComplexArray out({m.rows(), m.cols()});
  if (m.size() > 0) std::memcpy(out.mutable_data(), m.data().data(), m.size() * sizeof(Complex));
  return out;
}

std::vector<CMatrix> to_cmatrices(const std::vector<ComplexArray>& v) {
  std::vector<CMatrix> out;
  for (const auto& a : v) out.push_back(to_cmatrix(a));
  return out;
}

std::vector<ComplexArray> to_arrays(const std::vector<CMatrix>& v) {
  std::vector<ComplexArray> out;
  for (const auto& m : v) out.push_back(to_array(m));
  return out;
}

template <class W>
py::dict weights_to_dict(const W& w) {
  py::dict d;
  w.visit([&](const char* name, const CMatrix& m) { d[name] = to_array(m); });
  return d;
}

template <class W>
W weights_from_dict(const py::dict& d) {
  W w;
  w.visit([&](const char* name, CMatrix& m) {
    if (!d.contains(name)) throw ConfigError(std::string("missing parameter '") + name + "'");
    m = to_cmatrix(d[name].cast<ComplexArray>());
  });
  return w;
}

cli::RunConfig run_config(const py::dict& overrides) {
  cli::RunConfig c;
  for (const auto& [k, v] : overrides) c.set(py::str(k), py::str(v));
  return c;
}

SystemConfig system_config(const py::dict& overrides) { return run_config(overrides).system; }

}  // namespace

PYBIND11_MODULE(_ctpred, m) {
  m.doc() = "Continuous-time mmWave channel prediction (C++ core)";

  static py::exception<Error> base(m, "Error", PyExc_RuntimeError);
  static py::exception<ConfigError> config_error(m, "ConfigError", base.ptr());
  static py::exception<ShapeError> shape_error(m, "ShapeError", base.ptr());
  static py::exception<NumericError> numeric_error(m, "NumericError", base.ptr());
  static py::exception<IoError> io_error(m, "IoError", base.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      config_error(e.what());
    } catch (const ShapeError& e) {
      shape_error(e.what());
    } catch (const NumericError& e) {
      numeric_error(e.what());
    } catch (const IoError& e) {
      io_error(e.what());
    } catch (const Error& e) {
      base(e.what());
    }
  });

  m.def("config_items", [](const py::dict& overrides) { return run_config(overrides).items(); },
        py::arg("overrides") = py::dict(), "All config keys and values after applying overrides.");

  py::class_<Sample>(m, "Sample")
      .def_property_readonly("inputs", [](const Sample& s) { return to_arrays(s.inputs); })
      .def_property_readonly("label_times", [](const Sample& s) { return s.label_times; })
      .def_property_readonly("labels", [](const Sample& s) { return to_arrays(s.labels); });

  py::class_<Dataset>(m, "Dataset")
      .def_readonly("e_avg", &Dataset::e_avg)
      .def_property_readonly("noise_variance", &Dataset::noise_variance)
      .def("__len__", [](const Dataset& d) { return d.samples.size(); })
      .def("__getitem__",
           [](const Dataset& d, std::size_t i) {
             if (i >= d.samples.size()) throw py::index_error();
             return d.samples[i];
           })
      .def("hash", [](const Dataset& d) { return dataset_hash(d); })
      .def("save", [](const Dataset& d, const std::filesystem::path& p) { save_dataset(d, p); });

  m.def(
      "generate_dataset",
      [](std::size_t n, const std::string& mode, std::uint64_t seed, const py::dict& cfg, std::size_t threads) {
        return generate_dataset(system_config(cfg), n, parse_dataset_mode(mode), seed, threads);
      },
      py::arg("n_samples"), py::arg("mode") = "train", py::arg("seed") = 1, py::arg("config") = py::dict(),
      py::arg("threads") = 1);
  m.def("load_dataset", [](const std::filesystem::path& p) { return load_dataset(p); });

  m.def(
      "init_params",
      [](std::uint64_t seed, const py::dict& cfg, bool zero_head) {
        return weights_to_dict(init_params(system_config(cfg), seed, zero_head ? HeadInit::kZero : HeadInit::kRandom));
      },
      py::arg("seed") = 1, py::arg("config") = py::dict(), py::arg("zero_head") = true);

  m.def(
      "predict",
      [](const py::dict& params, const std::vector<ComplexArray>& inputs, const std::vector<double>& targets,
         double step, const std::string& scheme) {
        const ModelParams p = weights_from_dict<ModelParams>(params);
        return to_arrays(predict(p, to_cmatrices(inputs), targets, SolverSpec{parse_scheme(scheme), step}));
      },
      py::arg("params"), py::arg("inputs"), py::arg("targets"), py::arg("step") = 0.2, py::arg("scheme") = "rk4");

  m.def(
      "loss_and_grad",
      [](const py::dict& params, const Sample& s, double step, const std::string& path) {
        const ModelParams p = weights_from_dict<ModelParams>(params);
        const LossAndGrad lg =
            loss_and_grad(p, s.inputs, s.label_times, s.labels, SolverSpec{Scheme::kRK4, step}, parse_gradient_path(path));
        return py::make_tuple(lg.loss, weights_to_dict(lg.grad));
      },
      py::arg("params"), py::arg("sample"), py::arg("step") = 0.2, py::arg("path") = "tape");

  m.def(
      "train_tnode",
      [](const py::dict& params, const Dataset& data, const py::dict& overrides) {
        const cli::RunConfig rc = run_config(overrides);
        const ModelParams init = weights_from_dict<ModelParams>(params);
        TrainResult r;
        {
          py::gil_scoped_release release;
          r = train_tnode(init, data, rc.solver, rc.train);
        }
        ModelParams out;
        unflatten_params(r.state.params, out);
        std::vector<double> trace;
        for (const EpochRecord& e : r.trace) trace.push_back(e.mean_nmse_db);
        return py::make_tuple(weights_to_dict(out), trace);
      },
      py::arg("params"), py::arg("dataset"), py::arg("config") = py::dict(),
      "Returns (trained params, per-epoch mean train NMSE in dB).");

  m.def("nmse_loss", [](const std::vector<ComplexArray>& preds, const std::vector<ComplexArray>& labels) {
    const auto p = to_cmatrices(preds), l = to_cmatrices(labels);
    return nmse_loss(std::span<const CMatrix>(p), std::span<const CMatrix>(l));
  });
  m.def("to_db", [](double v) { return to_db(v); });

  m.def("interpolate_slots", [](const std::vector<ComplexArray>& boundaries, std::size_t q) {
    return to_arrays(interpolate_slots(DiscretePrediction{to_cmatrices(boundaries)}, q));
  });
  m.def("zf_precoder", [](const ComplexArray& h) { return to_array(zf_precoder(to_cmatrix(h))); });
  m.def("subcarrier_rate", [](const ComplexArray& d, const ComplexArray& h, double sigma2) {
    return subcarrier_rate(to_cmatrix(d), to_cmatrix(h), sigma2);
  });
  m.def(
      "achievable_rate",
      [](const ComplexArray& pred, const ComplexArray& truth, double sigma2, const py::dict& cfg) {
        return achievable_rate(to_cmatrix(pred), to_cmatrix(truth), system_config(cfg), sigma2);
      },
      py::arg("predicted"), py::arg("truth"), py::arg("sigma2"), py::arg("config") = py::dict());

  m.def(
      "count_flops",
      [](const py::dict& cfg) {
        const cli::RunConfig rc = run_config(cfg);
        const FlopReport r = count_flops(rc.system, rc.solver);
        py::dict d;
        d["encoder"] = r.encoder;
        d["decoder"] = r.decoder;
        d["head"] = r.head;
        d["field_evaluations"] = r.g;
        d["encoder_formula"] = r.encoder_full;
        d["encoder_input_formula"] = r.encoder_input;
        d["decoder_formula"] = r.decoder_formula;
        d["head_formula"] = r.head_formula;
        return d;
      },
      py::arg("config") = py::dict());
  m.def("head_float_count", &head_float_count);
  m.def("vanilla_head_float_count", &vanilla_head_float_count);

  m.def(
      "gradcheck",
      [](const py::dict& cfg, double tolerance, std::size_t probes) {
        std::ostringstream out;
        const int code = cli::cmd_gradcheck(run_config(cfg), {tolerance, probes}, out);
        return py::make_tuple(code == 0, out.str());
      },
      py::arg("config") = py::dict(), py::arg("tolerance") = 1e-5, py::arg("probes") = 10);
}
