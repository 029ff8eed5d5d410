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

#include "ctpred/evalkit.hpp"

#include <cmath>
#include <iomanip>
#include <sstream>

#include "ctpred/binary_io.hpp"
#include "ctpred/loss.hpp"
#include "ctpred/parallel.hpp"

namespace ctpred {

CMatrix zf_precoder(const CMatrix& h_hat, double max_condition) {
  if (h_hat.rows() < h_hat.cols()) {
    throw ShapeError("zf_precoder: channel " + h_hat.shape_string() + " has fewer rows than columns");
  }
  const CMatrix gram = matmul_ah(h_hat, h_hat);
  SolveOptions opts;
  opts.max_condition = max_condition;
  return solve_hermitian(gram, conj_transpose(h_hat), opts);
}

double subcarrier_rate(const CMatrix& d, const CMatrix& h_true, double sigma2) {
  if (!(sigma2 > 0.0)) throw ContractError("subcarrier_rate: noise power must be positive");
  if (d.cols() != h_true.rows()) {
    throw ShapeError("subcarrier_rate: precoder " + d.shape_string() + " does not fit channel " + h_true.shape_string());
  }
  const CMatrix g = matmul(d, h_true);
  const double n_rx = static_cast<double>(g.rows());
  const CMatrix a = CMatrix::identity(g.rows()) + scale(matmul_bh(g, g), 1.0 / (n_rx * sigma2));
  return log2_det_hermitian(a);
}

CMatrix subcarrier_block(const CMatrix& effective, std::size_t m, std::size_t n_rf, std::size_t n_rx) {
  if (effective.rows() != n_rf * n_rx || m >= effective.cols()) {
    throw ShapeError("subcarrier_block: " + effective.shape_string() + " does not hold subcarrier " +
                     std::to_string(m) + " of an " + std::to_string(n_rf) + "x" + std::to_string(n_rx) + " channel");
  }
  CMatrix out(n_rf, n_rx);
  for (std::size_t j = 0; j < n_rx; ++j) {
    for (std::size_t r = 0; r < n_rf; ++r) out(r, j) = effective(r + n_rf * j, m);
  }
  return out;
}

std::optional<double> achievable_rate(const CMatrix& predicted, const CMatrix& truth, const SystemConfig& cfg,
                                      double sigma2) {
  if (!predicted.same_shape(truth)) {
    throw ShapeError("achievable_rate: prediction " + predicted.shape_string() + " vs truth " + truth.shape_string());
  }
  double sum = 0.0;
  for (std::size_t m = 0; m < truth.cols(); ++m) {
    CMatrix d;
    try {
      d = zf_precoder(subcarrier_block(predicted, m, cfg.n_rf, cfg.n_rx));
    } catch (const NumericError&) {
      return std::nullopt;
    }
    sum += subcarrier_rate(d, subcarrier_block(truth, m, cfg.n_rf, cfg.n_rx), sigma2);
  }
  return sum / static_cast<double>(truth.cols());
}

std::vector<double> nmse_per_slot(const std::vector<std::vector<CMatrix>>& preds,
                                  const std::vector<std::vector<CMatrix>>& labels) {
  if (preds.size() != labels.size() || preds.empty()) {
    throw ShapeError("nmse_per_slot: " + std::to_string(preds.size()) + " prediction sets for " +
                     std::to_string(labels.size()) + " samples");
  }
  const std::size_t slots = labels.front().size();
  std::vector<double> sum(slots, 0.0);
  for (std::size_t s = 0; s < labels.size(); ++s) {
    if (preds[s].size() != slots || labels[s].size() != slots) throw ShapeError("nmse_per_slot: ragged slot count");
    for (std::size_t i = 0; i < slots; ++i) {
      if (!preds[s][i].same_shape(labels[s][i])) {
        throw ShapeError("nmse_per_slot: prediction " + preds[s][i].shape_string() + " vs label " +
                         labels[s][i].shape_string());
      }
      const double den = fro_norm_sq(labels[s][i]);
      if (!(den > 0.0)) throw NumericError("nmse_per_slot: label of sample " + std::to_string(s) + " is zero");
      sum[i] += fro_norm_sq(preds[s][i] - labels[s][i]) / den;
    }
  }
  std::vector<double> out;
  for (double v : sum) out.push_back(to_db(v / static_cast<double>(labels.size())));
  return out;
}

std::vector<std::vector<CMatrix>> labels_of(const Dataset& data) {
  std::vector<std::vector<CMatrix>> out;
  for (const Sample& s : data.samples) out.push_back(s.labels);
  return out;
}

MethodPredictions perfect_csi(const Dataset& data) { return {"perfect", dataset_hash(data), labels_of(data)}; }

std::vector<SlotReport> evaluate_methods(const std::vector<MethodPredictions>& methods, const Dataset& data,
                                         std::size_t threads) {
  if (data.samples.empty()) throw ContractError("evaluate_methods: empty dataset");
  const std::string hash = dataset_hash(data);
  const auto labels = labels_of(data);
  const double sigma2 = data.noise_variance();
  const std::vector<double>& times = data.samples.front().label_times;
  std::vector<SlotReport> out;
  for (const MethodPredictions& method : methods) {
    if (method.dataset_hash != hash) {
      throw ContractError("method '" + method.name + "' was evaluated on dataset " + method.dataset_hash +
                          ", expected " + hash);
    }
    const std::vector<double> nmse = nmse_per_slot(method.preds, labels);
    const std::size_t n = data.samples.size(), slots = times.size();
    std::vector<std::vector<std::optional<double>>> rates(n);
    parallel_for(n, threads, [&](std::size_t s) {
      for (std::size_t i = 0; i < slots; ++i) {
        rates[s].push_back(achievable_rate(method.preds[s][i], labels[s][i], data.config, sigma2));
      }
    });
    for (std::size_t i = 0; i < slots; ++i) {
      SlotReport row;
      row.method = method.name;
      row.slot_index = i + 1;
      row.time_frames = times[i];
      row.nmse_db = nmse[i];
      double sum = 0.0;
      for (std::size_t s = 0; s < n; ++s) {
        if (rates[s][i]) {
          sum += *rates[s][i];
          ++row.n_samples;
        } else {
          ++row.n_excluded;
        }
      }
      row.rate_bps_hz = row.n_samples > 0 ? sum / static_cast<double>(row.n_samples) : 0.0;
      out.push_back(row);
    }
  }
  return out;
}

std::string report_csv(const std::vector<SlotReport>& rows, const std::vector<std::string>& metadata) {
  std::ostringstream os;
  for (const std::string& line : metadata) os << "# " << line << '\n';
  os << "method,slot_index,time_frames,nmse_db,rate_bps_hz,n_samples,n_excluded\n";
  os << std::setprecision(10);
  for (const SlotReport& r : rows) {
    os << r.method << ',' << r.slot_index << ',' << r.time_frames << ',' << r.nmse_db << ',' << r.rate_bps_hz << ','
       << r.n_samples << ',' << r.n_excluded << '\n';
  }
  return os.str();
}

void write_report(const std::filesystem::path& path, const std::vector<SlotReport>& rows,
                  const std::vector<std::string>& metadata) {
  const std::string s = report_csv(rows, metadata);
  io::write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

}  // namespace ctpred
