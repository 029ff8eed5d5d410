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

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ctpred/channelsim.hpp"
#include "ctpred/ctmath.hpp"

namespace ctpred {

/// Condition cap for Ĥ^H Ĥ; beyond it the sample is excluded from rate
/// averaging.
inline constexpr double kZfMaxCondition = 1e8;

/// Left pseudo-inverse (Ĥ^H Ĥ)^{-1} Ĥ^H of an N_RF x N_R channel.
/// Throws NumericError when Ĥ^H Ĥ is singular or above the condition cap.
CMatrix zf_precoder(const CMatrix& h_hat, double max_condition = kZfMaxCondition);

/// log2 det(I + D H H^H D^H / (N_R sigma2)) for one subcarrier.
double subcarrier_rate(const CMatrix& d, const CMatrix& h_true, double sigma2);

/// Per-subcarrier N_RF x N_R block of an effective channel (column m, unvec'd).
CMatrix subcarrier_block(const CMatrix& effective, std::size_t m, std::size_t n_rf, std::size_t n_rx);

/// Rate averaged over subcarriers with ZF built from `predicted`; nullopt
/// when ZF fails on any subcarrier.
std::optional<double> achievable_rate(const CMatrix& predicted, const CMatrix& truth, const SystemConfig& cfg,
                                      double sigma2);

/// preds[sample][slot] vs labels[sample][slot]; per (sample, slot) the
/// full-matrix ratio ‖P - L‖² / ‖L‖², then the sample mean, then dB.
std::vector<double> nmse_per_slot(const std::vector<std::vector<CMatrix>>& preds,
                                  const std::vector<std::vector<CMatrix>>& labels);

struct MethodPredictions {
  std::string name;
  std::string dataset_hash;  ///< hash of the dataset the predictions were made on
  std::vector<std::vector<CMatrix>> preds;  ///< [sample][slot]
};

struct SlotReport {
  std::string method;
  std::size_t slot_index = 0;  ///< 1..KQ
  double time_frames = 0.0;
  double nmse_db = 0.0;
  double rate_bps_hz = 0.0;
  std::size_t n_samples = 0;
  std::size_t n_excluded = 0;
};

/// Label matrices of a test dataset arranged [sample][slot].
std::vector<std::vector<CMatrix>> labels_of(const Dataset& data);

/// Ground-truth predictions; the perfect-CSI row.
MethodPredictions perfect_csi(const Dataset& data);

/// Per-slot NMSE and rate for every method on `data`. Throws ContractError
/// when a method was produced from a different dataset.
std::vector<SlotReport> evaluate_methods(const std::vector<MethodPredictions>& methods, const Dataset& data,
                                         std::size_t threads = 1);

/// CSV with '#' metadata lines followed by
/// "method,slot_index,time_frames,nmse_db,rate_bps_hz,n_samples,n_excluded".
std::string report_csv(const std::vector<SlotReport>& rows, const std::vector<std::string>& metadata);
void write_report(const std::filesystem::path& path, const std::vector<SlotReport>& rows,
                  const std::vector<std::string>& metadata);

}  // namespace ctpred
