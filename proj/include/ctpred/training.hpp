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
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ctpred/channelsim.hpp"
#include "ctpred/ctmath.hpp"
#include "ctpred/tnode.hpp"

namespace ctpred {

struct TrainConfig {
  std::size_t epochs = 200;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  GradientPath gradient_path = GradientPath::kTape;
  std::uint64_t seed = 1;
  std::size_t checkpoint_every = 0;  ///< epochs between checkpoints; 0 writes only the final one
  std::size_t patience = 20;         ///< early stop after this many epochs without improvement; 0 disables
  double min_improvement = 1e-4;     ///< absolute, linear NMSE
  std::size_t threads = 1;

  void validate() const;
};

/// Adam moments in the real-pair representation: m and v hold the moments
/// of the real parts in .real() and of the imaginary parts in .imag().
struct AdamState {
  std::vector<CMatrix> m;
  std::vector<CMatrix> v;
  std::uint64_t step = 0;

  static AdamState zeros_like(const std::vector<CMatrix>& params);
  friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// One bias-corrected Adam update applied to each real component.
void adam_step(std::vector<CMatrix>& params, const std::vector<CMatrix>& grads, AdamState& state,
               const TrainConfig& cfg);

template <class W>
std::vector<CMatrix> flatten_params(const W& w) {
  std::vector<CMatrix> out;
  w.visit([&](const char*, const CMatrix& m) { out.push_back(m); });
  return out;
}

template <class W>
void unflatten_params(const std::vector<CMatrix>& flat, W& w) {
  std::size_t i = 0;
  w.visit([&](const char*, CMatrix& m) { m = flat.at(i++); });
  if (i != flat.size()) throw ShapeError("unflatten_params: parameter count mismatch");
}

template <class W>
std::vector<std::string> param_names(const W& w) {
  std::vector<std::string> out;
  w.visit([&](const char* name, const CMatrix&) { out.emplace_back(name); });
  return out;
}

/// Loss of sample `index` at `params`, with its gradient written to `grad`
/// (same layout as params).
using SampleGradFn =
    std::function<double(const std::vector<CMatrix>& params, std::size_t index, std::vector<CMatrix>& grad)>;

struct BatchResult {
  double mean_loss = 0.0;
  std::vector<CMatrix> mean_grad;
};

/// Mean loss and gradient over `indices`; per-sample work may run on
/// several threads but the reduction is always in index order.
BatchResult batch_gradient(const std::vector<CMatrix>& params, const std::vector<std::size_t>& indices,
                           const SampleGradFn& fn, std::size_t threads);

struct EpochRecord {
  std::size_t epoch = 0;
  double mean_nmse = 0.0;
  double mean_nmse_db = 0.0;
  double wall_seconds = 0.0;
};

struct TrainState {
  std::vector<CMatrix> params;
  AdamState adam;
  std::size_t epochs_done = 0;
};

struct TrainResult {
  TrainState state;
  std::vector<EpochRecord> trace;
  bool early_stopped = false;
};

/// Called after each epoch; used for periodic checkpoints.
using EpochHook = std::function<void(const TrainState&, const EpochRecord&)>;

/// Epoch loop: seeded shuffle (a function of seed and epoch number, so a
/// resumed run matches an uninterrupted one), batching, Adam. The loss of
/// an epoch is the mean per-sample loss seen during that epoch.
TrainResult train_loop(TrainState state, std::size_t n_samples, const SampleGradFn& fn, const TrainConfig& cfg,
                       const EpochHook& hook = {});

/// Shuffled sample order for one epoch.
std::vector<std::size_t> epoch_order(std::size_t n_samples, std::uint64_t seed, std::size_t epoch);

/// Trains the TN-ODE on a train-mode dataset.
TrainResult train_tnode(const ModelParams& init, const Dataset& data, const SolverSpec& spec,
                        const TrainConfig& cfg, const EpochHook& hook = {},
                        std::optional<TrainState> resume = std::nullopt);

/// Writes "epoch,mean_train_nmse_db,wall_seconds".
void write_loss_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& trace);

/// Checkpoint with parameters under their own names plus optimizer state
/// ("adam.m.<name>", "adam.v.<name>", "adam.step", "train.epochs").
Checkpoint make_checkpoint(const SystemConfig& cfg, const std::vector<std::string>& names, const TrainState& state);

/// Restores a TrainState written by make_checkpoint; optimizer tensors are
/// optional (a params-only checkpoint resumes with fresh moments).
TrainState train_state_from_checkpoint(const Checkpoint& ck, const std::vector<std::string>& names,
                                       const std::vector<CMatrix>& shapes_like);

}  // namespace ctpred
