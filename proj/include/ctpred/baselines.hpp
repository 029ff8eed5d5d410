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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctpred/autodiff.hpp"
#include "ctpred/channelsim.hpp"
#include "ctpred/ctmath.hpp"
#include "ctpred/tnode.hpp"
#include "ctpred/training.hpp"

namespace ctpred {

/// Frame-boundary channels for k = 0..K; entry 0 is the last observed input.
struct DiscretePrediction {
  std::vector<CMatrix> boundaries;

  std::size_t horizon() const { return boundaries.empty() ? 0 : boundaries.size() - 1; }
};

/// (1 - q/Q) * boundaries[k] + (q/Q) * boundaries[k+1]; exact at q = 0 and q = Q.
CMatrix interpolate(const DiscretePrediction& dp, std::size_t k, std::size_t q, std::size_t slots_per_frame);

/// Predictions at slots i = 1..K*Q, with slot i in frame k = (i-1)/Q at
/// offset q = i - kQ.
std::vector<CMatrix> interpolate_slots(const DiscretePrediction& dp, std::size_t slots_per_frame);

/// Last observed input repeated for every target.
std::vector<CMatrix> outdated_csi(const std::vector<CMatrix>& inputs, std::size_t n_targets);

// Generic weight plumbing -----------------------------------------------------

template <template <class> class W>
W<Var> lift_weights(Tape& tape, const W<CMatrix>& params) {
  std::vector<const CMatrix*> src;
  params.visit([&](const char*, const CMatrix& m) { src.push_back(&m); });
  W<Var> out;
  std::size_t i = 0;
  out.visit([&](const char*, Var& v) { v = parameter(tape, *src[i++]); });
  return out;
}

template <template <class> class W>
std::vector<VarId> weight_ids(const W<Var>& w) {
  std::vector<VarId> ids;
  w.visit([&](const char*, const Var& v) { ids.push_back(v.id()); });
  return ids;
}

template <template <class> class W>
W<CMatrix> gather_weights(const Gradients& g, const W<Var>& w) {
  W<CMatrix> out;
  std::vector<const CMatrix*> src;
  w.visit([&](const char*, const Var& v) { src.push_back(&g.at(v.id())); });
  std::size_t i = 0;
  out.visit([&](const char*, CMatrix& m) { m = *src[i++]; });
  return out;
}

// GRU discrete predictor -------------------------------------------------------

/// u_* H x D_in, w_* H x H, w_h D_in x H, with D_in = N_RF N_R M.
template <class T>
struct GruWeights {
  T u_z, u_x, u_u;
  T w_z, w_x, w_u;
  T w_h;

  friend bool operator==(const GruWeights&, const GruWeights&) = default;

  template <class F>
  void visit(F&& f) {
    visit_all(*this, f);
  }
  template <class F>
  void visit(F&& f) const {
    visit_all(*this, f);
  }

 private:
  template <class Self, class F>
  static void visit_all(Self& s, F& f) {
    f("u_z", s.u_z), f("u_x", s.u_x), f("u_u", s.u_u);
    f("w_z", s.w_z), f("w_x", s.w_x), f("w_u", s.w_u);
    f("w_h", s.w_h);
  }
};

using GruParams = GruWeights<CMatrix>;

/// CN(0, 1/cols) entries; w_h starts at zero so a fresh model predicts zero.
GruParams init_gru(const SystemConfig& cfg, std::size_t hidden, std::uint64_t seed);

template <class T>
T gru_encode(const GruWeights<T>& p, const std::vector<T>& inputs) {
  if (inputs.empty()) throw ShapeError("gru: no input channels");
  T r = zeros_like(inputs.front(), p.w_z.rows(), 1);
  for (const T& h : inputs) r = gru_cell(p.u_z, p.u_x, p.u_u, p.w_z, p.w_x, p.w_u, vec(h), r);
  return r;
}

/// Autoregressive rollout: each one-frame-ahead prediction is fed back as
/// the next input. Returns K predictions shaped like the inputs.
template <class T>
std::vector<T> gru_rollout(const GruWeights<T>& p, const std::vector<T>& inputs, std::size_t horizon) {
  const std::size_t rows = inputs.front().rows(), cols = inputs.front().cols();
  T r = gru_encode(p, inputs);
  std::vector<T> out;
  for (std::size_t k = 0; k < horizon; ++k) {
    if (k > 0) r = gru_cell(p.u_z, p.u_x, p.u_u, p.w_z, p.w_x, p.w_u, vec(out.back()), r);
    out.push_back(unvec(p.w_h * r, rows, cols));
  }
  return out;
}

/// Same recursion with the true boundary channels fed back instead of the
/// model's own predictions.
std::vector<CMatrix> gru_teacher_forced(const GruParams& p, const std::vector<CMatrix>& inputs,
                                        const std::vector<CMatrix>& truth);

DiscretePrediction gru_discrete_predict(const GruParams& p, const std::vector<CMatrix>& inputs, std::size_t horizon);

// FC discrete predictor ---------------------------------------------------------

/// w1 W x (J D_in), w2 W x W, w3 (K D_in) x W; split tanh after the two
/// hidden layers, no biases.
template <class T>
struct FcWeights {
  T w1, w2, w3;

  friend bool operator==(const FcWeights&, const FcWeights&) = default;

  template <class F>
  void visit(F&& f) {
    f("w1", w1), f("w2", w2), f("w3", w3);
  }
  template <class F>
  void visit(F&& f) const {
    f("w1", w1), f("w2", w2), f("w3", w3);
  }
};

using FcParams = FcWeights<CMatrix>;

/// CN(0, 1/cols) entries; w3 starts at zero.
FcParams init_fc(const SystemConfig& cfg, std::size_t width, std::uint64_t seed);

template <class T>
std::vector<T> fc_forward(const FcWeights<T>& p, const std::vector<T>& inputs, std::size_t horizon) {
  if (inputs.empty()) throw ShapeError("fc: no input channels");
  const std::size_t rows = inputs.front().rows(), cols = inputs.front().cols();
  std::vector<T> parts;
  for (const T& h : inputs) parts.push_back(vec(h));
  const T x = stack_rows(std::span<const T>(parts));
  const T y = p.w3 * split_tanh(p.w2 * split_tanh(p.w1 * x));
  const std::size_t d = rows * cols;
  if (y.rows() != horizon * d) {
    throw ShapeError("fc: output has " + std::to_string(y.rows()) + " rows, expected " + std::to_string(horizon * d));
  }
  std::vector<T> out;
  for (std::size_t k = 0; k < horizon; ++k) out.push_back(unvec(slice_rows(y, k * d, d), rows, cols));
  return out;
}

DiscretePrediction fc_discrete_predict(const FcParams& p, const std::vector<CMatrix>& inputs, std::size_t horizon);

// Training ------------------------------------------------------------------------

/// NMSE over the K boundary predictions and its gradient.
double gru_loss_and_grad(const GruParams& p, const Sample& s, GruParams* grad);
double fc_loss_and_grad(const FcParams& p, const Sample& s, FcParams* grad);

/// Both expect a discrete-mode dataset (labels at t = 1..K).
TrainResult train_gru(const GruParams& init, const Dataset& data, const TrainConfig& cfg,
                      const EpochHook& hook = {}, std::optional<TrainState> resume = std::nullopt);
TrainResult train_fc(const FcParams& init, const Dataset& data, const TrainConfig& cfg, const EpochHook& hook = {},
                     std::optional<TrainState> resume = std::nullopt);

inline const std::string kGruPrefix = "gru.";
inline const std::string kFcPrefix = "fc.";

GruParams gru_from_checkpoint(const Checkpoint& ck);
FcParams fc_from_checkpoint(const Checkpoint& ck);

}  // namespace ctpred
