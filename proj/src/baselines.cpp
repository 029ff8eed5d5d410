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

#include "ctpred/baselines.hpp"

#include "ctpred/loss.hpp"
#include "ctpred/rng.hpp"

namespace ctpred {

CMatrix interpolate(const DiscretePrediction& dp, std::size_t k, std::size_t q, std::size_t slots_per_frame) {
  if (slots_per_frame == 0) throw ContractError("interpolate: slots_per_frame must be positive");
  if (k + 1 >= dp.boundaries.size()) {
    throw ContractError("interpolate: frame " + std::to_string(k) + " outside 0.." +
                        std::to_string(dp.horizon() == 0 ? 0 : dp.horizon() - 1));
  }
  if (q > slots_per_frame) throw ContractError("interpolate: slot " + std::to_string(q) + " exceeds Q");
  if (q == 0) return dp.boundaries[k];
  if (q == slots_per_frame) return dp.boundaries[k + 1];
  const double w = static_cast<double>(q) / static_cast<double>(slots_per_frame);
  return scale(dp.boundaries[k], 1.0 - w) + scale(dp.boundaries[k + 1], w);
}

std::vector<CMatrix> interpolate_slots(const DiscretePrediction& dp, std::size_t slots_per_frame) {
  std::vector<CMatrix> out;
  for (std::size_t i = 1; i <= dp.horizon() * slots_per_frame; ++i) {
    const std::size_t k = (i - 1) / slots_per_frame;
    out.push_back(interpolate(dp, k, i - k * slots_per_frame, slots_per_frame));
  }
  return out;
}

std::vector<CMatrix> outdated_csi(const std::vector<CMatrix>& inputs, std::size_t n_targets) {
  if (inputs.empty()) throw ShapeError("outdated_csi: no input channels");
  return std::vector<CMatrix>(n_targets, inputs.back());
}

namespace {

CMatrix draw(Rng& rng, std::size_t rows, std::size_t cols) {
  return random_cmatrix(rows, cols, rng, 1.0 / static_cast<double>(cols));
}

void check_discrete(const Dataset& data, const char* who) {
  for (const Sample& s : data.samples) {
    if (s.labels.size() != data.config.future_frames) {
      throw ConfigError(std::string(who) + ": expected a discrete-mode dataset with " +
                        std::to_string(data.config.future_frames) + " boundary labels per sample");
    }
    for (std::size_t k = 0; k < s.label_times.size(); ++k) {
      if (s.label_times[k] != static_cast<double>(k + 1)) {
        throw ConfigError(std::string(who) + ": label times are not the frame boundaries 1..K");
      }
    }
  }
}

template <template <class> class W, class Fwd>
double taped_loss(const W<CMatrix>& p, const Sample& s, W<CMatrix>* grad, Fwd&& forward) {
  Tape tape;
  const W<Var> w = lift_weights(tape, p);
  std::vector<Var> in;
  for (const CMatrix& h : s.inputs) in.push_back(constant(tape, h));
  const Var loss = nmse_loss(forward(w, in), s.labels);
  if (grad != nullptr) *grad = gather_weights(tape.backward(loss.id(), weight_ids(w)), w);
  return loss.value()[0].real();
}

template <template <class> class W, class LossFn>
TrainResult train_discrete(const W<CMatrix>& init, const Dataset& data, const TrainConfig& cfg,
                           const EpochHook& hook, std::optional<TrainState> resume, LossFn loss_fn) {
  const SampleGradFn fn = [&](const std::vector<CMatrix>& flat, std::size_t i, std::vector<CMatrix>& grad) {
    W<CMatrix> p, g;
    unflatten_params(flat, p);
    const double l = loss_fn(p, data.samples[i], &g);
    grad = flatten_params(g);
    return l;
  };
  TrainState state = resume ? std::move(*resume) : TrainState{flatten_params(init), {}, 0};
  return train_loop(std::move(state), data.samples.size(), fn, cfg, hook);
}

}  // namespace

GruParams init_gru(const SystemConfig& cfg, std::size_t hidden, std::uint64_t seed) {
  if (hidden == 0) throw ConfigError("invalid config field 'gru_hidden': must be at least 1");
  const std::size_t d = cfg.effective_rows() * cfg.n_subcarriers;
  Rng rng(derive_seed(seed, Stream::kInit, 2));
  GruParams p;
  p.u_z = draw(rng, hidden, d);
  p.u_x = draw(rng, hidden, d);
  p.u_u = draw(rng, hidden, d);
  p.w_z = draw(rng, hidden, hidden);
  p.w_x = draw(rng, hidden, hidden);
  p.w_u = draw(rng, hidden, hidden);
  p.w_h = CMatrix::zeros(d, hidden);
  return p;
}

std::vector<CMatrix> gru_teacher_forced(const GruParams& p, const std::vector<CMatrix>& inputs,
                                        const std::vector<CMatrix>& truth) {
  const std::size_t rows = inputs.front().rows(), cols = inputs.front().cols();
  CMatrix r = gru_encode(p, inputs);
  std::vector<CMatrix> out;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    if (k > 0) r = gru_cell(p.u_z, p.u_x, p.u_u, p.w_z, p.w_x, p.w_u, vec(truth[k - 1]), r);
    out.push_back(unvec(p.w_h * r, rows, cols));
  }
  return out;
}

DiscretePrediction gru_discrete_predict(const GruParams& p, const std::vector<CMatrix>& inputs, std::size_t horizon) {
  DiscretePrediction dp;
  dp.boundaries.push_back(inputs.back());
  for (CMatrix& m : gru_rollout(p, inputs, horizon)) dp.boundaries.push_back(std::move(m));
  return dp;
}

FcParams init_fc(const SystemConfig& cfg, std::size_t width, std::uint64_t seed) {
  if (width == 0) throw ConfigError("invalid config field 'fc_width': must be at least 1");
  const std::size_t d = cfg.effective_rows() * cfg.n_subcarriers;
  Rng rng(derive_seed(seed, Stream::kInit, 3));
  FcParams p;
  p.w1 = draw(rng, width, cfg.history_frames * d);
  p.w2 = draw(rng, width, width);
  p.w3 = CMatrix::zeros(cfg.future_frames * d, width);
  return p;
}

DiscretePrediction fc_discrete_predict(const FcParams& p, const std::vector<CMatrix>& inputs, std::size_t horizon) {
  DiscretePrediction dp;
  dp.boundaries.push_back(inputs.back());
  for (CMatrix& m : fc_forward(p, inputs, horizon)) dp.boundaries.push_back(std::move(m));
  return dp;
}

double gru_loss_and_grad(const GruParams& p, const Sample& s, GruParams* grad) {
  return taped_loss(p, s, grad, [&](const GruWeights<Var>& w, const std::vector<Var>& in) {
    return gru_rollout(w, in, s.labels.size());
  });
}

double fc_loss_and_grad(const FcParams& p, const Sample& s, FcParams* grad) {
  return taped_loss(p, s, grad, [&](const FcWeights<Var>& w, const std::vector<Var>& in) {
    return fc_forward(w, in, s.labels.size());
  });
}

TrainResult train_gru(const GruParams& init, const Dataset& data, const TrainConfig& cfg, const EpochHook& hook,
                      std::optional<TrainState> resume) {
  check_discrete(data, "train_gru");
  return train_discrete(init, data, cfg, hook, std::move(resume), gru_loss_and_grad);
}

TrainResult train_fc(const FcParams& init, const Dataset& data, const TrainConfig& cfg, const EpochHook& hook,
                     std::optional<TrainState> resume) {
  check_discrete(data, "train_fc");
  return train_discrete(init, data, cfg, hook, std::move(resume), fc_loss_and_grad);
}

namespace {

template <class W>
W from_checkpoint(const Checkpoint& ck, const std::string& prefix) {
  W p;
  p.visit([&](const char* name, CMatrix& m) { m = ck.at(prefix + name); });
  return p;
}

}  // namespace

GruParams gru_from_checkpoint(const Checkpoint& ck) {
  GruParams p = from_checkpoint<GruParams>(ck, kGruPrefix);
  const std::size_t h = p.w_z.rows(), d = p.w_h.rows();
  const bool ok = p.w_z.cols() == h && p.w_x.rows() == h && p.w_x.cols() == h && p.w_u.rows() == h &&
                  p.w_u.cols() == h && p.w_h.cols() == h && p.u_z.rows() == h && p.u_z.cols() == d &&
                  p.u_x.rows() == h && p.u_x.cols() == d && p.u_u.rows() == h && p.u_u.cols() == d &&
                  d == ck.config.effective_rows() * ck.config.n_subcarriers;
  if (!ok) throw FormatError("checkpoint GRU tensors have inconsistent shapes");
  return p;
}

FcParams fc_from_checkpoint(const Checkpoint& ck) {
  FcParams p = from_checkpoint<FcParams>(ck, kFcPrefix);
  const std::size_t d = ck.config.effective_rows() * ck.config.n_subcarriers;
  const std::size_t w = p.w1.rows();
  const bool ok = p.w1.cols() == ck.config.history_frames * d && p.w2.rows() == w && p.w2.cols() == w &&
                  p.w3.cols() == w && p.w3.rows() == ck.config.future_frames * d;
  if (!ok) throw FormatError("checkpoint FC tensors have inconsistent shapes");
  return p;
}

}  // namespace ctpred
