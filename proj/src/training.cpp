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

#include "ctpred/training.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "ctpred/parallel.hpp"
#include "ctpred/rng.hpp"

namespace ctpred {

void TrainConfig::validate() const {
  auto bad = [](const char* field, const char* why) {
    throw ConfigError(std::string("invalid config field '") + field + "': " + why);
  };
  if (batch_size < 1) bad("batch_size", "must be at least 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) bad("learning_rate", "must be a non-negative number");
  if (!(adam_beta1 > 0.0 && adam_beta1 < 1.0)) bad("adam_beta1", "must lie in (0, 1)");
  if (!(adam_beta2 > 0.0 && adam_beta2 < 1.0)) bad("adam_beta2", "must lie in (0, 1)");
  if (!(adam_eps > 0.0)) bad("adam_eps", "must be positive");
  if (!(min_improvement >= 0.0)) bad("min_improvement", "must be non-negative");
  if (threads < 1) bad("threads", "must be at least 1");
}

AdamState AdamState::zeros_like(const std::vector<CMatrix>& params) {
  AdamState s;
  for (const CMatrix& p : params) {
    s.m.push_back(CMatrix::zeros(p.rows(), p.cols()));
    s.v.push_back(CMatrix::zeros(p.rows(), p.cols()));
  }
  return s;
}

void adam_step(std::vector<CMatrix>& params, const std::vector<CMatrix>& grads, AdamState& state,
               const TrainConfig& cfg) {
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ShapeError("adam_step: parameter, gradient and moment counts differ");
  }
  state.step += 1;
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  auto update = [&](double& x, double g, double& m, double& v) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g * g;
    x -= cfg.learning_rate * (m / c1) / (std::sqrt(v / c2) + cfg.adam_eps);
  };
  for (std::size_t i = 0; i < params.size(); ++i) {
    CMatrix& p = params[i];
    if (!p.same_shape(grads[i]) || !p.same_shape(state.m[i]) || !p.same_shape(state.v[i])) {
      throw ShapeError("adam_step: shape mismatch at parameter " + std::to_string(i) + " (" + p.shape_string() +
                       " vs gradient " + grads[i].shape_string() + ")");
    }
    auto pd = p.data();
    auto gd = grads[i].data();
    auto md = state.m[i].data();
    auto vd = state.v[i].data();
    for (std::size_t k = 0; k < pd.size(); ++k) {
      double xr = pd[k].real(), xi = pd[k].imag();
      double mr = md[k].real(), mi = md[k].imag();
      double vr = vd[k].real(), vi = vd[k].imag();
      update(xr, gd[k].real(), mr, vr);
      update(xi, gd[k].imag(), mi, vi);
      pd[k] = {xr, xi};
      md[k] = {mr, mi};
      vd[k] = {vr, vi};
    }
  }
}

BatchResult batch_gradient(const std::vector<CMatrix>& params, const std::vector<std::size_t>& indices,
                           const SampleGradFn& fn, std::size_t threads) {
  if (indices.empty()) throw ContractError("batch_gradient: empty batch");
  std::vector<double> losses(indices.size());
  std::vector<std::vector<CMatrix>> grads(indices.size());
  parallel_for(indices.size(), threads, [&](std::size_t i) { losses[i] = fn(params, indices[i], grads[i]); });
  BatchResult out;
  out.mean_grad = grads[0];
  for (std::size_t i = 1; i < grads.size(); ++i) {
    for (std::size_t k = 0; k < out.mean_grad.size(); ++k) add_into(out.mean_grad[k], grads[i][k]);
  }
  const double inv = 1.0 / static_cast<double>(indices.size());
  for (CMatrix& g : out.mean_grad) g = scale(g, inv);
  for (double l : losses) out.mean_loss += l;
  out.mean_loss *= inv;
  return out;
}

std::vector<std::size_t> epoch_order(std::size_t n_samples, std::uint64_t seed, std::size_t epoch) {
  std::vector<std::size_t> order(n_samples);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, Stream::kShuffle, epoch));
  for (std::size_t i = n_samples; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order;
}

TrainResult train_loop(TrainState state, std::size_t n_samples, const SampleGradFn& fn, const TrainConfig& cfg,
                       const EpochHook& hook) {
  cfg.validate();
  if (n_samples == 0) throw ConfigError("training dataset is empty");
  if (state.adam.m.empty()) state.adam = AdamState::zeros_like(state.params);
  TrainResult result;
  const auto start = std::chrono::steady_clock::now();
  double best = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  while (state.epochs_done < cfg.epochs) {
    const std::size_t epoch = state.epochs_done;
    const std::vector<std::size_t> order = epoch_order(n_samples, cfg.seed, epoch);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < n_samples; b += cfg.batch_size) {
      const std::vector<std::size_t> batch(order.begin() + b, order.begin() + std::min(n_samples, b + cfg.batch_size));
      const BatchResult br = batch_gradient(state.params, batch, fn, cfg.threads);
      if (!std::isfinite(br.mean_loss)) throw NumericError("training loss became non-finite at epoch " + std::to_string(epoch));
      loss_sum += br.mean_loss * static_cast<double>(batch.size());
      adam_step(state.params, br.mean_grad, state.adam, cfg);
    }
    state.epochs_done += 1;
    EpochRecord rec;
    rec.epoch = epoch;
    rec.mean_nmse = loss_sum / static_cast<double>(n_samples);
    rec.mean_nmse_db = to_db(rec.mean_nmse);
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.trace.push_back(rec);
    if (hook) hook(state, rec);

    if (rec.mean_nmse < best - cfg.min_improvement) {
      best = rec.mean_nmse;
      since_best = 0;
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      result.early_stopped = true;
      break;
    }
  }
  result.state = std::move(state);
  return result;
}

TrainResult train_tnode(const ModelParams& init, const Dataset& data, const SolverSpec& spec,
                        const TrainConfig& cfg, const EpochHook& hook, std::optional<TrainState> resume) {
  check_shapes(init, data.config);
  spec.validate();
  for (const Sample& s : data.samples) {
    if (s.inputs.size() != data.config.history_frames || s.labels.empty()) {
      throw ConfigError("train: dataset samples do not match the configured history length");
    }
  }
  const SampleGradFn fn = [&](const std::vector<CMatrix>& flat, std::size_t i, std::vector<CMatrix>& grad) {
    ModelParams p;
    unflatten_params(flat, p);
    const Sample& s = data.samples[i];
    LossAndGrad lg = loss_and_grad(p, s.inputs, s.label_times, s.labels, spec, cfg.gradient_path);
    grad = flatten_params(lg.grad);
    return lg.loss;
  };
  TrainState state = resume ? std::move(*resume) : TrainState{flatten_params(init), {}, 0};
  return train_loop(std::move(state), data.samples.size(), fn, cfg, hook);
}

void write_loss_csv(const std::filesystem::path& path, const std::vector<EpochRecord>& trace) {
  std::ostringstream os;
  os << "epoch,mean_train_nmse_db,wall_seconds\n";
  os << std::setprecision(17);
  for (const EpochRecord& r : trace) os << r.epoch << ',' << r.mean_nmse_db << ',' << r.wall_seconds << '\n';
  const std::string s = os.str();
  io::write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

Checkpoint make_checkpoint(const SystemConfig& cfg, const std::vector<std::string>& names, const TrainState& state) {
  Checkpoint ck{cfg, {}};
  for (std::size_t i = 0; i < names.size(); ++i) ck.tensors.push_back({names[i], state.params[i]});
  if (!state.adam.m.empty()) {
    for (std::size_t i = 0; i < names.size(); ++i) ck.tensors.push_back({"adam.m." + names[i], state.adam.m[i]});
    for (std::size_t i = 0; i < names.size(); ++i) ck.tensors.push_back({"adam.v." + names[i], state.adam.v[i]});
    ck.tensors.push_back({"adam.step", CMatrix::scalar(static_cast<double>(state.adam.step))});
  }
  ck.tensors.push_back({"train.epochs", CMatrix::scalar(static_cast<double>(state.epochs_done))});
  return ck;
}

TrainState train_state_from_checkpoint(const Checkpoint& ck, const std::vector<std::string>& names,
                                       const std::vector<CMatrix>& shapes_like) {
  auto take = [&](const std::string& name, const CMatrix& like) {
    const CMatrix& t = ck.at(name);
    if (!t.same_shape(like)) {
      throw FormatError("checkpoint tensor '" + name + "' has shape " + t.shape_string() + ", expected " +
                        like.shape_string());
    }
    return t;
  };
  TrainState st;
  for (std::size_t i = 0; i < names.size(); ++i) st.params.push_back(take(names[i], shapes_like[i]));
  if (ck.find("adam.step") != nullptr) {
    for (std::size_t i = 0; i < names.size(); ++i) st.adam.m.push_back(take("adam.m." + names[i], shapes_like[i]));
    for (std::size_t i = 0; i < names.size(); ++i) st.adam.v.push_back(take("adam.v." + names[i], shapes_like[i]));
    st.adam.step = static_cast<std::uint64_t>(ck.at("adam.step")[0].real());
  }
  if (const CMatrix* e = ck.find("train.epochs")) st.epochs_done = static_cast<std::size_t>((*e)[0].real());
  return st;
}

}  // namespace ctpred
