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

#include "ctpred/tnode.hpp"

#include <array>
#include <cmath>
#include <set>
#include <utility>

#include "ctpred/binary_io.hpp"
#include "ctpred/rng.hpp"

namespace ctpred {
namespace {

constexpr char kCheckpointMagic[] = "CTCK";
constexpr std::uint32_t kCheckpointVersion = 1;

std::pair<std::size_t, std::size_t> expected_shape(const std::string& name, const SystemConfig& cfg) {
  const std::size_t d = cfg.effective_rows(), m = cfg.n_subcarriers, fl = cfg.feature_l, fr = cfg.feature_r;
  if (name == "W_l_h") return {d, fl};
  if (name == "W_r_h") return {fr, m};
  const char family = name[0];
  const bool left = name[2] == 'l';
  if (family == 'U') return left ? std::pair{fl, d} : std::pair{m, fr};
  return left ? std::pair{fl, fl} : std::pair{fr, fr};
}

std::vector<const CMatrix*> flatten(const ModelParams& p) {
  std::vector<const CMatrix*> out;
  p.visit([&](const char*, const CMatrix& m) { out.push_back(&m); });
  return out;
}

// Only the decoder matrices take part in the adjoint integration.
constexpr std::size_t kDecoderCount = 6;

struct ReverseDeriv {
  CMatrix d_o;                                  // -f(O)
  CMatrix d_a;                                  // +a^T df/dO
  std::array<CMatrix, kDecoderCount> d_theta;  // +a^T df/dtheta
};

ReverseDeriv reverse_derivative(const ModelParams& p, const CMatrix& o, const CMatrix& a) {
  Tape tape;
  TnodeWeights<Var> w;
  std::array<Var*, kDecoderCount> vs = {&w.V_l_z, &w.V_l_x, &w.V_l_u, &w.V_r_z, &w.V_r_x, &w.V_r_u};
  const std::array<const CMatrix*, kDecoderCount> src = {&p.V_l_z, &p.V_l_x, &p.V_l_u,
                                                         &p.V_r_z, &p.V_r_x, &p.V_r_u};
  std::vector<VarId> leaves;
  for (std::size_t i = 0; i < kDecoderCount; ++i) {
    *vs[i] = parameter(tape, *src[i]);
    leaves.push_back(vs[i]->id());
  }
  const Var ov = parameter(tape, o);
  leaves.push_back(ov.id());
  const Var f = decoder_field(w, ov);
  const Gradients g = tape.vjp(f.id(), a, leaves);
  ReverseDeriv d{scale(f.value(), -1.0), g.at(ov.id()), {}};
  for (std::size_t i = 0; i < kDecoderCount; ++i) d.d_theta[i] = g.at(leaves[i]);
  return d;
}

struct AugState {
  CMatrix o;
  CMatrix a;
};

/// Integrates the augmented system backward in time by h, adding the
/// parameter integral into theta.
AugState reverse_step(const ModelParams& p, const AugState& s, double h, Scheme scheme,
                      std::array<CMatrix, kDecoderCount>& theta) {
  if (scheme == Scheme::kEuler) {
    const ReverseDeriv k = reverse_derivative(p, s.o, s.a);
    for (std::size_t i = 0; i < kDecoderCount; ++i) add_into(theta[i], scale(k.d_theta[i], h));
    return {s.o + scale(k.d_o, h), s.a + scale(k.d_a, h)};
  }
  const ReverseDeriv k1 = reverse_derivative(p, s.o, s.a);
  const ReverseDeriv k2 = reverse_derivative(p, s.o + scale(k1.d_o, h / 2), s.a + scale(k1.d_a, h / 2));
  const ReverseDeriv k3 = reverse_derivative(p, s.o + scale(k2.d_o, h / 2), s.a + scale(k2.d_a, h / 2));
  const ReverseDeriv k4 = reverse_derivative(p, s.o + scale(k3.d_o, h), s.a + scale(k3.d_a, h));
  auto combine = [&](const CMatrix& x1, const CMatrix& x2, const CMatrix& x3, const CMatrix& x4) {
    return scale(x1 + scale(x2, 2.0) + scale(x3, 2.0) + x4, h / 6);
  };
  for (std::size_t i = 0; i < kDecoderCount; ++i) {
    add_into(theta[i], combine(k1.d_theta[i], k2.d_theta[i], k3.d_theta[i], k4.d_theta[i]));
  }
  return {s.o + combine(k1.d_o, k2.d_o, k3.d_o, k4.d_o), s.a + combine(k1.d_a, k2.d_a, k3.d_a, k4.d_a)};
}

}  // namespace

ModelParams zero_params(const SystemConfig& cfg) {
  ModelParams p;
  p.visit([&](const char* name, CMatrix& m) {
    const auto [r, c] = expected_shape(name, cfg);
    m = CMatrix::zeros(r, c);
  });
  return p;
}

ModelParams init_params(const SystemConfig& cfg, std::uint64_t seed, HeadInit head) {
  Rng rng(derive_seed(seed, Stream::kInit));
  ModelParams p;
  p.visit([&](const char* name, CMatrix& m) {
    const auto [r, c] = expected_shape(name, cfg);
    const std::size_t fan_in = name[2] == 'l' ? c : r;
    m = random_cmatrix(r, c, rng, 1.0 / static_cast<double>(fan_in));
  });
  if (head == HeadInit::kZero) p.W_l_h = CMatrix::zeros(p.W_l_h.rows(), p.W_l_h.cols());
  return p;
}

void check_shapes(const ModelParams& params, const SystemConfig& cfg) {
  params.visit([&](const char* name, const CMatrix& m) {
    const auto [r, c] = expected_shape(name, cfg);
    if (m.rows() != r || m.cols() != c) {
      throw ShapeError(std::string("parameter ") + name + " is " + m.shape_string() + ", expected " +
                       std::to_string(r) + "x" + std::to_string(c));
    }
  });
}

std::size_t real_parameter_count(const ModelParams& params) {
  std::size_t n = 0;
  params.visit([&](const char*, const CMatrix& m) { n += 2 * m.size(); });
  return n;
}

const char* to_string(Scheme s) { return s == Scheme::kEuler ? "euler" : "rk4"; }

Scheme parse_scheme(const std::string& s) {
  if (s == "euler") return Scheme::kEuler;
  if (s == "rk4") return Scheme::kRK4;
  throw ConfigError("invalid solver '" + s + "': expected euler or rk4");
}

void SolverSpec::validate() const {
  if (!(step_frames > 0.0) || step_frames > 1.0) {
    throw ConfigError("invalid config field 'step_frames': must lie in (0, 1]");
  }
}

std::size_t SolvePlan::short_steps() const {
  std::size_t n = 0;
  for (double r : remainder) n += r > 0.0 ? 1 : 0;
  return n;
}

std::size_t SolvePlan::field_evaluations(Scheme scheme) const {
  const std::size_t per_step = scheme == Scheme::kEuler ? 1 : 4;
  return per_step * (total_grid_steps() + short_steps());
}

SolvePlan plan_solve(std::span<const double> targets, double step) {
  if (targets.empty()) throw ContractError("ode_solve: empty target list");
  if (!(step > 0.0)) throw ContractError("ode_solve: step must be positive");
  SolvePlan plan;
  plan.step = step;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double t = targets[i];
    if (!(t > 0.0) || !std::isfinite(t)) {
      throw ContractError("ode_solve: target " + std::to_string(i) + " must be a positive finite time");
    }
    if (i > 0 && t < targets[i - 1]) throw ContractError("ode_solve: targets are not sorted ascending");
    const double nearest = std::round(t / step);
    std::size_t k;
    double rem;
    if (std::abs(t - nearest * step) <= 1e-9 * step) {
      k = static_cast<std::size_t>(nearest);
      rem = 0.0;
    } else {
      double fl = std::floor(t / step);
      if (t - fl * step < 0.0) fl -= 1.0;
      k = static_cast<std::size_t>(fl);
      rem = t - fl * step;
    }
    if (!plan.grid_steps.empty()) k = std::max(k, plan.grid_steps.back());
    plan.grid_steps.push_back(k);
    plan.remainder.push_back(rem);
  }
  return plan;
}

TnodeWeights<Var> lift(Tape& tape, const ModelParams& params) {
  std::vector<Var> leaves;
  params.visit([&](const char*, const CMatrix& m) { leaves.push_back(parameter(tape, m)); });
  TnodeWeights<Var> w;
  std::size_t i = 0;
  w.visit([&](const char*, Var& v) { v = leaves[i++]; });
  return w;
}

std::vector<VarId> leaf_ids(const TnodeWeights<Var>& weights) {
  std::vector<VarId> ids;
  weights.visit([&](const char*, const Var& v) { ids.push_back(v.id()); });
  return ids;
}

ModelParams gather(const Gradients& g, const TnodeWeights<Var>& weights) {
  std::vector<CMatrix> values;
  weights.visit([&](const char*, const Var& v) { values.push_back(g.at(v.id())); });
  ModelParams out;
  std::size_t i = 0;
  out.visit([&](const char*, CMatrix& m) { m = std::move(values[i++]); });
  return out;
}

const char* to_string(GradientPath p) { return p == GradientPath::kTape ? "tape" : "adjoint"; }

GradientPath parse_gradient_path(const std::string& s) {
  if (s == "tape") return GradientPath::kTape;
  if (s == "adjoint") return GradientPath::kAdjoint;
  throw ConfigError("invalid gradient path '" + s + "': expected tape or adjoint");
}

LossAndGrad tape_backward(const ModelParams& params, const std::vector<CMatrix>& inputs,
                          std::span<const double> targets, std::span<const CMatrix> labels, const SolverSpec& spec) {
  Tape tape;
  const TnodeWeights<Var> w = lift(tape, params);
  std::vector<Var> in;
  in.reserve(inputs.size());
  for (const CMatrix& h : inputs) in.push_back(constant(tape, h));
  const std::vector<Var> preds = predict(w, in, targets, spec);
  const Var loss = nmse_loss(preds, labels);
  const std::vector<VarId> ids = leaf_ids(w);
  return {loss.value()[0].real(), gather(tape.backward(loss.id(), ids), w)};
}

LossAndGrad adjoint_backward(const ModelParams& params, const std::vector<CMatrix>& inputs,
                             std::span<const double> targets, std::span<const CMatrix> labels, const SolverSpec& spec) {
  spec.validate();
  const SolvePlan plan = plan_solve(targets, spec.step_frames);

  // Encoder on its own tape so a(0) can be pulled back through it.
  Tape enc_tape;
  const TnodeWeights<Var> ew = lift(enc_tape, params);
  std::vector<VarId> enc_leaves;
  for (const Var* v : {&ew.U_l_z, &ew.U_l_x, &ew.U_l_u, &ew.U_r_z, &ew.U_r_x, &ew.U_r_u, &ew.W_l_z, &ew.W_l_x,
                       &ew.W_l_u, &ew.W_r_z, &ew.W_r_x, &ew.W_r_u}) {
    enc_leaves.push_back(v->id());
  }
  std::vector<Var> in;
  for (const CMatrix& h : inputs) in.push_back(constant(enc_tape, h));
  const Var r0 = encode(ew, in);

  // Forward solve, keeping only the target states and the final grid state.
  auto field = [&](const CMatrix& o) { return decoder_field(params, o); };
  std::vector<CMatrix> states;
  CMatrix grid = r0.value();
  std::size_t at = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    for (; at < plan.grid_steps[i]; ++at) grid = solver_step(field, grid, plan.step, spec.scheme);
    states.push_back(plan.remainder[i] > 0.0 ? solver_step(field, grid, plan.remainder[i], spec.scheme) : grid);
  }

  // Head and loss on a small tape give dL/dO(t_i) and the head gradients.
  Tape loss_tape;
  const Var wl = parameter(loss_tape, params.W_l_h);
  const Var wr = parameter(loss_tape, params.W_r_h);
  std::vector<Var> os, preds;
  std::vector<VarId> loss_leaves{wl.id(), wr.id()};
  for (const CMatrix& s : states) {
    os.push_back(parameter(loss_tape, s));
    loss_leaves.push_back(os.back().id());
    preds.push_back(wl * os.back() * wr);
  }
  const Var loss = nmse_loss(preds, labels);
  const Gradients lg = loss_tape.backward(loss.id(), loss_leaves);

  std::array<CMatrix, kDecoderCount> theta;
  for (std::size_t i = 0; i < kDecoderCount; ++i) {
    const CMatrix& like = i < 3 ? params.V_l_z : params.V_r_z;
    theta[i] = CMatrix::zeros(like.rows(), like.cols());
  }

  const std::size_t n_grid = plan.total_grid_steps();
  const CMatrix zero_state = CMatrix::zeros(grid.rows(), grid.cols());
  std::vector<CMatrix> seeds(n_grid + 1, zero_state);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const CMatrix& g_o = lg.at(os[i].id());
    if (plan.remainder[i] > 0.0) {
      const AugState back = reverse_step(params, {states[i], g_o}, plan.remainder[i], spec.scheme, theta);
      add_into(seeds[plan.grid_steps[i]], back.a);
    } else {
      add_into(seeds[plan.grid_steps[i]], g_o);
    }
  }
  AugState s{grid, zero_state};
  for (std::size_t n = n_grid; n > 0; --n) {
    add_into(s.a, seeds[n]);
    s = reverse_step(params, s, plan.step, spec.scheme, theta);
  }
  add_into(s.a, seeds[0]);

  const Gradients eg = enc_tape.vjp(r0.id(), s.a, enc_leaves);
  LossAndGrad out{loss.value()[0].real(), {}};
  ModelParams& g = out.grad;
  std::size_t e = 0;
  for (CMatrix* m : {&g.U_l_z, &g.U_l_x, &g.U_l_u, &g.U_r_z, &g.U_r_x, &g.U_r_u, &g.W_l_z, &g.W_l_x, &g.W_l_u,
                     &g.W_r_z, &g.W_r_x, &g.W_r_u}) {
    *m = eg.at(enc_leaves[e++]);
  }
  std::size_t d = 0;
  for (CMatrix* m : {&g.V_l_z, &g.V_l_x, &g.V_l_u, &g.V_r_z, &g.V_r_x, &g.V_r_u}) *m = std::move(theta[d++]);
  g.W_l_h = lg.at(wl.id());
  g.W_r_h = lg.at(wr.id());
  return out;
}

LossAndGrad loss_and_grad(const ModelParams& params, const std::vector<CMatrix>& inputs,
                          std::span<const double> targets, std::span<const CMatrix> labels, const SolverSpec& spec,
                          GradientPath path) {
  return path == GradientPath::kTape ? tape_backward(params, inputs, targets, labels, spec)
                                     : adjoint_backward(params, inputs, targets, labels, spec);
}

double relative_gap(const ModelParams& a, const ModelParams& b) {
  const auto fa = flatten(a);
  const auto fb = flatten(b);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < fa.size(); ++i) {
    num += fro_norm_sq(sub(*fa[i], *fb[i]));
    den += fro_norm_sq(*fb[i]);
  }
  if (num == 0.0) return 0.0;
  return std::sqrt(num / den);
}

VanillaParams init_vanilla(const SystemConfig& cfg, std::size_t hidden, std::uint64_t seed) {
  if (hidden == 0) throw ConfigError("invalid config field 'hidden': must be positive");
  const std::size_t d_in = cfg.effective_rows() * cfg.n_subcarriers;
  Rng rng(derive_seed(seed, Stream::kInit, 1));
  VanillaParams p;
  p.visit([&](const char* name, CMatrix& m) {
    const std::size_t rows = name[0] == 'w' && name[2] == 'h' ? d_in : hidden;
    const std::size_t cols = name[0] == 'u' ? d_in : hidden;
    m = random_cmatrix(rows, cols, rng, 1.0 / static_cast<double>(cols));
  });
  return p;
}

std::uint64_t head_float_count(std::uint64_t d, std::uint64_t m, std::uint64_t f_l, std::uint64_t f_r) {
  return 2 * (d * f_l + f_r * m);
}

std::uint64_t vanilla_head_float_count(std::uint64_t d, std::uint64_t m, std::uint64_t hidden) {
  return 2 * d * m * hidden;
}

FlopReport count_flops(const SystemConfig& cfg, const SolverSpec& spec) {
  cfg.validate();
  spec.validate();
  const ModelParams p = init_params(cfg, cfg.seed);
  Rng rng(derive_seed(cfg.seed, Stream::kProbe, 1));
  std::vector<CMatrix> inputs;
  for (std::size_t j = 0; j < cfg.history_frames; ++j) {
    inputs.push_back(random_cmatrix(cfg.effective_rows(), cfg.n_subcarriers, rng));
  }
  std::vector<double> targets;
  for (std::size_t i = 1; i <= cfg.test_slots(); ++i) targets.push_back(static_cast<double>(i) / cfg.slots_per_frame);

  FlopReport r;
  CMatrix o0;
  {
    MultiplyCounter c;
    o0 = encode(p, inputs);
    r.encoder = c.count();
  }
  std::vector<CMatrix> states;
  {
    MultiplyCounter c;
    states = ode_solve([&](const CMatrix& o) { return decoder_field(p, o); }, o0, targets, spec);
    r.decoder = c.count();
  }
  {
    MultiplyCounter c;
    for (const CMatrix& s : states) pred_head(p, s);
    r.head = c.count();
  }
  r.g = plan_solve(targets, spec.step_frames).field_evaluations(spec.scheme);

  const double j = cfg.history_frames, fl = cfg.feature_l, fr = cfg.feature_r, m = cfg.n_subcarriers;
  const double d = static_cast<double>(cfg.effective_rows());
  const double kq = static_cast<double>(cfg.test_slots());
  r.encoder_input = j * fl * m * (d + fr);
  r.encoder_full = r.encoder_input + j * fl * fr * (fl + fr);
  r.decoder_formula = static_cast<double>(r.g) * (fl * fl * fr + fl * fr * fr);
  r.head_formula = kq * (d * fl * fr + d * fr * m);
  return r;
}

const CMatrix* Checkpoint::find(const std::string& name) const {
  for (const NamedTensor& t : tensors) {
    if (t.name == name) return &t.value;
  }
  return nullptr;
}

const CMatrix& Checkpoint::at(const std::string& name) const {
  const CMatrix* m = find(name);
  if (m == nullptr) throw FormatError("checkpoint has no tensor '" + name + "'");
  return *m;
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ck) {
  io::ByteWriter w;
  w.bytes(std::string_view(kCheckpointMagic, 4));
  w.u32(kCheckpointVersion);
  write_config_block(w, ck.config);
  w.u32(static_cast<std::uint32_t>(ck.tensors.size()));
  for (const NamedTensor& t : ck.tensors) {
    if (t.name.size() > 0xffff) throw ContractError("checkpoint tensor name too long");
    w.u16(static_cast<std::uint16_t>(t.name.size()));
    w.bytes(t.name);
    w.u8(2);
    w.matrix(t.value);
  }
  return w.take();
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, "checkpoint");
  if (r.bytes(4) != std::string_view(kCheckpointMagic, 4)) r.fail("bad magic (expected CTCK)");
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) r.fail("unsupported version " + std::to_string(version));
  Checkpoint ck;
  ck.config = read_config_block(r);
  const std::uint32_t count = r.u32();
  std::set<std::string> seen;
  for (std::uint32_t i = 0; i < count; ++i) {
    NamedTensor t;
    t.name = r.bytes(r.u16());
    const std::uint8_t rank = r.u8();
    if (rank != 2) r.fail("tensor '" + t.name + "' has rank " + std::to_string(rank) + ", expected 2");
    t.value = r.matrix();
    if (!seen.insert(t.name).second) r.fail("duplicate tensor '" + t.name + "'");
    ck.tensors.push_back(std::move(t));
  }
  r.expect_end();
  return ck;
}

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  io::write_file(path, serialize_checkpoint(ck));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return deserialize_checkpoint(io::read_file(path)); }

ModelParams params_from_checkpoint(const Checkpoint& ck, const SystemConfig& cfg) {
  ModelParams p = zero_params(cfg);
  extract_tensors(ck, p);
  return p;
}

}  // namespace ctpred
