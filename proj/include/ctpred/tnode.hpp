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
#include <span>
#include <string>
#include <vector>

#include "ctpred/autodiff.hpp"
#include "ctpred/channelsim.hpp"
#include "ctpred/ctmath.hpp"
#include "ctpred/loss.hpp"

namespace ctpred {

/// Learnable matrices of the tensorized model. T is CMatrix for eager
/// evaluation, Var for taped evaluation, so every model function below is
/// written once.
///
/// Shapes (D = N_RF N_R):
///   U_l_* F_l x D, U_r_* M x F_r, W_l_* and V_l_* F_l x F_l,
///   W_r_* and V_r_* F_r x F_r, W_l_h D x F_l, W_r_h F_r x M.
template <class T>
struct TnodeWeights {
  T U_l_z, U_l_x, U_l_u;
  T U_r_z, U_r_x, U_r_u;
  T W_l_z, W_l_x, W_l_u;
  T W_r_z, W_r_x, W_r_u;
  T V_l_z, V_l_x, V_l_u;
  T V_r_z, V_r_x, V_r_u;
  T W_l_h, W_r_h;

  friend bool operator==(const TnodeWeights&, const TnodeWeights&) = default;

  /// Calls f(name, member) for every matrix in a fixed order.
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
    f("U_l_z", s.U_l_z), f("U_l_x", s.U_l_x), f("U_l_u", s.U_l_u);
    f("U_r_z", s.U_r_z), f("U_r_x", s.U_r_x), f("U_r_u", s.U_r_u);
    f("W_l_z", s.W_l_z), f("W_l_x", s.W_l_x), f("W_l_u", s.W_l_u);
    f("W_r_z", s.W_r_z), f("W_r_x", s.W_r_x), f("W_r_u", s.W_r_u);
    f("V_l_z", s.V_l_z), f("V_l_x", s.V_l_x), f("V_l_u", s.V_l_u);
    f("V_r_z", s.V_r_z), f("V_r_x", s.V_r_x), f("V_r_u", s.V_r_u);
    f("W_l_h", s.W_l_h), f("W_r_h", s.W_r_h);
  }
};

using ModelParams = TnodeWeights<CMatrix>;

/// All-zero parameters with the shapes implied by cfg.
ModelParams zero_params(const SystemConfig& cfg);

enum class HeadInit { kRandom, kZero };

/// Entries ~ CN(0, 1/fan_in); fan_in is the column count of left factors
/// and the row count of right factors. With HeadInit::kZero the left head
/// factor starts at zero, so a fresh model predicts zero (0 dB NMSE); the
/// random draws for every other tensor are unchanged.
ModelParams init_params(const SystemConfig& cfg, std::uint64_t seed, HeadInit head = HeadInit::kRandom);

/// Throws ShapeError naming the first matrix whose shape disagrees with cfg.
void check_shapes(const ModelParams& params, const SystemConfig& cfg);

std::size_t real_parameter_count(const ModelParams& params);

inline CMatrix zeros_like(const CMatrix&, std::size_t rows, std::size_t cols) { return CMatrix::zeros(rows, cols); }
inline Var zeros_like(const Var& ref, std::size_t rows, std::size_t cols) {
  return constant(ref.tape(), CMatrix::zeros(rows, cols));
}

/// Shared gate algebra: with left/right factors (l, r) applied around the
/// input and the state,
///   Z = sig(in_z + st_z), X = sig(in_x + st_x),
///   U = tanh(in_u + st_u(R o X)), R' = (1 - Z) o U + Z o R.
template <class T>
T encoder_cell(const TnodeWeights<T>& p, const T& h, const T& r) {
  const T z = split_sigmoid(p.U_l_z * h * p.U_r_z + p.W_l_z * r * p.W_r_z);
  const T x = split_sigmoid(p.U_l_x * h * p.U_r_x + p.W_l_x * r * p.W_r_x);
  const T u = split_tanh(p.U_l_u * h * p.U_r_u + p.W_l_u * hadamard(r, x) * p.W_r_u);
  return hadamard(one_minus(z), u) + hadamard(z, r);
}

/// Folds encoder_cell over the inputs (oldest first) from a zero state.
template <class T>
T encode(const TnodeWeights<T>& p, const std::vector<T>& inputs) {
  if (inputs.empty()) throw ShapeError("encode: no input channels");
  T r = zeros_like(inputs.front(), p.W_l_z.rows(), p.W_r_z.cols());
  for (const T& h : inputs) r = encoder_cell(p, h, r);
  return r;
}

/// dO/dt; autonomous, no time argument.
template <class T>
T decoder_field(const TnodeWeights<T>& p, const T& o) {
  const T z = split_sigmoid(p.V_l_z * o * p.V_r_z);
  const T x = split_sigmoid(p.V_l_x * o * p.V_r_x);
  const T u = split_tanh(p.V_l_u * hadamard(o, x) * p.V_r_u);
  return hadamard(one_minus(z), u) + hadamard(z, o);
}

template <class T>
T pred_head(const TnodeWeights<T>& p, const T& o) {
  return p.W_l_h * o * p.W_r_h;
}

enum class Scheme { kEuler, kRK4 };

const char* to_string(Scheme s);
Scheme parse_scheme(const std::string& s);

struct SolverSpec {
  Scheme scheme = Scheme::kRK4;
  double step_frames = 0.2;  ///< one slot at Q = 5

  static SolverSpec for_config(const SystemConfig& cfg, Scheme scheme = Scheme::kRK4) {
    return {scheme, 1.0 / cfg.slots_per_frame};
  }
  /// Requires 0 < step_frames <= 1.
  void validate() const;
  friend bool operator==(const SolverSpec&, const SolverSpec&) = default;
};

/// Integration schedule. The trajectory advances on the grid n*step; a
/// target off the grid is reached by one shortened step from the last grid
/// point before it, without disturbing the grid trajectory. A target within
/// 1e-9 steps of a grid point is snapped to it.
struct SolvePlan {
  double step = 0.0;
  std::vector<std::size_t> grid_steps;  ///< full steps taken before target i
  std::vector<double> remainder;        ///< length of the final short step; 0 on the grid

  std::size_t total_grid_steps() const { return grid_steps.empty() ? 0 : grid_steps.back(); }
  std::size_t short_steps() const;
  /// G: decoder field evaluations of one solve.
  std::size_t field_evaluations(Scheme scheme) const;
};

/// Throws ContractError for empty, unsorted, or non-positive targets.
SolvePlan plan_solve(std::span<const double> targets, double step);

template <class T, class Field>
T solver_step(const Field& f, const T& o, double h, Scheme scheme) {
  if (scheme == Scheme::kEuler) return o + scale(f(o), h);
  const T k1 = f(o);
  const T k2 = f(o + scale(k1, h / 2));
  const T k3 = f(o + scale(k2, h / 2));
  const T k4 = f(o + scale(k3, h));
  return o + scale(k1 + scale(k2, 2.0) + scale(k3, 2.0) + k4, h / 6);
}

/// States at each target, integrating from t = 0.
template <class T, class Field>
std::vector<T> ode_solve(const Field& f, const T& o0, std::span<const double> targets, const SolverSpec& spec) {
  spec.validate();
  const SolvePlan plan = plan_solve(targets, spec.step_frames);
  std::vector<T> out;
  out.reserve(targets.size());
  T state = o0;
  std::size_t at = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    for (; at < plan.grid_steps[i]; ++at) state = solver_step(f, state, plan.step, spec.scheme);
    out.push_back(plan.remainder[i] > 0.0 ? solver_step(f, state, plan.remainder[i], spec.scheme) : state);
  }
  return out;
}

template <class T>
std::vector<T> predict(const TnodeWeights<T>& p, const std::vector<T>& inputs, std::span<const double> targets,
                       const SolverSpec& spec) {
  const T o0 = encode(p, inputs);
  std::vector<T> states = ode_solve([&](const T& o) { return decoder_field(p, o); }, o0, targets, spec);
  for (T& s : states) s = pred_head(p, s);
  return states;
}

/// Parameter leaves on `tape`, in visit order.
TnodeWeights<Var> lift(Tape& tape, const ModelParams& params);
std::vector<VarId> leaf_ids(const TnodeWeights<Var>& weights);
/// Gathers gradients of the lifted leaves back into ModelParams layout.
ModelParams gather(const Gradients& g, const TnodeWeights<Var>& weights);

enum class GradientPath { kTape, kAdjoint };
const char* to_string(GradientPath p);
GradientPath parse_gradient_path(const std::string& s);

struct LossAndGrad {
  double loss = 0.0;
  ModelParams grad;
};

/// NMSE loss of one sample and its gradient by backprop through the solver.
LossAndGrad tape_backward(const ModelParams& params, const std::vector<CMatrix>& inputs,
                          std::span<const double> targets, std::span<const CMatrix> labels, const SolverSpec& spec);

/// Same loss; decoder gradients from the continuous adjoint integrated
/// backward in time with augmented state (O, a, g_theta), head gradients
/// from the loss tape, encoder gradients by backprop through encode seeded
/// with a(0).
LossAndGrad adjoint_backward(const ModelParams& params, const std::vector<CMatrix>& inputs,
                             std::span<const double> targets, std::span<const CMatrix> labels, const SolverSpec& spec);

LossAndGrad loss_and_grad(const ModelParams& params, const std::vector<CMatrix>& inputs,
                          std::span<const double> targets, std::span<const CMatrix> labels, const SolverSpec& spec,
                          GradientPath path);

/// |a - b| / |b| over all matrices jointly.
double relative_gap(const ModelParams& a, const ModelParams& b);

// Vectorized baseline -------------------------------------------------------

/// GRU weights acting on vectorized channels; D_in = N_RF N_R M.
/// u_* D_h x D_in, w_* and v_* D_h x D_h, w_h D_in x D_h.
template <class T>
struct VanillaWeights {
  T u_z, u_x, u_u;
  T w_z, w_x, w_u;
  T v_z, v_x, v_u;
  T w_h;

  friend bool operator==(const VanillaWeights&, const VanillaWeights&) = default;

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
    f("v_z", s.v_z), f("v_x", s.v_x), f("v_u", s.v_u);
    f("w_h", s.w_h);
  }
};

using VanillaParams = VanillaWeights<CMatrix>;

VanillaParams init_vanilla(const SystemConfig& cfg, std::size_t hidden, std::uint64_t seed);

/// One classical GRU update on column vectors.
template <class T>
T gru_cell(const T& uz, const T& ux, const T& uu, const T& wz, const T& wx, const T& wu, const T& h, const T& r) {
  const T z = split_sigmoid(uz * h + wz * r);
  const T x = split_sigmoid(ux * h + wx * r);
  const T u = split_tanh(uu * h + wu * hadamard(r, x));
  return hadamard(one_minus(z), u) + hadamard(z, r);
}

/// Same pipeline as predict with vectorized states; outputs are
/// (N_RF N_R M) x 1 columns.
template <class T>
std::vector<T> vanilla_predict(const VanillaWeights<T>& p, const std::vector<T>& inputs,
                               std::span<const double> targets, const SolverSpec& spec) {
  if (inputs.empty()) throw ShapeError("vanilla_predict: no input channels");
  T r = zeros_like(inputs.front(), p.w_z.rows(), 1);
  for (const T& h : inputs) r = gru_cell(p.u_z, p.u_x, p.u_u, p.w_z, p.w_x, p.w_u, vec(h), r);
  auto field = [&](const T& o) {
    const T z = split_sigmoid(p.v_z * o);
    const T x = split_sigmoid(p.v_x * o);
    const T u = split_tanh(p.v_u * hadamard(o, x));
    return hadamard(one_minus(z), u) + hadamard(z, o);
  };
  std::vector<T> states = ode_solve(field, r, targets, spec);
  for (T& s : states) s = p.w_h * s;
  return states;
}

// Parameter and complexity accounting ---------------------------------------

/// Real floats in the tensorized head: 2 (D F_l + F_r M).
std::uint64_t head_float_count(std::uint64_t d, std::uint64_t m, std::uint64_t f_l, std::uint64_t f_r);
/// Real floats in the vectorized head W^h (D M x hidden): 2 D M hidden.
std::uint64_t vanilla_head_float_count(std::uint64_t d, std::uint64_t m, std::uint64_t hidden);

struct FlopReport {
  std::uint64_t encoder = 0;  ///< counted complex multiplications
  std::uint64_t decoder = 0;
  std::uint64_t head = 0;
  std::uint64_t g = 0;  ///< decoder field evaluations
  double encoder_input = 0.0;  ///< J F_l M (N_RF N_R + F_r)
  double encoder_full = 0.0;   ///< encoder_input + J F_l F_r (F_l + F_r), the recurrent products
  double decoder_formula = 0.0;  ///< G (F_l^2 F_r + F_l F_r^2)
  double head_formula = 0.0;     ///< KQ (N_RF N_R F_l F_r + N_RF N_R F_r M)
};

/// Instrumented run of one prediction over the KQ test grid with random
/// parameters and inputs.
FlopReport count_flops(const SystemConfig& cfg, const SolverSpec& spec);

// Checkpoints ----------------------------------------------------------------

struct NamedTensor {
  std::string name;
  CMatrix value;
  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

struct Checkpoint {
  SystemConfig config;
  std::vector<NamedTensor> tensors;

  const CMatrix* find(const std::string& name) const;
  /// Throws FormatError when the tensor is missing.
  const CMatrix& at(const std::string& name) const;
  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

template <class W>
void append_tensors(std::vector<NamedTensor>& out, const W& weights, const std::string& prefix = "") {
  weights.visit([&](const char* name, const CMatrix& m) { out.push_back({prefix + name, m}); });
}

/// Fills `weights` from the checkpoint; every tensor must be present with
/// the shape already held by the corresponding member.
template <class W>
void extract_tensors(const Checkpoint& ck, W& weights, const std::string& prefix = "") {
  weights.visit([&](const char* name, CMatrix& m) {
    const CMatrix& t = ck.at(prefix + name);
    if (!t.same_shape(m)) {
      throw FormatError("checkpoint tensor '" + prefix + name + "' has shape " + t.shape_string() + ", expected " +
                        m.shape_string());
    }
    m = t;
  });
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ck);
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// TN-ODE parameters from a checkpoint written for a compatible config.
ModelParams params_from_checkpoint(const Checkpoint& ck, const SystemConfig& cfg);

}  // namespace ctpred
