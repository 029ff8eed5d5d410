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

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <vector>

#include "ctpred/ctmath.hpp"

namespace ctpred {

/// Index of a node on a Tape.
struct VarId {
  std::size_t index = 0;
  auto operator<=>(const VarId&) const = default;
};

enum class OpKind : std::uint8_t {
  kLeaf,
  kMatMul,
  kHadamard,
  kAdd,
  kSub,
  kScale,
  kOneMinus,
  kConjTranspose,
  kSplitSigmoid,
  kSplitTanh,
  kFroNormSq,
  kVec,
  kUnvec,
  kSliceRows,
  kStackRows,
  kSolveHermitian,
};

const char* to_string(OpKind kind);

/// Non-tensor operands of an op: the scalar of kScale, the target shape of
/// kUnvec, the row window of kSliceRows.
struct OpAttr {
  Complex scalar{};
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t offset = 0;
};

/// The op has no adjoint rule on the tape.
class UnsupportedOpError : public ContractError {
 public:
  using ContractError::ContractError;
};

/// Gradients keyed by the VarId they were requested for.
///
/// Each entry holds g = dL/d(re) + i dL/d(im) entrywise (real-pair convention,
/// not Wirtinger), so a gradient step is simply x - lr * g.
class Gradients {
 public:
  void set(VarId id, CMatrix g) { grads_[id] = std::move(g); }
  const CMatrix& at(VarId id) const;
  bool contains(VarId id) const { return grads_.count(id) != 0; }
  std::size_t size() const { return grads_.size(); }
  auto begin() const { return grads_.begin(); }
  auto end() const { return grads_.end(); }

 private:
  std::map<VarId, CMatrix> grads_;
};

/// Append-only record of a computation for reverse-mode differentiation.
///
/// Every node stores its forward value; inputs always precede the node, so
/// the node vector is already in topological order. A tape is built on one
/// thread; once built, `backward`/`vjp`/`replay` are const and may run
/// concurrently.
class Tape {
 public:
  /// Leaf that receives a gradient.
  VarId parameter(CMatrix value);
  /// Leaf excluded from differentiation.
  VarId constant(CMatrix value);

  /// Evaluates `kind` on the values of `inputs` and appends the node.
  VarId record(OpKind kind, std::span<const VarId> inputs, const OpAttr& attr = {});

  const CMatrix& value(VarId id) const;
  OpKind kind(VarId id) const;
  bool requires_grad(VarId id) const;
  std::size_t size() const { return nodes_.size(); }

  /// Re-evaluates every node from the recorded leaves.
  std::vector<CMatrix> replay() const;

  /// Gradients of a real scalar (1x1, zero imaginary part) w.r.t. `leaves`.
  /// Leaves the loss does not depend on get exact zeros.
  Gradients backward(VarId loss, std::span<const VarId> leaves) const;

  /// Vector-Jacobian product: gradients of Re<seed, output> w.r.t. `leaves`.
  Gradients vjp(VarId output, const CMatrix& seed, std::span<const VarId> leaves) const;

 private:
  struct Node {
    OpKind kind = OpKind::kLeaf;
    std::vector<VarId> inputs;
    OpAttr attr;
    CMatrix value;
    bool needs_grad = false;
  };

  VarId push_leaf(CMatrix value, bool needs_grad);
  const Node& node(VarId id) const;

  std::vector<Node> nodes_;
};

/// Evaluates a single op on concrete values. Shared by Tape::record and replay.
CMatrix evaluate_op(OpKind kind, std::span<const CMatrix* const> inputs, const OpAttr& attr);

/// Handle to a tape node that supports the same algebra as CMatrix, so model
/// code can be written once and run eagerly or recorded.
class Var {
 public:
  Var() = default;
  Var(Tape& tape, VarId id) : tape_(&tape), id_(id) {}

  Tape& tape() const { return *tape_; }
  VarId id() const { return id_; }
  const CMatrix& value() const { return tape_->value(id_); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }

 private:
  Tape* tape_ = nullptr;
  VarId id_;
};

inline Var parameter(Tape& tape, CMatrix value) { return {tape, tape.parameter(std::move(value))}; }
inline Var constant(Tape& tape, CMatrix value) { return {tape, tape.constant(std::move(value))}; }

Var matmul(const Var& a, const Var& b);
Var hadamard(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var scale(const Var& a, Complex s);
Var one_minus(const Var& a);
Var conj_transpose(const Var& a);
Var split_sigmoid(const Var& a);
Var split_tanh(const Var& a);
Var fro_norm_sq(const Var& a);
Var vec(const Var& a);
Var unvec(const Var& v, std::size_t rows, std::size_t cols);
Var slice_rows(const Var& a, std::size_t offset, std::size_t count);
Var stack_rows(std::span<const Var> parts);

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);

/// Objective recorded on a fresh tape from parameter leaves; must return a
/// real scalar node.
using TapedObjective = std::function<Var(Tape&, std::span<const Var>)>;

/// Compares tape gradients with central finite differences on `probes`
/// randomly chosen real components (all of them if fewer exist).
/// Returns max |g_tape - g_fd| / max(|g_fd|, 1e-12); 0 when there are no
/// parameters.
double finite_diff_check(const TapedObjective& objective, std::span<const CMatrix> params, std::size_t probes,
                         double step, std::uint64_t seed = 0);

}  // namespace ctpred
