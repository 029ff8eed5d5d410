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

#include "ctpred/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ctpred/rng.hpp"

namespace ctpred {
namespace {

std::size_t expected_arity(OpKind kind) {
  switch (kind) {
    case OpKind::kMatMul:
    case OpKind::kHadamard:
    case OpKind::kAdd:
    case OpKind::kSub:
    case OpKind::kSolveHermitian:
      return 2;
    case OpKind::kStackRows:
      return 0;  // variadic
    case OpKind::kLeaf:
      return 0;
    default:
      return 1;
  }
}

void accumulate(CMatrix& slot, CMatrix g) {
  if (slot.empty()) {
    slot = std::move(g);
  } else {
    add_into(slot, g);
  }
}

CMatrix sigmoid_adjoint(const CMatrix& y, const CMatrix& g) {
  CMatrix out(y.rows(), y.cols());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double yr = y[i].real();
    const double yi = y[i].imag();
    out[i] = Complex(yr * (1.0 - yr) * g[i].real(), yi * (1.0 - yi) * g[i].imag());
  }
  return out;
}

CMatrix tanh_adjoint(const CMatrix& y, const CMatrix& g) {
  CMatrix out(y.rows(), y.cols());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double yr = y[i].real();
    const double yi = y[i].imag();
    out[i] = Complex((1.0 - yr * yr) * g[i].real(), (1.0 - yi * yi) * g[i].imag());
  }
  return out;
}

}  // namespace

const char* to_string(OpKind kind) {
  switch (kind) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kHadamard: return "hadamard";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kScale: return "scale";
    case OpKind::kOneMinus: return "one_minus";
    case OpKind::kConjTranspose: return "conj_transpose";
    case OpKind::kSplitSigmoid: return "split_sigmoid";
    case OpKind::kSplitTanh: return "split_tanh";
    case OpKind::kFroNormSq: return "fro_norm_sq";
    case OpKind::kVec: return "vec";
    case OpKind::kUnvec: return "unvec";
    case OpKind::kSliceRows: return "slice_rows";
    case OpKind::kStackRows: return "stack_rows";
    case OpKind::kSolveHermitian: return "solve_hermitian";
  }
  return "unknown";
}

const CMatrix& Gradients::at(VarId id) const {
  auto it = grads_.find(id);
  if (it == grads_.end()) throw ContractError("Gradients: no entry for node " + std::to_string(id.index));
  return it->second;
}

CMatrix evaluate_op(OpKind kind, std::span<const CMatrix* const> in, const OpAttr& attr) {
  switch (kind) {
    case OpKind::kMatMul: return matmul(*in[0], *in[1]);
    case OpKind::kHadamard: return hadamard(*in[0], *in[1]);
    case OpKind::kAdd: return add(*in[0], *in[1]);
    case OpKind::kSub: return sub(*in[0], *in[1]);
    case OpKind::kScale: return scale(*in[0], attr.scalar);
    case OpKind::kOneMinus: return one_minus(*in[0]);
    case OpKind::kConjTranspose: return conj_transpose(*in[0]);
    case OpKind::kSplitSigmoid: return split_sigmoid(*in[0]);
    case OpKind::kSplitTanh: return split_tanh(*in[0]);
    case OpKind::kFroNormSq: return CMatrix::scalar(fro_norm_sq(*in[0]));
    case OpKind::kVec: return vec(*in[0]);
    case OpKind::kUnvec: return unvec(*in[0], attr.rows, attr.cols);
    case OpKind::kSliceRows: {
      const CMatrix& a = *in[0];
      if (attr.rows == 0 || attr.offset + attr.rows > a.rows()) {
        throw ShapeError("slice_rows: window [" + std::to_string(attr.offset) + ", " +
                         std::to_string(attr.offset + attr.rows) + ") outside " + a.shape_string());
      }
      CMatrix out(attr.rows, a.cols());
      std::copy_n(a.data().begin() + static_cast<std::ptrdiff_t>(attr.offset * a.cols()), out.size(),
                  out.data().begin());
      return out;
    }
    case OpKind::kStackRows: {
      if (in.empty()) throw ShapeError("stack_rows: no inputs");
      std::size_t rows = 0;
      for (const CMatrix* m : in) {
        if (m->cols() != in[0]->cols()) {
          throw ShapeError("stack_rows: column mismatch " + in[0]->shape_string() + " vs " + m->shape_string());
        }
        rows += m->rows();
      }
      CMatrix out(rows, in[0]->cols());
      auto dst = out.data().begin();
      for (const CMatrix* m : in) dst = std::copy(m->data().begin(), m->data().end(), dst);
      return out;
    }
    case OpKind::kSolveHermitian:
      throw UnsupportedOpError("tape: solve_hermitian has no recorded adjoint (unsupported op)");
    case OpKind::kLeaf:
      break;
  }
  throw ContractError(std::string("evaluate_op: cannot evaluate ") + to_string(kind));
}

VarId Tape::push_leaf(CMatrix value, bool needs_grad) {
  Node n;
  n.kind = OpKind::kLeaf;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  nodes_.push_back(std::move(n));
  return VarId{nodes_.size() - 1};
}

VarId Tape::parameter(CMatrix value) { return push_leaf(std::move(value), true); }
VarId Tape::constant(CMatrix value) { return push_leaf(std::move(value), false); }

const Tape::Node& Tape::node(VarId id) const {
  if (id.index >= nodes_.size()) {
    throw ContractError("tape: node " + std::to_string(id.index) + " out of range (size " +
                        std::to_string(nodes_.size()) + ")");
  }
  return nodes_[id.index];
}

VarId Tape::record(OpKind kind, std::span<const VarId> inputs, const OpAttr& attr) {
  if (kind == OpKind::kLeaf) throw ContractError("tape: use parameter()/constant() for leaves");
  if (kind == OpKind::kSolveHermitian) {
    throw UnsupportedOpError("tape: solve_hermitian has no recorded adjoint (unsupported op)");
  }
  const std::size_t arity = expected_arity(kind);
  if (arity != 0 && inputs.size() != arity) {
    throw ContractError(std::string("tape: ") + to_string(kind) + " expects " + std::to_string(arity) +
                        " inputs, got " + std::to_string(inputs.size()));
  }
  std::vector<const CMatrix*> values;
  values.reserve(inputs.size());
  bool needs_grad = false;
  for (VarId id : inputs) {
    const Node& n = node(id);
    values.push_back(&n.value);
    needs_grad = needs_grad || n.needs_grad;
  }
  Node n;
  n.kind = kind;
  n.inputs.assign(inputs.begin(), inputs.end());
  n.attr = attr;
  n.value = evaluate_op(kind, values, attr);
  n.needs_grad = needs_grad;
  nodes_.push_back(std::move(n));
  return VarId{nodes_.size() - 1};
}

const CMatrix& Tape::value(VarId id) const { return node(id).value; }
OpKind Tape::kind(VarId id) const { return node(id).kind; }
bool Tape::requires_grad(VarId id) const { return node(id).needs_grad; }

std::vector<CMatrix> Tape::replay() const {
  std::vector<CMatrix> values;
  values.reserve(nodes_.size());
  std::vector<const CMatrix*> in;
  for (const Node& n : nodes_) {
    if (n.kind == OpKind::kLeaf) {
      values.push_back(n.value);
      continue;
    }
    in.clear();
    for (VarId id : n.inputs) in.push_back(&values[id.index]);
    values.push_back(evaluate_op(n.kind, in, n.attr));
  }
  return values;
}

Gradients Tape::backward(VarId loss, std::span<const VarId> leaves) const {
  const CMatrix& v = value(loss);
  if (v.rows() != 1 || v.cols() != 1) {
    throw ContractError("backward: loss must be a 1x1 scalar, got " + v.shape_string());
  }
  const double re = v[0].real();
  const double im = v[0].imag();
  if (!(std::abs(im) <= 1e-12 * std::max(1.0, std::abs(re)))) {
    throw ContractError("backward: loss is not real (imaginary part " + std::to_string(im) + ")");
  }
  return vjp(loss, CMatrix::scalar(1.0), leaves);
}

Gradients Tape::vjp(VarId output, const CMatrix& seed, std::span<const VarId> leaves) const {
  const Node& out = node(output);
  if (!seed.same_shape(out.value)) {
    throw ShapeError("vjp: seed " + seed.shape_string() + " does not match output " + out.value.shape_string());
  }
  std::vector<CMatrix> adj(output.index + 1);
  adj[output.index] = seed;

  for (std::size_t i = output.index + 1; i-- > 0;) {
    const Node& n = nodes_[i];
    if (n.kind == OpKind::kLeaf || !n.needs_grad || adj[i].empty()) continue;
    const CMatrix& g = adj[i];
    auto wants = [&](std::size_t k) { return nodes_[n.inputs[k].index].needs_grad; };
    auto slot = [&](std::size_t k) -> CMatrix& { return adj[n.inputs[k].index]; };
    auto in_value = [&](std::size_t k) -> const CMatrix& { return nodes_[n.inputs[k].index].value; };

    switch (n.kind) {
      case OpKind::kMatMul:
        if (wants(0)) accumulate(slot(0), matmul_bh(g, in_value(1)));
        if (wants(1)) accumulate(slot(1), matmul_ah(in_value(0), g));
        break;
      case OpKind::kHadamard:
        if (wants(0)) accumulate(slot(0), hadamard(g, conj(in_value(1))));
        if (wants(1)) accumulate(slot(1), hadamard(g, conj(in_value(0))));
        break;
      case OpKind::kAdd:
        if (wants(0)) accumulate(slot(0), g);
        if (wants(1)) accumulate(slot(1), g);
        break;
      case OpKind::kSub:
        if (wants(0)) accumulate(slot(0), g);
        if (wants(1)) accumulate(slot(1), scale(g, -1.0));
        break;
      case OpKind::kScale:
        accumulate(slot(0), scale(g, std::conj(n.attr.scalar)));
        break;
      case OpKind::kOneMinus:
        accumulate(slot(0), scale(g, -1.0));
        break;
      case OpKind::kConjTranspose:
        accumulate(slot(0), conj_transpose(g));
        break;
      case OpKind::kSplitSigmoid:
        accumulate(slot(0), sigmoid_adjoint(n.value, g));
        break;
      case OpKind::kSplitTanh:
        accumulate(slot(0), tanh_adjoint(n.value, g));
        break;
      case OpKind::kFroNormSq:
        // The output is real, so only the real part of the upstream gradient matters.
        accumulate(slot(0), scale(in_value(0), 2.0 * g[0].real()));
        break;
      case OpKind::kVec: {
        const CMatrix& a = in_value(0);
        accumulate(slot(0), unvec(g, a.rows(), a.cols()));
        break;
      }
      case OpKind::kUnvec:
        // The input is a column, so the inverse reshape is vec.
        accumulate(slot(0), vec(g));
        break;
      case OpKind::kSliceRows: {
        const CMatrix& a = in_value(0);
        CMatrix full(a.rows(), a.cols());
        std::copy(g.data().begin(), g.data().end(),
                  full.data().begin() + static_cast<std::ptrdiff_t>(n.attr.offset * a.cols()));
        accumulate(slot(0), std::move(full));
        break;
      }
      case OpKind::kStackRows: {
        std::size_t offset = 0;
        for (std::size_t k = 0; k < n.inputs.size(); ++k) {
          const CMatrix& a = in_value(k);
          if (wants(k)) {
            CMatrix part(a.rows(), a.cols());
            std::copy_n(g.data().begin() + static_cast<std::ptrdiff_t>(offset * a.cols()), part.size(),
                        part.data().begin());
            accumulate(slot(k), std::move(part));
          }
          offset += a.rows();
        }
        break;
      }
      case OpKind::kLeaf:
      case OpKind::kSolveHermitian:
        break;
    }
  }

  Gradients result;
  for (VarId id : leaves) {
    const Node& n = node(id);
    if (id.index <= output.index && !adj[id.index].empty()) {
      result.set(id, adj[id.index]);
    } else {
      result.set(id, CMatrix::zeros(n.value.rows(), n.value.cols()));
    }
  }
  return result;
}

namespace {

Var record1(OpKind kind, const Var& a, const OpAttr& attr = {}) {
  const VarId ids[] = {a.id()};
  return {a.tape(), a.tape().record(kind, ids, attr)};
}

Var record2(OpKind kind, const Var& a, const Var& b) {
  if (&a.tape() != &b.tape()) throw ContractError(std::string(to_string(kind)) + ": operands on different tapes");
  const VarId ids[] = {a.id(), b.id()};
  return {a.tape(), a.tape().record(kind, ids)};
}

}  // namespace

Var matmul(const Var& a, const Var& b) { return record2(OpKind::kMatMul, a, b); }
Var hadamard(const Var& a, const Var& b) { return record2(OpKind::kHadamard, a, b); }
Var add(const Var& a, const Var& b) { return record2(OpKind::kAdd, a, b); }
Var sub(const Var& a, const Var& b) { return record2(OpKind::kSub, a, b); }
Var scale(const Var& a, Complex s) { return record1(OpKind::kScale, a, OpAttr{.scalar = s}); }
Var one_minus(const Var& a) { return record1(OpKind::kOneMinus, a); }
Var conj_transpose(const Var& a) { return record1(OpKind::kConjTranspose, a); }
Var split_sigmoid(const Var& a) { return record1(OpKind::kSplitSigmoid, a); }
Var split_tanh(const Var& a) { return record1(OpKind::kSplitTanh, a); }
Var fro_norm_sq(const Var& a) { return record1(OpKind::kFroNormSq, a); }
Var vec(const Var& a) { return record1(OpKind::kVec, a); }

Var unvec(const Var& v, std::size_t rows, std::size_t cols) {
  if (v.cols() != 1) throw ShapeError("unvec: input must be a column, got " + v.value().shape_string());
  return record1(OpKind::kUnvec, v, OpAttr{.rows = rows, .cols = cols});
}

Var slice_rows(const Var& a, std::size_t offset, std::size_t count) {
  return record1(OpKind::kSliceRows, a, OpAttr{.rows = count, .offset = offset});
}

Var stack_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("stack_rows: no inputs");
  std::vector<VarId> ids;
  ids.reserve(parts.size());
  for (const Var& p : parts) {
    if (&p.tape() != &parts[0].tape()) throw ContractError("stack_rows: operands on different tapes");
    ids.push_back(p.id());
  }
  return {parts[0].tape(), parts[0].tape().record(OpKind::kStackRows, ids)};
}

Var operator+(const Var& a, const Var& b) { return add(a, b); }
Var operator-(const Var& a, const Var& b) { return sub(a, b); }
Var operator*(const Var& a, const Var& b) { return matmul(a, b); }

double finite_diff_check(const TapedObjective& objective, std::span<const CMatrix> params, std::size_t probes,
                         double step, std::uint64_t seed) {
  if (params.empty()) return 0.0;
  if (!(step > 0.0)) throw ContractError("finite_diff_check: step must be positive");
  if (probes == 0) throw ContractError("finite_diff_check: probes must be at least 1");

  auto evaluate = [&](std::span<const CMatrix> values) {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(values.size());
    for (const CMatrix& p : values) vars.push_back(parameter(tape, p));
    return objective(tape, vars).value()[0].real();
  };

  Tape tape;
  std::vector<Var> vars;
  std::vector<VarId> ids;
  for (const CMatrix& p : params) {
    vars.push_back(parameter(tape, p));
    ids.push_back(vars.back().id());
  }
  const Var loss = objective(tape, vars);
  const Gradients grads = tape.backward(loss.id(), ids);

  std::size_t total = 0;
  for (const CMatrix& p : params) total += 2 * p.size();

  // Distinct probe indices over all real components.
  std::vector<std::size_t> chosen;
  if (probes >= total) {
    chosen.resize(total);
    for (std::size_t i = 0; i < total; ++i) chosen[i] = i;
  } else {
    Rng rng(derive_seed(seed, Stream::kProbe));
    while (chosen.size() < probes) {
      const std::size_t k = rng.below(total);
      if (std::find(chosen.begin(), chosen.end(), k) == chosen.end()) chosen.push_back(k);
    }
  }

  std::vector<CMatrix> work(params.begin(), params.end());
  double worst = 0.0;
  for (std::size_t k : chosen) {
    std::size_t p = 0;
    std::size_t rem = k;
    while (rem >= 2 * params[p].size()) {
      rem -= 2 * params[p].size();
      ++p;
    }
    const std::size_t entry = rem / 2;
    const bool imag_part = (rem % 2) == 1;
    const Complex original = work[p][entry];
    const Complex delta = imag_part ? Complex(0.0, step) : Complex(step, 0.0);

    work[p][entry] = original + delta;
    const double plus = evaluate(work);
    work[p][entry] = original - delta;
    const double minus = evaluate(work);
    work[p][entry] = original;

    const double fd = (plus - minus) / (2.0 * step);
    const Complex g = grads.at(ids[p])[entry];
    const double analytic = imag_part ? g.imag() : g.real();
    worst = std::max(worst, std::abs(analytic - fd) / std::max(std::abs(fd), 1e-12));
  }
  return worst;
}

}  // namespace ctpred
