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

#include "ctpred/ctmath.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace ctpred {
namespace {

using RowMat = Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap as_eigen(const CMatrix& m) { return ConstMap(m.data().data(), m.rows(), m.cols()); }
MutMap as_eigen(CMatrix& m) { return MutMap(m.data().data(), m.rows(), m.cols()); }

// Plain product formula; avoids the NaN-recovery path of operator* on std::complex.
inline Complex cmul(Complex a, Complex b) {
  return {a.real() * b.real() - a.imag() * b.imag(), a.real() * b.imag() + a.imag() * b.real()};
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

void require_same_shape(const CMatrix& a, const CMatrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " + b.shape_string());
  }
}

thread_local MultiplyCounter* active_counter = nullptr;

}  // namespace

CMatrix::CMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {
  if (rows == 0 || cols == 0) {
    throw ShapeError("CMatrix: dimensions must be positive, got " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
}

CMatrix::CMatrix(std::size_t rows, std::size_t cols, std::vector<Complex> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (rows == 0 || cols == 0) {
    throw ShapeError("CMatrix: dimensions must be positive, got " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
  if (data_.size() != rows * cols) {
    throw ShapeError("CMatrix: data length " + std::to_string(data_.size()) + " does not match " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
}

CMatrix::CMatrix(std::initializer_list<std::initializer_list<Complex>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  if (rows_ == 0 || cols_ == 0) throw ShapeError("CMatrix: empty initializer");
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("CMatrix: ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

CMatrix CMatrix::zeros(std::size_t rows, std::size_t cols) { return CMatrix(rows, cols); }

CMatrix CMatrix::ones(std::size_t rows, std::size_t cols) {
  CMatrix m(rows, cols);
  std::fill(m.data_.begin(), m.data_.end(), Complex(1.0, 0.0));
  return m;
}

CMatrix CMatrix::identity(std::size_t n) {
  CMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

CMatrix CMatrix::scalar(Complex value) { return CMatrix(1, 1, {value}); }

std::string CMatrix::shape_string() const {
  std::ostringstream os;
  os << '(' << rows_ << 'x' << cols_ << ')';
  return os.str();
}

bool operator==(const CMatrix& a, const CMatrix& b) {
  if (!a.same_shape(b)) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].real() != b[i].real() || a[i].imag() != b[i].imag()) return false;
  }
  return true;
}

CMatrix matmul(const CMatrix& a, const CMatrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions differ " + a.shape_string() + " * " + b.shape_string());
  }
  MultiplyCounter::record(static_cast<std::uint64_t>(a.rows()) * a.cols() * b.cols());
  CMatrix out(a.rows(), b.cols());
  as_eigen(out).noalias() = as_eigen(a) * as_eigen(b);
  return out;
}

CMatrix matmul_bh(const CMatrix& a, const CMatrix& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_bh: " + a.shape_string() + " * " + b.shape_string() + "^H");
  }
  MultiplyCounter::record(static_cast<std::uint64_t>(a.rows()) * a.cols() * b.rows());
  CMatrix out(a.rows(), b.rows());
  as_eigen(out).noalias() = as_eigen(a) * as_eigen(b).adjoint();
  return out;
}

CMatrix matmul_ah(const CMatrix& a, const CMatrix& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("matmul_ah: " + a.shape_string() + "^H * " + b.shape_string());
  }
  MultiplyCounter::record(static_cast<std::uint64_t>(a.cols()) * a.rows() * b.cols());
  CMatrix out(a.cols(), b.cols());
  as_eigen(out).noalias() = as_eigen(a).adjoint() * as_eigen(b);
  return out;
}

CMatrix hadamard(const CMatrix& a, const CMatrix& b) {
  require_same_shape(a, b, "hadamard");
  MultiplyCounter::record(a.size());
  CMatrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = cmul(a[i], b[i]);
  return out;
}

CMatrix add(const CMatrix& a, const CMatrix& b) {
  require_same_shape(a, b, "add");
  CMatrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

CMatrix sub(const CMatrix& a, const CMatrix& b) {
  require_same_shape(a, b, "sub");
  CMatrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

CMatrix scale(const CMatrix& a, Complex s) {
  MultiplyCounter::record(a.size());
  CMatrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = cmul(a[i], s);
  return out;
}

CMatrix one_minus(const CMatrix& a) {
  CMatrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = Complex(1.0 - a[i].real(), -a[i].imag());
  return out;
}

CMatrix conj_transpose(const CMatrix& a) {
  CMatrix out(a.cols(), a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) out(c, r) = std::conj(a(r, c));
  }
  return out;
}

CMatrix conj(const CMatrix& a) {
  CMatrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = std::conj(a[i]);
  return out;
}

CMatrix split_sigmoid(const CMatrix& a) {
  CMatrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = Complex(sigmoid(a[i].real()), sigmoid(a[i].imag()));
  return out;
}

CMatrix split_tanh(const CMatrix& a) {
  CMatrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = Complex(std::tanh(a[i].real()), std::tanh(a[i].imag()));
  return out;
}

double fro_norm_sq(const CMatrix& a) {
  double s = 0.0;
  for (const Complex& z : a.data()) s += z.real() * z.real() + z.imag() * z.imag();
  return s;
}

void add_into(CMatrix& dst, const CMatrix& src) {
  require_same_shape(dst, src, "add_into");
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

double hermitian_condition(const CMatrix& a) {
  if (a.rows() != a.cols()) throw ShapeError("hermitian_condition: not square " + a.shape_string());
  Eigen::SelfAdjointEigenSolver<RowMat> eig(as_eigen(a), Eigen::EigenvaluesOnly);
  const auto& ev = eig.eigenvalues();
  const double hi = ev.cwiseAbs().maxCoeff();
  const double lo = ev.cwiseAbs().minCoeff();
  if (lo == 0.0) return std::numeric_limits<double>::infinity();
  return hi / lo;
}

namespace {

void check_hermitian(const CMatrix& a, const char* op) {
  if (a.rows() != a.cols()) throw ShapeError(std::string(op) + ": matrix is not square " + a.shape_string());
  double asym = 0.0;
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = r; c < a.cols(); ++c) asym = std::max(asym, std::abs(a(r, c) - std::conj(a(c, r))));
  }
  const double scale_ref = std::sqrt(fro_norm_sq(a));
  if (!(asym <= 1e-10 * std::max(1.0, scale_ref))) {
    throw NumericError(std::string(op) + ": matrix is not Hermitian (asymmetry " + std::to_string(asym) + ")");
  }
}

}  // namespace

CMatrix solve_hermitian(const CMatrix& a, const CMatrix& b, const SolveOptions& opts) {
  check_hermitian(a, "solve_hermitian");
  if (b.rows() != a.rows()) {
    throw ShapeError("solve_hermitian: rhs " + b.shape_string() + " does not match " + a.shape_string());
  }
  CMatrix work = a;
  if (opts.jitter != 0.0) {
    for (std::size_t i = 0; i < work.rows(); ++i) work(i, i) += opts.jitter;
  }
  const double cond = hermitian_condition(work);
  if (!(cond <= opts.max_condition)) {
    throw NumericError("solve_hermitian: condition number " + std::to_string(cond) + " exceeds cap " +
                       std::to_string(opts.max_condition));
  }
  Eigen::LLT<RowMat> llt(as_eigen(work));
  if (llt.info() != Eigen::Success) throw NumericError("solve_hermitian: matrix is not positive definite");
  CMatrix x(b.rows(), b.cols());
  as_eigen(x) = llt.solve(as_eigen(b));
  return x;
}

double log2_det_hermitian(const CMatrix& a) {
  check_hermitian(a, "log2_det_hermitian");
  Eigen::LLT<RowMat> llt(as_eigen(a));
  if (llt.info() != Eigen::Success) throw NumericError("log2_det_hermitian: matrix is not positive definite");
  const auto& l = llt.matrixLLT();
  double s = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) s += std::log2(l(i, i).real());
  return 2.0 * s;
}

CMatrix vec(const CMatrix& a) {
  CMatrix out(a.size(), 1);
  std::size_t k = 0;
  for (std::size_t c = 0; c < a.cols(); ++c) {
    for (std::size_t r = 0; r < a.rows(); ++r) out[k++] = a(r, c);
  }
  return out;
}

CMatrix unvec(const CMatrix& v, std::size_t rows, std::size_t cols) {
  if (v.size() != rows * cols) {
    throw ShapeError("unvec: length " + std::to_string(v.size()) + " cannot form " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
  CMatrix out(rows, cols);
  std::size_t k = 0;
  for (std::size_t c = 0; c < cols; ++c) {
    for (std::size_t r = 0; r < rows; ++r) out(r, c) = v[k++];
  }
  return out;
}

CMatrix slice_rows(const CMatrix& a, std::size_t offset, std::size_t count) {
  if (offset + count > a.rows()) {
    throw ShapeError("slice_rows: rows [" + std::to_string(offset) + ", " + std::to_string(offset + count) +
                     ") exceed " + a.shape_string());
  }
  const auto src = a.data().subspan(offset * a.cols(), count * a.cols());
  return CMatrix(count, a.cols(), std::vector<Complex>(src.begin(), src.end()));
}

CMatrix stack_rows(std::span<const CMatrix> parts) {
  if (parts.empty()) throw ShapeError("stack_rows: no parts");
  std::vector<Complex> data;
  std::size_t rows = 0;
  for (const CMatrix& p : parts) {
    if (p.cols() != parts.front().cols()) throw ShapeError("stack_rows: column counts differ");
    data.insert(data.end(), p.data().begin(), p.data().end());
    rows += p.rows();
  }
  return CMatrix(rows, parts.front().cols(), std::move(data));
}

CMatrix operator+(const CMatrix& a, const CMatrix& b) { return add(a, b); }
CMatrix operator-(const CMatrix& a, const CMatrix& b) { return sub(a, b); }
CMatrix operator*(const CMatrix& a, const CMatrix& b) { return matmul(a, b); }

bool all_finite(const CMatrix& a) {
  return std::all_of(a.data().begin(), a.data().end(),
                     [](const Complex& z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); });
}

MultiplyCounter::MultiplyCounter() : previous_(active_counter) { active_counter = this; }

MultiplyCounter::~MultiplyCounter() { active_counter = previous_; }

void MultiplyCounter::record(std::uint64_t n) {
  if (active_counter != nullptr) active_counter->count_ += n;
}

}  // namespace ctpred
