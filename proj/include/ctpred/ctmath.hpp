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

#include <complex>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "ctpred/error.hpp"

namespace ctpred {

using Complex = std::complex<double>;

/// Dense complex matrix, row-major, no broadcasting.
///
/// Storage is row-major while `vec` stacks columns (column-major), so
/// `vec(A)` is not a view of `data()`; use `vec`/`unvec` explicitly.
class CMatrix {
 public:
  CMatrix() = default;
  CMatrix(std::size_t rows, std::size_t cols);
  CMatrix(std::size_t rows, std::size_t cols, std::vector<Complex> data);
  CMatrix(std::initializer_list<std::initializer_list<Complex>> rows);

  static CMatrix zeros(std::size_t rows, std::size_t cols);
  static CMatrix ones(std::size_t rows, std::size_t cols);
  static CMatrix identity(std::size_t n);
  static CMatrix scalar(Complex value);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  Complex& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const Complex& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  Complex& operator[](std::size_t i) { return data_[i]; }
  const Complex& operator[](std::size_t i) const { return data_[i]; }

  std::span<Complex> data() { return data_; }
  std::span<const Complex> data() const { return data_; }

  bool same_shape(const CMatrix& other) const { return rows_ == other.rows_ && cols_ == other.cols_; }
  std::string shape_string() const;

  /// Bitwise equality of shape and every component.
  friend bool operator==(const CMatrix& a, const CMatrix& b);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<Complex> data_;
};

CMatrix matmul(const CMatrix& a, const CMatrix& b);
/// a * b^H without materialising the transpose.
CMatrix matmul_bh(const CMatrix& a, const CMatrix& b);
/// a^H * b without materialising the transpose.
CMatrix matmul_ah(const CMatrix& a, const CMatrix& b);

CMatrix hadamard(const CMatrix& a, const CMatrix& b);
CMatrix add(const CMatrix& a, const CMatrix& b);
CMatrix sub(const CMatrix& a, const CMatrix& b);
CMatrix scale(const CMatrix& a, Complex s);
/// 1 - a, entrywise (the all-ones matrix minus a).
CMatrix one_minus(const CMatrix& a);
CMatrix conj_transpose(const CMatrix& a);
CMatrix conj(const CMatrix& a);

/// Sigmoid applied separately to the real and imaginary parts.
CMatrix split_sigmoid(const CMatrix& a);
/// tanh applied separately to the real and imaginary parts.
CMatrix split_tanh(const CMatrix& a);

double fro_norm_sq(const CMatrix& a);

/// In-place accumulate: dst += src.
void add_into(CMatrix& dst, const CMatrix& src);

struct SolveOptions {
  double jitter = 0.0;          ///< added to the diagonal before factorisation
  double max_condition = 1e12;  ///< reject systems whose condition number exceeds this
};

/// Solves a * x = b for Hermitian positive-definite `a` by Cholesky.
/// Throws NumericError when `a` is not Hermitian, not positive definite,
/// or has a condition number above `opts.max_condition`.
CMatrix solve_hermitian(const CMatrix& a, const CMatrix& b, const SolveOptions& opts = {});

/// Condition number of a Hermitian matrix (ratio of extreme eigenvalue magnitudes).
double hermitian_condition(const CMatrix& a);

/// log2 det of a Hermitian positive-definite matrix.
double log2_det_hermitian(const CMatrix& a);

/// Column-major stacking into an (rows*cols) x 1 column.
CMatrix vec(const CMatrix& a);
CMatrix unvec(const CMatrix& v, std::size_t rows, std::size_t cols);

/// Rows [offset, offset + count) of a.
CMatrix slice_rows(const CMatrix& a, std::size_t offset, std::size_t count);
/// Vertical concatenation; all parts must share a column count.
CMatrix stack_rows(std::span<const CMatrix> parts);

CMatrix operator+(const CMatrix& a, const CMatrix& b);
CMatrix operator-(const CMatrix& a, const CMatrix& b);
/// Matrix product.
CMatrix operator*(const CMatrix& a, const CMatrix& b);

bool all_finite(const CMatrix& a);

/// Counts complex multiplications performed by matmul, hadamard and scale on
/// the current thread while an instance is alive. Scopes nest; the innermost
/// counter receives the counts.
class MultiplyCounter {
 public:
  MultiplyCounter();
  ~MultiplyCounter();
  MultiplyCounter(const MultiplyCounter&) = delete;
  MultiplyCounter& operator=(const MultiplyCounter&) = delete;

  std::uint64_t count() const { return count_; }
  void reset() { count_ = 0; }

  static void record(std::uint64_t n);

 private:
  std::uint64_t count_ = 0;
  MultiplyCounter* previous_ = nullptr;
};

}  // namespace ctpred
