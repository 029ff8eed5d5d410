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

#include <cmath>
#include <numbers>

#include "ctpred/ctmath.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace ctpred;
using ctpred::testing::rand_mat;
using ctpred::testing::rel_fro;

namespace {

CMatrix naive_product(const CMatrix& a, const CMatrix& b) {
  CMatrix c = CMatrix::zeros(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j)
      for (std::size_t k = 0; k < a.cols(); ++k) c(i, j) += a(i, k) * b(k, j);
  return c;
}

CMatrix dft(std::size_t n) {
  CMatrix q(n, n);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t g = 0; g < n; ++g)
      q(k, g) = std::polar(1.0 / std::sqrt(double(n)), -2.0 * std::numbers::pi * double(k * g) / double(n));
  return q;
}

}  // namespace

TEST_CASE("construction rejects inconsistent storage") {
  CHECK_THROWS_AS(CMatrix(0, 3), ShapeError);
  CHECK_THROWS_AS(CMatrix(2, 2, std::vector<Complex>(3)), ShapeError);
  CMatrix m{{1.0, 2.0}, {3.0, 4.0}};
  CHECK(m.rows() == 2);
  CHECK(m(1, 0) == Complex(3.0));
}

TEST_CASE("matmul") {
  const CMatrix x = rand_mat(3, 3, 1);
  CHECK(matmul(CMatrix::identity(3), x) == x);
  CHECK(matmul(CMatrix{{Complex(0, 1)}}, CMatrix{{Complex(0, 1)}}) == CMatrix{{-1.0}});

  const CMatrix a = rand_mat(4, 5, 2);
  const CMatrix b = rand_mat(5, 3, 3);
  const CMatrix c = matmul(a, b);
  CHECK(c.rows() == 4);
  CHECK(c.cols() == 3);
  CHECK(testing::max_abs_diff(c, naive_product(a, b)) < 1e-12);

  CHECK(testing::max_abs_diff(matmul_bh(a, rand_mat(3, 5, 4)), naive_product(a, conj_transpose(rand_mat(3, 5, 4)))) <
        1e-12);
  CHECK(testing::max_abs_diff(matmul_ah(b, rand_mat(5, 2, 5)), naive_product(conj_transpose(b), rand_mat(5, 2, 5))) <
        1e-12);
}

TEST_CASE("matmul shape error names both shapes") {
  try {
    matmul(CMatrix(2, 3), CMatrix(2, 3));
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("2x3") != std::string::npos);
  }
}

TEST_CASE("hadamard and entrywise ops") {
  const CMatrix a = rand_mat(3, 4, 7);
  CHECK(hadamard(a, CMatrix::ones(3, 4)) == a);
  CHECK(hadamard(a, CMatrix::zeros(3, 4)) == CMatrix::zeros(3, 4));
  CHECK(hadamard(CMatrix{{Complex(1, 1)}}, CMatrix{{Complex(1, -1)}}) == CMatrix{{2.0}});
  CHECK_THROWS_AS(hadamard(a, CMatrix(4, 3)), ShapeError);

  CHECK(add(a, CMatrix::zeros(3, 4)) == a);
  CHECK(sub(a, a) == CMatrix::zeros(3, 4));
  CHECK(scale(CMatrix::identity(2), 2.0) == CMatrix{{2.0, 0.0}, {0.0, 2.0}});
  CHECK_THROWS_AS(add(a, CMatrix(3, 3)), ShapeError);
  CHECK_THROWS_AS(sub(a, CMatrix(3, 3)), ShapeError);
  CHECK(one_minus(CMatrix{{Complex(0.25, 0.5)}}) == CMatrix{{Complex(0.75, -0.5)}});
}

TEST_CASE("conj_transpose") {
  const CMatrix a = rand_mat(3, 5, 8);
  CHECK(conj_transpose(conj_transpose(a)) == a);
  CHECK(conj_transpose(CMatrix{{Complex(0, 1)}}) == CMatrix{{Complex(0, -1)}});
  const CMatrix q = dft(8);
  CHECK(testing::max_abs_diff(matmul(conj_transpose(q), q), CMatrix::identity(8)) < 1e-12);
}

TEST_CASE("split activations") {
  const CMatrix s = split_sigmoid(CMatrix{{Complex(0, 0), Complex(1, 2), Complex(800, -800)}});
  CHECK(s[0] == Complex(0.5, 0.5));
  CHECK(s[1].real() == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(1e-14));
  CHECK(s[1].imag() == doctest::Approx(1.0 / (1.0 + std::exp(-2.0))).epsilon(1e-14));
  CHECK(s[1].real() == doctest::Approx(0.73106).epsilon(1e-5));
  CHECK(s[1].imag() == doctest::Approx(0.88080).epsilon(1e-5));
  CHECK(s[2].real() == 1.0);
  CHECK(s[2].imag() == 0.0);
  CHECK(std::isfinite(s[2].imag()));

  const CMatrix a = rand_mat(3, 3, 9, 4.0);
  CHECK(split_tanh(CMatrix::zeros(2, 2)) == CMatrix::zeros(2, 2));
  CHECK(split_tanh(scale(a, -1.0)) == scale(split_tanh(a), -1.0));
  CHECK(split_tanh(CMatrix{{1.0}})[0].real() == doctest::Approx(0.76159).epsilon(1e-5));
  CHECK(split_tanh(CMatrix{{1.0}})[0].imag() == 0.0);
}

TEST_CASE("split activations commute with entry permutation") {
  const CMatrix a = rand_mat(4, 4, 10, 3.0);
  const CMatrix t = conj_transpose(a);
  // Conjugate transpose permutes entries and negates imaginary parts; undo
  // the conjugation to get a pure permutation.
  CHECK(split_sigmoid(conj(t)) == conj(conj_transpose(split_sigmoid(a))));
  CHECK(split_tanh(unvec(vec(a), 2, 8)) == unvec(vec(split_tanh(a)), 2, 8));
}

TEST_CASE("fro_norm_sq") {
  CHECK(fro_norm_sq(CMatrix::zeros(3, 3)) == 0.0);
  CHECK(fro_norm_sq(CMatrix::identity(3)) == 3.0);
  CHECK(fro_norm_sq(CMatrix{{Complex(3, 4)}}) == 25.0);
  const CMatrix a = rand_mat(3, 5, 11);
  CHECK(fro_norm_sq(a) == doctest::Approx(fro_norm_sq(vec(a))).epsilon(1e-15));
}

TEST_CASE("solve_hermitian") {
  const CMatrix b = rand_mat(6, 2, 12);
  CHECK(testing::max_abs_diff(solve_hermitian(CMatrix::identity(6), b), b) < 1e-15);
  CHECK(testing::max_abs_diff(solve_hermitian(scale(CMatrix::identity(6), 2.0), b), scale(b, 0.5)) < 1e-15);

  const CMatrix g = rand_mat(6, 6, 13);
  const CMatrix spd = add(matmul_bh(g, g), CMatrix::identity(6));
  const CMatrix x = solve_hermitian(spd, b);
  CHECK(rel_fro(matmul(spd, x), b) < 1e-9);

  CHECK_THROWS_AS(solve_hermitian(CMatrix::zeros(3, 3), CMatrix::ones(3, 1)), NumericError);
  CHECK_THROWS_AS(solve_hermitian(rand_mat(3, 3, 14), CMatrix::ones(3, 1)), NumericError);
  CHECK_THROWS_AS(solve_hermitian(CMatrix(2, 3), CMatrix::ones(2, 1)), ShapeError);

  SolveOptions tight;
  tight.max_condition = 10.0;
  CHECK_THROWS_AS(solve_hermitian(CMatrix{{1.0, 0.0}, {0.0, 1e-3}}, CMatrix::ones(2, 1), tight), NumericError);
  SolveOptions jitter;
  jitter.jitter = 1.0;
  CHECK(solve_hermitian(CMatrix::zeros(2, 2), CMatrix::ones(2, 1), jitter) == CMatrix::ones(2, 1));
}

TEST_CASE("solve_hermitian residual bound up to condition 1e6") {
  const CMatrix q = dft(6);
  for (double cond : {1e2, 1e4, 1e6}) {
    CMatrix d = CMatrix::zeros(6, 6);
    for (std::size_t i = 0; i < 6; ++i) d(i, i) = std::pow(cond, -double(i) / 5.0);
    const CMatrix a = matmul_bh(matmul(q, d), q);
    CHECK(hermitian_condition(a) == doctest::Approx(cond).epsilon(1e-6));
    const CMatrix b = rand_mat(6, 1, 15);
    CHECK(rel_fro(matmul(a, solve_hermitian(a, b)), b) < 1e-9);
  }
}

TEST_CASE("log2_det_hermitian") {
  CHECK(log2_det_hermitian(scale(CMatrix::identity(3), 2.0)) == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(log2_det_hermitian(CMatrix{{4.0, 0.0}, {0.0, 0.5}}) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("vec and unvec") {
  CHECK(vec(CMatrix{{Complex(2, 1)}}) == CMatrix{{Complex(2, 1)}});
  const CMatrix a = rand_mat(3, 4, 16);
  CHECK(unvec(vec(a), 3, 4) == a);
  const CMatrix v = vec(CMatrix{{1.0, 3.0}, {2.0, 4.0}});
  CHECK(v == CMatrix{{1.0}, {2.0}, {3.0}, {4.0}});
  CHECK_THROWS_AS(unvec(v, 3, 2), ShapeError);
}

TEST_CASE("algebraic properties on random draws") {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const CMatrix a = rand_mat(3, 4, 100 + s);
    const CMatrix b = rand_mat(4, 5, 200 + s);
    const CMatrix c = rand_mat(5, 2, 300 + s);
    CHECK(rel_fro(matmul(matmul(a, b), c), matmul(a, matmul(b, c))) < 1e-10);
    CHECK(testing::max_abs_diff(conj_transpose(matmul(a, b)), matmul(conj_transpose(b), conj_transpose(a))) < 1e-12);
  }
}

TEST_CASE("multiply counter") {
  const CMatrix a = rand_mat(3, 4, 1);
  const CMatrix b = rand_mat(4, 5, 2);
  MultiplyCounter outer;
  matmul(a, b);
  CHECK(outer.count() == 60);
  {
    MultiplyCounter inner;
    hadamard(a, a);
    scale(a, 2.0);
    CHECK(inner.count() == 24);
  }
  CHECK(outer.count() == 60);
  matmul_bh(a, a);
  CHECK(outer.count() == 60 + 36);
}

TEST_CASE("all_finite") {
  CHECK(all_finite(CMatrix::ones(2, 2)));
  CMatrix m = CMatrix::ones(2, 2);
  m(1, 1) = Complex(0, std::nan(""));
  CHECK_FALSE(all_finite(m));
}
