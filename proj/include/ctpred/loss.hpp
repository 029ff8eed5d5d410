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

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "ctpred/autodiff.hpp"
#include "ctpred/ctmath.hpp"

namespace ctpred {

/// Mean normalised squared error (1/P) sum_i |pred_i - label_i|^2 / |label_i|^2.
/// Throws NumericError for a zero-norm label and ShapeError on mismatched
/// lengths or shapes.
double nmse_loss(std::span<const CMatrix> preds, std::span<const CMatrix> labels);

/// Taped form; labels enter as constants.
Var nmse_loss(std::span<const Var> preds, std::span<const CMatrix> labels);

inline double to_db(double linear, double floor_db = -200.0) {
  if (!(linear > 0.0)) return floor_db;
  const double db = 10.0 * std::log10(linear);
  return db < floor_db ? floor_db : db;
}

}  // namespace ctpred
