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

#include "ctpred/loss.hpp"

#include <string>

namespace ctpred {
namespace {

void check_pairs(std::size_t n_preds, std::size_t n_labels) {
  if (n_preds != n_labels) {
    throw ShapeError("nmse_loss: " + std::to_string(n_preds) + " predictions for " + std::to_string(n_labels) +
                     " labels");
  }
  if (n_labels == 0) throw ShapeError("nmse_loss: no labels");
}

double label_energy(const CMatrix& label, std::size_t i) {
  const double e = fro_norm_sq(label);
  if (!(e > 0.0)) throw NumericError("nmse_loss: degenerate label " + std::to_string(i) + " has zero norm");
  return e;
}

}  // namespace

double nmse_loss(std::span<const CMatrix> preds, std::span<const CMatrix> labels) {
  check_pairs(preds.size(), labels.size());
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double e = label_energy(labels[i], i);
    total += fro_norm_sq(sub(preds[i], labels[i])) / e;
  }
  return total / static_cast<double>(labels.size());
}

Var nmse_loss(std::span<const Var> preds, std::span<const CMatrix> labels) {
  check_pairs(preds.size(), labels.size());
  Tape& tape = preds[0].tape();
  Var total;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double e = label_energy(labels[i], i);
    const Var term = scale(fro_norm_sq(preds[i] - constant(tape, labels[i])), 1.0 / e);
    total = i == 0 ? term : total + term;
  }
  return scale(total, 1.0 / static_cast<double>(labels.size()));
}

}  // namespace ctpred
