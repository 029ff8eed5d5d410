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

#include <doctest.h>

#include <cmath>
#include <limits>

#include "ctpred/baselines.hpp"
#include "ctpred/evalkit.hpp"
#include "test_util.hpp"

using namespace ctpred;
using ctpred::testing::max_abs_diff;
using ctpred::testing::rand_mat;

namespace {

SystemConfig small_config() {
  SystemConfig c = SystemConfig::desk();
  c.n_tx = 8;
  c.n_rf = 2;
  c.n_subcarriers = 4;
  c.history_frames = 3;
  return c;
}

template <template <class> class W>
double weights_fd(const W<CMatrix>& p, const Sample& s, std::size_t probes,
                  std::vector<Var> (*fwd)(const W<Var>&, const std::vector<Var>&, std::size_t)) {
  const std::vector<CMatrix> flat = flatten_params(p);
  const TapedObjective obj = [&](Tape& tape, std::span<const Var> leaves) {
    W<Var> w;
    std::size_t i = 0;
    w.visit([&](const char*, Var& v) { v = leaves[i++]; });
    std::vector<Var> in;
    for (const CMatrix& h : s.inputs) in.push_back(constant(tape, h));
    return nmse_loss(fwd(w, in, s.labels.size()), s.labels);
  };
  return finite_diff_check(obj, flat, probes, 1e-6, 3);
}

}  // namespace

TEST_CASE("interpolation endpoints and midpoint") {
  DiscretePrediction dp{{rand_mat(4, 3, 1), rand_mat(4, 3, 2), rand_mat(4, 3, 3)}};
  CHECK(interpolate(dp, 0, 0, 5) == dp.boundaries[0]);
  CHECK(interpolate(dp, 0, 5, 5) == dp.boundaries[1]);
  CHECK(interpolate(dp, 1, 5, 5) == dp.boundaries[2]);
  CHECK(max_abs_diff(interpolate(dp, 1, 2, 4), scale(dp.boundaries[1] + dp.boundaries[2], 0.5)) < 1e-15);
  CHECK_THROWS_AS(interpolate(dp, 2, 0, 5), ContractError);
  CHECK_THROWS_AS(interpolate(dp, 0, 6, 5), ContractError);

  const auto slots = interpolate_slots(dp, 5);
  REQUIRE(slots.size() == 10);
  CHECK(slots[4] == dp.boundaries[1]);
  CHECK(slots[9] == dp.boundaries[2]);
}

TEST_CASE("interpolation is exact on channels affine in time") {
  const SystemConfig c = SystemConfig::desk();
  const CMatrix a = rand_mat(c.effective_rows(), c.n_subcarriers, 4);
  const CMatrix b = rand_mat(c.effective_rows(), c.n_subcarriers, 5);
  auto h = [&](double t) { return a + scale(b, t); };
  DiscretePrediction dp;
  for (std::size_t k = 0; k <= c.future_frames; ++k) dp.boundaries.push_back(h(static_cast<double>(k)));
  const auto slots = interpolate_slots(dp, c.slots_per_frame);
  for (std::size_t i = 1; i <= slots.size(); ++i) {
    const CMatrix truth = h(static_cast<double>(i) / c.slots_per_frame);
    CHECK(max_abs_diff(slots[i - 1], truth) < 1e-12);
  }
}

TEST_CASE("outdated CSI repeats the last input") {
  const std::vector<CMatrix> in{rand_mat(2, 2, 1), rand_mat(2, 2, 2)};
  const auto out = outdated_csi(in, 7);
  REQUIRE(out.size() == 7);
  for (const CMatrix& m : out) CHECK(m == in.back());
}

TEST_CASE("outdated CSI on a static channel stays at the estimation noise floor") {
  SystemConfig c = SystemConfig::desk();
  c.velocity_min_kmh = c.velocity_max_kmh = 0.0;
  const Dataset data = generate_dataset(c, 200, DatasetMode::kTest, 9);
  std::vector<std::vector<CMatrix>> preds;
  for (const Sample& s : data.samples) preds.push_back(outdated_csi(s.inputs, s.labels.size()));
  const auto nmse = nmse_per_slot(preds, labels_of(data));
  for (double v : nmse) {
    CHECK(v == doctest::Approx(-10.0).epsilon(0.1));
    CHECK(std::abs(v - nmse.front()) < 1e-9);
  }
}

TEST_CASE("gru basics") {
  const SystemConfig c = small_config();
  const GruParams zero = [&] {
    GruParams p = init_gru(c, 8, 1);
    p.visit([](const char*, CMatrix& m) { m = CMatrix::zeros(m.rows(), m.cols()); });
    return p;
  }();
  const Dataset data = generate_dataset(c, 1, DatasetMode::kDiscrete, 2);
  for (const CMatrix& m : gru_rollout(zero, data.samples[0].inputs, 2)) {
    CHECK(fro_norm_sq(m) == 0.0);
  }

  GruParams p = init_gru(c, 8, 1);
  CHECK(fro_norm_sq(p.w_h) == 0.0);
  p.w_h = rand_mat(p.w_h.rows(), p.w_h.cols(), 4, 0.1);
  const auto& in = data.samples[0].inputs;
  const auto one = gru_rollout(p, in, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0] == unvec(p.w_h * gru_encode(p, in), in[0].rows(), in[0].cols()));

  const DiscretePrediction dp = gru_discrete_predict(p, in, 2);
  REQUIRE(dp.boundaries.size() == 3);
  CHECK(dp.boundaries[0] == in.back());
  CHECK(interpolate(dp, 1, 0, 5) == dp.boundaries[1]);
}

TEST_CASE("gru and fc gradients match finite differences") {
  const SystemConfig c = small_config();
  const Dataset data = generate_dataset(c, 1, DatasetMode::kDiscrete, 3);
  GruParams g = init_gru(c, 6, 2);
  g.w_h = rand_mat(g.w_h.rows(), g.w_h.cols(), 5, 0.2);
  CHECK(weights_fd<GruWeights>(g, data.samples[0], 12, gru_rollout<Var>) < 1e-5);

  FcParams f = init_fc(c, 10, 2);
  f.w3 = rand_mat(f.w3.rows(), f.w3.cols(), 6, 0.2);
  CHECK(weights_fd<FcWeights>(f, data.samples[0], 12, fc_forward<Var>) < 1e-5);
}

TEST_CASE("fc output shape and zero parameters") {
  const SystemConfig c = small_config();
  const Dataset data = generate_dataset(c, 1, DatasetMode::kDiscrete, 4);
  FcParams p = init_fc(c, 16, 1);
  CHECK(p.w1.cols() == c.history_frames * c.effective_rows() * c.n_subcarriers);
  CHECK(p.w3.rows() == c.future_frames * c.effective_rows() * c.n_subcarriers);
  const auto out = fc_forward(p, data.samples[0].inputs, c.future_frames);
  REQUIRE(out.size() == c.future_frames);
  for (const CMatrix& m : out) {
    CHECK(m.rows() == c.effective_rows());
    CHECK(m.cols() == c.n_subcarriers);
    CHECK(fro_norm_sq(m) == 0.0);
  }
  CHECK_THROWS_AS(fc_forward(p, data.samples[0].inputs, 3), ShapeError);
}

TEST_CASE("fc memorizes one desk-scale sample") {
  const SystemConfig c = SystemConfig::desk();
  const Dataset data = generate_dataset(c, 1, DatasetMode::kDiscrete, 5);
  TrainConfig t;
  t.epochs = 300;
  t.batch_size = 1;
  t.patience = 0;
  const TrainResult r = train_fc(init_fc(c, 512, 1), data, t);
  CHECK(r.trace.back().mean_nmse_db < -30.0);
}

TEST_CASE("teacher forcing is no worse than the rollout for a trained gru") {
  // Slow users, so the trained predictor is informative.
  SystemConfig c = small_config();
  c.velocity_min_kmh = 3.0;
  c.velocity_max_kmh = 6.0;
  const Dataset train = generate_dataset(c, 64, DatasetMode::kDiscrete, 6);
  const Dataset test = generate_dataset(c, 64, DatasetMode::kDiscrete, 7);
  TrainConfig t;
  t.epochs = 30;
  t.batch_size = 8;
  t.learning_rate = 3e-3;
  t.patience = 0;
  const TrainResult r = train_gru(init_gru(c, 16, 1), train, t);
  GruParams p;
  unflatten_params(r.state.params, p);
  double free_run = 0.0, forced = 0.0;
  for (const Sample& s : test.samples) {
    free_run += nmse_loss(gru_rollout(p, s.inputs, 2), s.labels);
    forced += nmse_loss(gru_teacher_forced(p, s.inputs, s.labels), s.labels);
  }
  CHECK(forced <= free_run);
}

TEST_CASE("baseline training rejects non-discrete datasets") {
  const SystemConfig c = small_config();
  const Dataset data = generate_dataset(c, 2, DatasetMode::kTrain, 8);
  CHECK_THROWS_AS(train_gru(init_gru(c, 4, 1), data, TrainConfig{}), ConfigError);
  CHECK_THROWS_AS(train_fc(init_fc(c, 4, 1), data, TrainConfig{}), ConfigError);
}

TEST_CASE("baseline checkpoints round trip under their prefixes") {
  const SystemConfig c = small_config();
  const GruParams g = init_gru(c, 5, 3);
  const FcParams f = init_fc(c, 7, 3);
  std::vector<std::string> gn, fn;
  for (const auto& n : param_names(g)) gn.push_back(kGruPrefix + n);
  for (const auto& n : param_names(f)) fn.push_back(kFcPrefix + n);
  const Checkpoint gc = deserialize_checkpoint(serialize_checkpoint(make_checkpoint(c, gn, {flatten_params(g), {}, 0})));
  const Checkpoint fc = deserialize_checkpoint(serialize_checkpoint(make_checkpoint(c, fn, {flatten_params(f), {}, 0})));
  CHECK(gru_from_checkpoint(gc) == g);
  CHECK(fc_from_checkpoint(fc) == f);
  CHECK_THROWS_AS(gru_from_checkpoint(fc), FormatError);
}
