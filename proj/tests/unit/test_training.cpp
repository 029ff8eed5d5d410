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

#include <algorithm>
#include <cmath>
#include <limits>

#include "ctpred/training.hpp"
#include "ctpred/binary_io.hpp"
#include "test_util.hpp"

using namespace ctpred;
using ctpred::testing::rand_mat;

namespace {

SystemConfig small_config() {
  SystemConfig c = SystemConfig::desk();
  c.n_tx = 8;
  c.n_rf = 2;
  c.n_subcarriers = 4;
  c.history_frames = 3;
  c.feature_l = 4;
  c.feature_r = 6;
  return c;
}

TrainConfig quick(std::size_t epochs) {
  TrainConfig t;
  t.epochs = epochs;
  t.batch_size = 4;
  t.learning_rate = 1e-2;
  t.patience = 0;
  return t;
}

}  // namespace

TEST_CASE("train config validation names the field") {
  TrainConfig t;
  t.batch_size = 0;
  CHECK_THROWS_WITH_AS(t.validate(), doctest::Contains("batch_size"), ConfigError);
  t = TrainConfig{};
  t.adam_beta2 = 1.0;
  CHECK_THROWS_WITH_AS(t.validate(), doctest::Contains("adam_beta2"), ConfigError);
  t = TrainConfig{};
  t.threads = 0;
  CHECK_THROWS_AS(t.validate(), ConfigError);
  CHECK_NOTHROW(TrainConfig{}.validate());
}

TEST_CASE("adam with zero gradient leaves parameters and decays moments") {
  std::vector<CMatrix> p{rand_mat(3, 2, 1)};
  const std::vector<CMatrix> before = p;
  AdamState s = AdamState::zeros_like(p);
  s.m[0] = CMatrix::ones(3, 2);
  s.v[0] = CMatrix::ones(3, 2);
  s.step = 5;
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  adam_step(p, {CMatrix::zeros(3, 2)}, s, cfg);
  CHECK(p == before);
  CHECK(s.m[0][0].real() == doctest::Approx(0.9));
  CHECK(s.v[0][0].real() == doctest::Approx(0.999));
  CHECK(s.v[0][0].imag() == 0.0);
  CHECK(s.step == 6);
}

TEST_CASE("first adam step moves each component by about lr against its gradient sign") {
  std::vector<CMatrix> p{CMatrix::zeros(2, 2)};
  const CMatrix g{{{0.3, -2.0}, {-1e-3, 5.0}}, {{7.0, 0.0}, {-4.0, 1e-2}}};
  AdamState s = AdamState::zeros_like(p);
  TrainConfig cfg;
  adam_step(p, {g}, s, cfg);
  // m_hat = g, v_hat = g^2, so the step is lr * g / (|g| + eps).
  for (std::size_t i = 0; i < 4; ++i) {
    for (double part : {0, 1}) {
      const double gi = part == 0 ? g[i].real() : g[i].imag();
      const double xi = part == 0 ? p[0][i].real() : p[0][i].imag();
      CHECK(xi == doctest::Approx(-cfg.learning_rate * gi / (std::abs(gi) + cfg.adam_eps)).epsilon(1e-9));
    }
  }
}

TEST_CASE("adam is deterministic and rejects mismatched shapes") {
  std::vector<CMatrix> a{rand_mat(4, 3, 2)}, b = a;
  AdamState sa = AdamState::zeros_like(a), sb = sa;
  const CMatrix g = rand_mat(4, 3, 3);
  TrainConfig cfg;
  for (int i = 0; i < 3; ++i) {
    adam_step(a, {g}, sa, cfg);
    adam_step(b, {g}, sb, cfg);
  }
  CHECK(a == b);
  CHECK(sa == sb);
  CHECK_THROWS_AS(adam_step(a, {rand_mat(3, 4, 1)}, sa, cfg), ShapeError);
  CHECK_THROWS_AS(adam_step(a, {}, sa, cfg), ShapeError);
}

TEST_CASE("one adam step decreases a quadratic at small learning rate") {
  const CMatrix target = rand_mat(3, 3, 11);
  std::vector<CMatrix> p{rand_mat(3, 3, 12)};
  auto loss = [&] { return fro_norm_sq(p[0] - target); };
  AdamState s = AdamState::zeros_like(p);
  TrainConfig cfg;
  cfg.learning_rate = 1e-4;
  for (int i = 0; i < 5; ++i) {
    const double before = loss();
    // d/d(re,im) of |x - t|^2 is 2(x - t) in the real-pair convention.
    adam_step(p, {scale(p[0] - target, 2.0)}, s, cfg);
    CHECK(loss() < before);
  }
}

TEST_CASE("batched epoch gradient does not depend on order or batch split") {
  const std::vector<CMatrix> params{rand_mat(2, 3, 21)};
  std::vector<CMatrix> targets;
  for (int i = 0; i < 10; ++i) targets.push_back(rand_mat(2, 3, 100 + i));
  const SampleGradFn fn = [&](const std::vector<CMatrix>& p, std::size_t i, std::vector<CMatrix>& g) {
    g = {scale(p[0] - targets[i], 2.0)};
    return fro_norm_sq(p[0] - targets[i]);
  };
  std::vector<std::size_t> all(10);
  for (std::size_t i = 0; i < 10; ++i) all[i] = i;
  const BatchResult full = batch_gradient(params, all, fn, 1);

  const std::vector<std::size_t> order = epoch_order(10, 5, 3);
  CMatrix sum = CMatrix::zeros(2, 3);
  for (std::size_t b = 0; b < 10; b += 3) {
    const std::vector<std::size_t> batch(order.begin() + b, order.begin() + std::min<std::size_t>(10, b + 3));
    add_into(sum, scale(batch_gradient(params, batch, fn, 2).mean_grad[0], static_cast<double>(batch.size())));
  }
  CHECK(ctpred::testing::max_abs_diff(sum, scale(full.mean_grad[0], 10.0)) < 1e-12);

  std::vector<std::size_t> rev(all.rbegin(), all.rend());
  CHECK(ctpred::testing::max_abs_diff(batch_gradient(params, rev, fn, 3).mean_grad[0], full.mean_grad[0]) < 1e-12);
}

TEST_CASE("epoch order is a seeded permutation") {
  const auto a = epoch_order(50, 9, 0);
  CHECK(a == epoch_order(50, 9, 0));
  CHECK(a != epoch_order(50, 9, 1));
  CHECK(a != epoch_order(50, 10, 0));
  std::vector<bool> seen(50, false);
  for (std::size_t i : a) seen.at(i) = true;
  CHECK(std::count(seen.begin(), seen.end(), true) == 50);
}

TEST_CASE("fresh zero-head model starts at 0 dB") {
  const SystemConfig c = SystemConfig::desk();
  const Dataset data = generate_dataset(c, 20, DatasetMode::kTrain, 4);
  const SolverSpec spec = SolverSpec::for_config(c);
  double mean_db = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const ModelParams p = init_params(c, seed, HeadInit::kZero);
    double sum = 0.0;
    for (const Sample& s : data.samples) sum += nmse_loss(predict(p, s.inputs, s.label_times, spec), s.labels);
    mean_db += to_db(sum / 20.0) / 20.0;
  }
  CHECK(std::abs(mean_db) < 3.0);
}

TEST_CASE("training trace is reproducible and thread-count independent") {
  const SystemConfig c = small_config();
  const Dataset data = generate_dataset(c, 10, DatasetMode::kTrain, 3);
  const SolverSpec spec = SolverSpec::for_config(c);
  const ModelParams init = init_params(c, 2);
  TrainConfig t = quick(3);
  const TrainResult a = train_tnode(init, data, spec, t);
  const TrainResult b = train_tnode(init, data, spec, t);
  t.threads = 3;
  const TrainResult d = train_tnode(init, data, spec, t);
  REQUIRE(a.trace.size() == 3);
  for (std::size_t e = 0; e < 3; ++e) {
    CHECK(a.trace[e].mean_nmse == b.trace[e].mean_nmse);
    CHECK(a.trace[e].mean_nmse == d.trace[e].mean_nmse);
  }
  CHECK(a.state.params == b.state.params);
  CHECK(a.state.params == d.state.params);
  CHECK(a.trace.back().mean_nmse < a.trace.front().mean_nmse);
}

TEST_CASE("resume from a serialized checkpoint continues the same trajectory") {
  const SystemConfig c = small_config();
  const Dataset data = generate_dataset(c, 8, DatasetMode::kTrain, 5);
  const SolverSpec spec = SolverSpec::for_config(c);
  const ModelParams init = init_params(c, 6);
  const TrainResult straight = train_tnode(init, data, spec, quick(4));

  const TrainResult first = train_tnode(init, data, spec, quick(2));
  const auto names = param_names(init);
  const Checkpoint ck = deserialize_checkpoint(serialize_checkpoint(make_checkpoint(c, names, first.state)));
  TrainState st = train_state_from_checkpoint(ck, names, flatten_params(init));
  CHECK(st.epochs_done == 2);
  CHECK(st.adam.step == first.state.adam.step);
  const TrainResult second = train_tnode(init, data, spec, quick(4), {}, st);
  REQUIRE(second.trace.size() == 2);
  CHECK(second.trace[0].epoch == 2);
  CHECK(second.trace[0].mean_nmse == straight.trace[2].mean_nmse);
  CHECK(second.trace[1].mean_nmse == straight.trace[3].mean_nmse);
  CHECK(second.state.params == straight.state.params);
}

TEST_CASE("early stop triggers when the loss plateaus") {
  const std::vector<CMatrix> params{CMatrix::zeros(1, 1)};
  const SampleGradFn fn = [](const std::vector<CMatrix>& p, std::size_t, std::vector<CMatrix>& g) {
    g = {CMatrix::zeros(1, 1)};
    return 1.0 + std::abs(p[0][0]);
  };
  TrainConfig t;
  t.epochs = 100;
  t.patience = 5;
  const TrainResult r = train_loop({params, {}, 0}, 4, fn, t);
  CHECK(r.early_stopped);
  CHECK(r.trace.size() == 6);
}

TEST_CASE("memorizes a constant noiseless channel") {
  SystemConfig c = SystemConfig::desk();
  c.velocity_min_kmh = c.velocity_max_kmh = 0.0;
  c.snr_db = std::numeric_limits<double>::infinity();
  const Dataset data = generate_dataset(c, 1, DatasetMode::kTrain, 8);
  TrainConfig t = quick(500);
  t.batch_size = 1;
  t.patience = 0;
  const TrainResult r = train_tnode(init_params(c, 1, HeadInit::kZero), data, SolverSpec::for_config(c), t);
  double best = 1e9;
  for (const EpochRecord& e : r.trace) best = std::min(best, e.mean_nmse_db);
  CHECK(best < -20.0);
}

TEST_CASE("loss csv has the documented header") {
  const auto dir = ctpred::testing::scratch_dir("loss_csv");
  write_loss_csv(dir / "loss.csv", {{0, 0.5, to_db(0.5), 1.25}});
  const auto bytes = io::read_file(dir / "loss.csv");
  const std::string s(bytes.begin(), bytes.end());
  CHECK(s.rfind("epoch,mean_train_nmse_db,wall_seconds\n0,", 0) == 0);
}
