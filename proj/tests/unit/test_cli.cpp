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

#include <sstream>

#include "ctpred/binary_io.hpp"
#include "ctpred/cli.hpp"
#include "test_util.hpp"

using namespace ctpred;
using namespace ctpred::cli;

namespace {

std::string slurp(const std::filesystem::path& p) {
  const auto b = io::read_file(p);
  return std::string(b.begin(), b.end());
}

RunConfig tiny() {
  RunConfig c;
  apply_overrides(c, {"n_tx=8", "n_rf=2", "n_subcarriers=4", "history_frames=3", "feature_l=4", "feature_r=6",
                      "gru_hidden=6", "fc_width=8", "epochs=2", "batch_size=4"});
  return c;
}

}  // namespace

TEST_CASE("config text parsing") {
  const RunConfig c = parse_config(
      "# comment\n"
      "n_tx = 64   # trailing comment\n"
      "\n"
      "learning_rate=3e-3\n"
      "scheme = euler\n"
      "gradient_path = adjoint\n"
      "snr_db = inf\n"
      "seed = 9\n");
  CHECK(c.system.n_tx == 64);
  CHECK(c.train.learning_rate == 3e-3);
  CHECK(c.solver.scheme == Scheme::kEuler);
  CHECK(c.train.gradient_path == GradientPath::kAdjoint);
  CHECK(std::isinf(c.system.snr_db));
  CHECK(c.system.seed == 9);
  CHECK(c.train.seed == 9);

  CHECK_THROWS_WITH_AS(parse_config("bogus = 1\n"), doctest::Contains("bogus"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("n_tx = twelve\n"), doctest::Contains("n_tx"), ConfigError);
  CHECK_THROWS_AS(parse_config("n_tx = -3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("n_tx 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("head_init = ones\n"), ConfigError);
}

TEST_CASE("overrides win over the file and items round trip") {
  RunConfig c = parse_config("epochs = 10\nn_rx = 4\n");
  apply_overrides(c, {"epochs=3"});
  CHECK(c.train.epochs == 3);
  CHECK(c.system.n_rx == 4);

  std::string text;
  for (const auto& [k, v] : c.items()) text += k + " = " + v + "\n";
  const RunConfig back = parse_config(text);
  CHECK(back.items() == c.items());
  CHECK(back.system == c.system);
  CHECK_THROWS_AS(apply_overrides(c, {"epochs"}), ConfigError);
}

TEST_CASE("config difference ignores the seed") {
  SystemConfig a, b;
  b.seed = 42;
  CHECK_FALSE(first_config_difference(a, b).has_value());
  b.snr_db = 20.0;
  CHECK(first_config_difference(a, b) == std::optional<std::string>("snr_db"));
}

TEST_CASE("exit codes") {
  CHECK(exit_code_for(ConfigError("x")) == kValidation);
  CHECK(exit_code_for(ShapeError("x")) == kValidation);
  CHECK(exit_code_for(IoError("x")) == kIo);
  CHECK(exit_code_for(FormatError("x")) == kIo);
  CHECK(exit_code_for(NumericError("x")) == kNumeric);
}

TEST_CASE("generate, train and evaluate are byte-reproducible") {
  const auto dir = ctpred::testing::scratch_dir("cli_pipeline");
  const RunConfig cfg = tiny();
  std::ostringstream log;

  CHECK(cmd_generate(cfg, {dir / "a.bin", 6, DatasetMode::kTrain, {}}, log) == kOk);
  CHECK(cmd_generate(cfg, {dir / "b.bin", 6, DatasetMode::kTrain, {}}, log) == kOk);
  CHECK(slurp(dir / "a.bin") == slurp(dir / "b.bin"));
  CHECK(log.str().find("hash " + dataset_hash(load_dataset(dir / "a.bin"))) != std::string::npos);
  CHECK_THROWS_AS(cmd_generate(cfg, {dir / "z.bin", 0, DatasetMode::kTrain, {}}, log), ConfigError);

  CHECK(cmd_generate(cfg, {dir / "d.bin", 6, DatasetMode::kDiscrete, {}}, log) == kOk);
  CHECK(cmd_generate(cfg, {dir / "t.bin", 4, DatasetMode::kTest, 3}, log) == kOk);

  for (const char* run : {"1", "2"}) {
    const std::string r = run;
    CHECK(cmd_train(cfg, {dir / "a.bin", dir / ("tn" + r + ".ck"), "tnode", {}, {}}, log) == kOk);
    CHECK(cmd_train(cfg, {dir / "d.bin", dir / ("gru" + r + ".ck"), "gru", {}, {}}, log) == kOk);
    CHECK(cmd_train(cfg, {dir / "d.bin", dir / ("fc" + r + ".ck"), "fc", {}, {}}, log) == kOk);
    EvaluateArgs ev{dir / "t.bin", dir / ("tn" + r + ".ck"),
                    {"gru=" + (dir / ("gru" + r + ".ck")).string(), "fc=" + (dir / ("fc" + r + ".ck")).string(),
                     "outdated"},
                    dir / ("report" + r + ".csv")};
    CHECK(cmd_evaluate(cfg, ev, log) == kOk);
  }
  for (const char* f : {"tn", "gru", "fc"}) {
    CHECK(slurp(dir / (std::string(f) + "1.ck")) == slurp(dir / (std::string(f) + "2.ck")));
  }
  const std::string report = slurp(dir / "report1.csv");
  CHECK(report == slurp(dir / "report2.csv"));

  std::size_t rows = 0;
  std::istringstream in(report);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line[0] != '#' && line.rfind("method,", 0) != 0) ++rows;
  }
  CHECK(rows == 5 * cfg.system.future_frames * cfg.system.slots_per_frame);
  CHECK(slurp(dir / "tn1.ck.loss.csv").rfind("epoch,mean_train_nmse_db,wall_seconds\n", 0) == 0);
}

TEST_CASE("command error paths") {
  const auto dir = ctpred::testing::scratch_dir("cli_errors");
  RunConfig cfg = tiny();
  std::ostringstream log;
  cmd_generate(cfg, {dir / "tr.bin", 3, DatasetMode::kTrain, {}}, log);
  cmd_generate(cfg, {dir / "ts.bin", 3, DatasetMode::kTest, {}}, log);

  EvaluateArgs ev{dir / "ts.bin", {}, {"gru=" + (dir / "nope.ck").string()}, dir / "r.csv"};
  CHECK_THROWS_WITH_AS(cmd_evaluate(cfg, ev, log), doctest::Contains("gru"), IoError);
  ev.baselines = {"transformer"};
  CHECK_THROWS_AS(cmd_evaluate(cfg, ev, log), ConfigError);
  ev.baselines = {};
  ev.data = dir / "tr.bin";
  CHECK_THROWS_AS(cmd_evaluate(cfg, ev, log), ContractError);

  CHECK_THROWS_AS(cmd_train(cfg, {dir / "ts.bin", dir / "x.ck", "tnode", {}, {}}, log), ContractError);
  CHECK_THROWS_AS(cmd_train(cfg, {dir / "tr.bin", dir / "x.ck", "gru", {}, {}}, log), ConfigError);
  CHECK_THROWS_AS(cmd_train(cfg, {dir / "tr.bin", dir / "x.ck", "lstm", {}, {}}, log), ConfigError);

  RunConfig other = cfg;
  other.set("snr_db", "20");
  CHECK_THROWS_WITH_AS(cmd_train(other, {dir / "tr.bin", dir / "x.ck", "tnode", {}, {}}, log),
                       doctest::Contains("snr_db"), ConfigError);

  RunConfig zero = cfg;
  zero.set("n_subcarriers", "0");
  CHECK_THROWS_AS(cmd_flops(zero, log), ConfigError);
}

TEST_CASE("train resume through the command layer") {
  const auto dir = ctpred::testing::scratch_dir("cli_resume");
  RunConfig cfg = tiny();
  std::ostringstream log;
  cmd_generate(cfg, {dir / "tr.bin", 6, DatasetMode::kTrain, {}}, log);
  cfg.set("epochs", "4");
  cmd_train(cfg, {dir / "tr.bin", dir / "full.ck", "tnode", {}, {}}, log);
  cfg.set("epochs", "2");
  cmd_train(cfg, {dir / "tr.bin", dir / "half.ck", "tnode", {}, {}}, log);
  cfg.set("epochs", "4");
  cmd_train(cfg, {dir / "tr.bin", dir / "resumed.ck", "tnode", {}, dir / "half.ck"}, log);
  CHECK(slurp(dir / "full.ck") == slurp(dir / "resumed.ck"));
}

TEST_CASE("gradcheck and flops commands") {
  RunConfig cfg;
  std::ostringstream log;
  CHECK(cmd_gradcheck(cfg, {1e-5, 10}, log) == kOk);
  CHECK(log.str().find("PASS") != std::string::npos);
  std::ostringstream strict;
  CHECK(cmd_gradcheck(cfg, {1e-30, 4}, strict) == kNumeric);
  CHECK(strict.str().find("FAIL") != std::string::npos);
  std::ostringstream fl;
  CHECK(cmd_flops(cfg, fl) == kOk);
  CHECK(fl.str().find("field_evaluations 40") != std::string::npos);
}
