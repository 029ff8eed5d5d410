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

#include <cstddef>
#include <exception>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "ctpred/channelsim.hpp"
#include "ctpred/tnode.hpp"
#include "ctpred/training.hpp"

namespace ctpred::cli {

/// Everything a command needs besides its paths. One seed drives the
/// dataset draw (unless overridden per command), initialization and
/// shuffling; sub-seeds come from derive_seed.
struct RunConfig {
  SystemConfig system;
  TrainConfig train;
  SolverSpec solver;
  std::size_t gru_hidden = 128;
  std::size_t fc_width = 512;
  HeadInit head_init = HeadInit::kZero;

  /// Sets one key; throws ConfigError for unknown keys or unparsable values.
  void set(const std::string& key, const std::string& value);
  /// Module invariants of every part.
  void validate() const;
  /// All keys with their current values, in a fixed order.
  std::vector<std::pair<std::string, std::string>> items() const;
};

/// Parses "key = value" lines; '#' starts a comment. Later lines win.
RunConfig parse_config(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});
/// Applies "key=value" overrides in order.
void apply_overrides(RunConfig& cfg, const std::vector<std::string>& overrides);

/// First SystemConfig key (seed excluded) whose value differs, if any.
std::optional<std::string> first_config_difference(const SystemConfig& a, const SystemConfig& b);

struct GenerateArgs {
  std::filesystem::path out;
  std::size_t samples = 200;
  DatasetMode mode = DatasetMode::kTrain;
  std::optional<std::uint64_t> seed;
};

struct TrainArgs {
  std::filesystem::path data;
  std::filesystem::path out;
  std::string model = "tnode";  ///< tnode | gru | fc
  std::optional<std::filesystem::path> loss_csv;  ///< default: <out>.loss.csv
  std::optional<std::filesystem::path> resume;
};

struct EvaluateArgs {
  std::filesystem::path data;
  std::optional<std::filesystem::path> model;  ///< TN-ODE checkpoint
  std::vector<std::string> baselines;          ///< "gru=<ckpt>", "fc=<ckpt>", "outdated"
  std::filesystem::path out;
};

struct GradcheckArgs {
  double tolerance = 1e-5;
  std::size_t probes = 10;
};

int cmd_generate(const RunConfig& cfg, const GenerateArgs& args, std::ostream& out);
int cmd_train(const RunConfig& cfg, const TrainArgs& args, std::ostream& out);
int cmd_evaluate(const RunConfig& cfg, const EvaluateArgs& args, std::ostream& out);
int cmd_gradcheck(const RunConfig& cfg, const GradcheckArgs& args, std::ostream& out);
int cmd_flops(const RunConfig& cfg, std::ostream& out);

/// 0 success, 1 validation, 2 I/O, 3 numeric failure.
enum ExitCode { kOk = 0, kValidation = 1, kIo = 2, kNumeric = 3 };
int exit_code_for(const std::exception& e);

}  // namespace ctpred::cli
