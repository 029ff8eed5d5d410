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

#include <CLI11.hpp>

#include <iostream>

#include "ctpred/cli.hpp"

using namespace ctpred;

int main(int argc, char** argv) {
  CLI::App app{"Continuous-time mmWave channel prediction"};
  app.require_subcommand(1);

  std::optional<std::string> config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  app.add_option("-c,--config", config_path, "key = value config file");
  app.add_option("-s,--set", overrides, "override, key=value (repeatable; wins over the file)");
  app.add_option("--seed", seed, "master seed");
  app.add_option("--threads", threads, "worker threads; 1 is bit-exact reproducible");

  cli::GenerateArgs gen;
  std::string gen_mode = "train";
  auto* g = app.add_subcommand("generate", "simulate a dataset");
  g->add_option("--out", gen.out, "dataset file")->required();
  g->add_option("--samples", gen.samples, "number of samples");
  g->add_option("--mode", gen_mode, "train | test | discrete");
  std::optional<std::uint64_t> gen_seed;
  g->add_option("--data-seed", gen_seed, "dataset seed (default: --seed)");

  cli::TrainArgs tr;
  std::string grad;
  std::optional<std::string> loss_csv, resume;
  auto* t = app.add_subcommand("train", "train a model");
  t->add_option("--data", tr.data, "training dataset")->required();
  t->add_option("--out", tr.out, "checkpoint file")->required();
  t->add_option("--model", tr.model, "tnode | gru | fc");
  t->add_option("--grad", grad, "tape | adjoint");
  t->add_option("--loss-csv", loss_csv, "loss trace (default <out>.loss.csv)");
  t->add_option("--resume", resume, "checkpoint to resume from");

  cli::EvaluateArgs ev;
  std::optional<std::string> model;
  auto* e = app.add_subcommand("evaluate", "per-slot NMSE and rate report");
  e->add_option("--data", ev.data, "test dataset")->required();
  e->add_option("--model", model, "TN-ODE checkpoint");
  e->add_option("--baselines", ev.baselines, "gru=<ckpt>, fc=<ckpt>, outdated")->delimiter(',');
  e->add_option("--out", ev.out, "report CSV")->required();

  cli::GradcheckArgs gc;
  auto* gck = app.add_subcommand("gradcheck", "finite-difference check of the full model gradient");
  gck->add_option("--tolerance", gc.tolerance, "maximum relative error");
  gck->add_option("--probes", gc.probes, "number of probed components");

  auto* fl = app.add_subcommand("flops", "counted vs formula multiplication table");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : cli::kValidation;
  }

  try {
    cli::RunConfig cfg;
    if (config_path) cfg = cli::load_config(*config_path);
    if (seed) overrides.push_back("seed=" + std::to_string(*seed));
    if (threads) overrides.push_back("threads=" + std::to_string(*threads));
    if (!grad.empty()) overrides.push_back("gradient_path=" + grad);
    cli::apply_overrides(cfg, overrides);

    if (*g) {
      gen.mode = parse_dataset_mode(gen_mode);
      gen.seed = gen_seed;
      return cli::cmd_generate(cfg, gen, std::cout);
    }
    if (*t) {
      if (loss_csv) tr.loss_csv = *loss_csv;
      if (resume) tr.resume = *resume;
      return cli::cmd_train(cfg, tr, std::cout);
    }
    if (*e) {
      if (model) ev.model = *model;
      return cli::cmd_evaluate(cfg, ev, std::cout);
    }
    if (*gck) return cli::cmd_gradcheck(cfg, gc, std::cout);
    if (*fl) return cli::cmd_flops(cfg, std::cout);
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << '\n';
    return cli::exit_code_for(ex);
  }
  return cli::kOk;
}
