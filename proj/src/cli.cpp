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

#include "ctpred/cli.hpp"

#include <charconv>
#include <chrono>
#include <functional>
#include <iomanip>
#include <sstream>

#include "ctpred/baselines.hpp"
#include "ctpred/binary_io.hpp"
#include "ctpred/evalkit.hpp"
#include "ctpred/parallel.hpp"
#include "ctpred/rng.hpp"

namespace ctpred::cli {

namespace {

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
  throw ConfigError("invalid config field '" + key + "': cannot parse '" + value + "' as " + expected);
}

template <class Int>
Int parse_int(const std::string& key, const std::string& value) {
  Int out{};
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end) bad_value(key, value, "a non-negative integer");
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  double out = 0.0;
  const char* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc{} || ptr != end) bad_value(key, value, "a number");
  return out;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

struct Field {
  const char* name;
  std::function<std::string()> get;
  std::function<void(const std::string&)> set;
};

template <class Int>
Field int_field(const char* name, Int& ref) {
  return {name, [&ref] { return std::to_string(ref); }, [&ref, name](const std::string& v) { ref = parse_int<Int>(name, v); }};
}

Field double_field(const char* name, double& ref) {
  return {name, [&ref] { return format_double(ref); }, [&ref, name](const std::string& v) { ref = parse_double(name, v); }};
}

std::vector<Field> system_fields(SystemConfig& s) {
  return {int_field("n_tx", s.n_tx),
          int_field("n_rx", s.n_rx),
          int_field("n_rf", s.n_rf),
          int_field("n_subcarriers", s.n_subcarriers),
          int_field("slots_per_frame", s.slots_per_frame),
          int_field("history_frames", s.history_frames),
          int_field("future_frames", s.future_frames),
          int_field("label_samples", s.label_samples),
          int_field("n_paths", s.n_paths),
          int_field("feature_l", s.feature_l),
          int_field("feature_r", s.feature_r),
          int_field("pilot_symbols", s.pilot_symbols),
          double_field("carrier_hz", s.carrier_hz),
          double_field("bandwidth_hz", s.bandwidth_hz),
          double_field("snr_db", s.snr_db),
          double_field("frame_s", s.frame_s),
          double_field("slot_s", s.slot_s),
          double_field("velocity_min_kmh", s.velocity_min_kmh),
          double_field("velocity_max_kmh", s.velocity_max_kmh),
          double_field("delay_spread_min_ns", s.delay_spread_min_ns),
          double_field("delay_spread_max_ns", s.delay_spread_max_ns)};
}

std::vector<Field> all_fields(RunConfig& c) {
  std::vector<Field> f{{"seed", [&c] { return std::to_string(c.system.seed); },
                        [&c](const std::string& v) {
                          c.system.seed = parse_int<std::uint64_t>("seed", v);
                          c.train.seed = c.system.seed;
                        }}};
  for (Field& s : system_fields(c.system)) f.push_back(std::move(s));
  TrainConfig& t = c.train;
  f.push_back(int_field("epochs", t.epochs));
  f.push_back(int_field("batch_size", t.batch_size));
  f.push_back(double_field("learning_rate", t.learning_rate));
  f.push_back(double_field("adam_beta1", t.adam_beta1));
  f.push_back(double_field("adam_beta2", t.adam_beta2));
  f.push_back(double_field("adam_eps", t.adam_eps));
  f.push_back(int_field("patience", t.patience));
  f.push_back(double_field("min_improvement", t.min_improvement));
  f.push_back(int_field("checkpoint_every", t.checkpoint_every));
  f.push_back(int_field("threads", t.threads));
  f.push_back({"gradient_path", [&t] { return std::string(to_string(t.gradient_path)); },
               [&t](const std::string& v) { t.gradient_path = parse_gradient_path(v); }});
  f.push_back({"scheme", [&c] { return std::string(to_string(c.solver.scheme)); },
               [&c](const std::string& v) { c.solver.scheme = parse_scheme(v); }});
  f.push_back(double_field("step_frames", c.solver.step_frames));
  f.push_back(int_field("gru_hidden", c.gru_hidden));
  f.push_back(int_field("fc_width", c.fc_width));
  f.push_back({"head_init", [&c] { return std::string(c.head_init == HeadInit::kZero ? "zero" : "random"); },
               [&c](const std::string& v) {
                 if (v == "zero") {
                   c.head_init = HeadInit::kZero;
                 } else if (v == "random") {
                   c.head_init = HeadInit::kRandom;
                 } else {
                   bad_value("head_init", v, "zero or random");
                 }
               }});
  return f;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

void write_text(const std::filesystem::path& path, const std::string& s) {
  io::write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

void check_compatible(const RunConfig& cfg, const Dataset& data, const std::string& what) {
  if (auto key = first_config_difference(cfg.system, data.config)) {
    throw ConfigError("invalid config field '" + *key + "': " + what + " was generated with a different value");
  }
}

std::vector<std::string> prefixed(const std::vector<std::string>& names, const std::string& prefix) {
  std::vector<std::string> out;
  for (const std::string& n : names) out.push_back(prefix + n);
  return out;
}

bool is_test_grid(const Dataset& data) {
  const SystemConfig& c = data.config;
  for (const Sample& s : data.samples) {
    if (s.label_times.size() != c.test_slots()) return false;
    for (std::size_t i = 0; i < s.label_times.size(); ++i) {
      if (s.label_times[i] != static_cast<double>(i + 1) / c.slots_per_frame) return false;
    }
  }
  return true;
}

Checkpoint load_method_checkpoint(const std::string& method, const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw IoError("method '" + method + "': checkpoint not found: " + path.string());
  }
  return load_checkpoint(path);
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  for (Field& f : all_fields(*this)) {
    if (key == f.name) {
      f.set(value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void RunConfig::validate() const {
  system.validate();
  train.validate();
  solver.validate();
  if (gru_hidden == 0) throw ConfigError("invalid config field 'gru_hidden': must be at least 1");
  if (fc_width == 0) throw ConfigError("invalid config field 'fc_width': must be at least 1");
}

std::vector<std::pair<std::string, std::string>> RunConfig::items() const {
  RunConfig copy = *this;
  std::vector<std::pair<std::string, std::string>> out;
  for (const Field& f : all_fields(copy)) out.emplace_back(f.name, f.get());
  return out;
}

RunConfig parse_config(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string body = trim(line.substr(0, line.find('#')));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    base.set(trim(body.substr(0, eq)), trim(body.substr(eq + 1)));
  }
  return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  const auto bytes = io::read_file(path);
  return parse_config(std::string(bytes.begin(), bytes.end()), std::move(base));
}

void apply_overrides(RunConfig& cfg, const std::vector<std::string>& overrides) {
  for (const std::string& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + o + "' is not key=value");
    cfg.set(trim(o.substr(0, eq)), trim(o.substr(eq + 1)));
  }
}

std::optional<std::string> first_config_difference(const SystemConfig& a, const SystemConfig& b) {
  SystemConfig ca = a, cb = b;
  const auto fa = system_fields(ca);
  const auto fb = system_fields(cb);
  for (std::size_t i = 0; i < fa.size(); ++i) {
    if (fa[i].get() != fb[i].get()) return std::string(fa[i].name);
  }
  return std::nullopt;
}

int cmd_generate(const RunConfig& cfg, const GenerateArgs& args, std::ostream& out) {
  cfg.validate();
  if (args.samples == 0) throw ConfigError("invalid config field 'samples': must be at least 1");
  const std::uint64_t seed = args.seed.value_or(cfg.system.seed);
  const Dataset data = generate_dataset(cfg.system, args.samples, args.mode, seed, cfg.train.threads);
  save_dataset(data, args.out);
  out << "samples " << data.samples.size() << '\n'
      << "mode " << to_string(args.mode) << '\n'
      << "e_avg " << std::setprecision(10) << data.e_avg << '\n'
      << "hash " << dataset_hash(data) << '\n';
  return kOk;
}

int cmd_train(const RunConfig& cfg, const TrainArgs& args, std::ostream& out) {
  cfg.validate();
  const Dataset data = load_dataset(args.data);
  check_compatible(cfg, data, "training dataset");
  const SystemConfig& sc = cfg.system;

  std::vector<std::string> names;
  std::vector<CMatrix> init;
  std::function<TrainResult(const EpochHook&, std::optional<TrainState>)> run;
  if (args.model == "tnode") {
    for (const Sample& s : data.samples) {
      if (s.labels.size() != sc.label_samples) {
        throw ContractError("tnode training needs a train-mode dataset with " + std::to_string(sc.label_samples) +
                            " label times per sample");
      }
    }
    const ModelParams p = init_params(sc, cfg.train.seed, cfg.head_init);
    names = param_names(p);
    init = flatten_params(p);
    run = [&, p](const EpochHook& hook, std::optional<TrainState> resume) {
      return train_tnode(p, data, cfg.solver, cfg.train, hook, std::move(resume));
    };
  } else if (args.model == "gru") {
    const GruParams p = init_gru(sc, cfg.gru_hidden, cfg.train.seed);
    names = prefixed(param_names(p), kGruPrefix);
    init = flatten_params(p);
    run = [&, p](const EpochHook& hook, std::optional<TrainState> resume) {
      return train_gru(p, data, cfg.train, hook, std::move(resume));
    };
  } else if (args.model == "fc") {
    const FcParams p = init_fc(sc, cfg.fc_width, cfg.train.seed);
    names = prefixed(param_names(p), kFcPrefix);
    init = flatten_params(p);
    run = [&, p](const EpochHook& hook, std::optional<TrainState> resume) {
      return train_fc(p, data, cfg.train, hook, std::move(resume));
    };
  } else {
    throw ConfigError("invalid config field 'model': expected tnode, gru or fc, got '" + args.model + "'");
  }

  std::optional<TrainState> resume;
  if (args.resume) {
    const Checkpoint ck = load_checkpoint(*args.resume);
    if (auto key = first_config_difference(sc, ck.config)) {
      throw ConfigError("invalid config field '" + *key + "': resume checkpoint was written with a different value");
    }
    resume = train_state_from_checkpoint(ck, names, init);
  }

  const std::filesystem::path loss_path = args.loss_csv.value_or(args.out.string() + ".loss.csv");
  std::vector<EpochRecord> trace;
  const EpochHook hook = [&](const TrainState& st, const EpochRecord& rec) {
    trace.push_back(rec);
    if (cfg.train.checkpoint_every > 0 && st.epochs_done % cfg.train.checkpoint_every == 0) {
      save_checkpoint(make_checkpoint(sc, names, st), args.out);
      write_loss_csv(loss_path, trace);
    }
  };
  const TrainResult r = run(hook, std::move(resume));
  save_checkpoint(make_checkpoint(sc, names, r.state), args.out);
  write_loss_csv(loss_path, trace);
  out << "model " << args.model << '\n' << "epochs " << r.state.epochs_done << '\n';
  if (!trace.empty()) out << "final_train_nmse_db " << std::setprecision(6) << trace.back().mean_nmse_db << '\n';
  if (r.early_stopped) out << "early_stopped 1\n";
  return kOk;
}

int cmd_evaluate(const RunConfig& cfg, const EvaluateArgs& args, std::ostream& out) {
  cfg.validate();
  const Dataset data = load_dataset(args.data);
  check_compatible(cfg, data, "test dataset");
  if (!is_test_grid(data)) throw ContractError("evaluation needs a test-mode dataset (label times i/Q, i = 1..KQ)");
  const SystemConfig& sc = cfg.system;
  const std::string hash = dataset_hash(data);
  const std::size_t n = data.samples.size();
  const std::size_t threads = cfg.train.threads;

  std::vector<MethodPredictions> methods{perfect_csi(data)};
  std::vector<std::string> metadata{"ctpred evaluation report"};
  for (const auto& [k, v] : cfg.items()) metadata.push_back("config " + k + " = " + v);
  metadata.push_back("dataset_hash " + hash);
  metadata.push_back("dataset_samples " + std::to_string(n));

  auto add_method = [&](const std::string& name, const std::function<std::vector<CMatrix>(const Sample&)>& fn) {
    MethodPredictions m{name, hash, std::vector<std::vector<CMatrix>>(n)};
    parallel_for(n, threads, [&](std::size_t i) { m.preds[i] = fn(data.samples[i]); });
    methods.push_back(std::move(m));
  };
  auto note_checkpoint = [&](const std::string& name, const std::filesystem::path& path) {
    metadata.push_back("checkpoint " + name + " " + io::git_blob_sha1(io::read_file(path)));
  };

  if (args.model) {
    const Checkpoint ck = load_method_checkpoint("tnode", *args.model);
    const ModelParams p = params_from_checkpoint(ck, sc);
    note_checkpoint("tnode", *args.model);
    add_method("tnode", [&](const Sample& s) { return predict(p, s.inputs, s.label_times, cfg.solver); });
  }
  for (const std::string& spec : args.baselines) {
    const auto eq = spec.find('=');
    const std::string name = spec.substr(0, eq);
    if (name == "outdated") {
      add_method(name, [](const Sample& s) { return outdated_csi(s.inputs, s.labels.size()); });
      continue;
    }
    if (name != "gru" && name != "fc") {
      throw ConfigError("invalid config field 'baselines': unknown method '" + name + "'");
    }
    if (eq == std::string::npos) throw ConfigError("method '" + name + "' needs a checkpoint: " + name + "=<path>");
    const std::filesystem::path path = spec.substr(eq + 1);
    const Checkpoint ck = load_method_checkpoint(name, path);
    note_checkpoint(name, path);
    if (name == "gru") {
      const GruParams p = gru_from_checkpoint(ck);
      add_method(name, [&, p](const Sample& s) {
        return interpolate_slots(gru_discrete_predict(p, s.inputs, sc.future_frames), sc.slots_per_frame);
      });
    } else {
      const FcParams p = fc_from_checkpoint(ck);
      add_method(name, [&, p](const Sample& s) {
        return interpolate_slots(fc_discrete_predict(p, s.inputs, sc.future_frames), sc.slots_per_frame);
      });
    }
  }

  const std::vector<SlotReport> rows = evaluate_methods(methods, data, threads);
  write_report(args.out, rows, metadata);
  out << std::fixed << std::setprecision(3);
  for (const SlotReport& r : rows) {
    out << std::setw(9) << std::left << r.method << std::right << " slot " << std::setw(2) << r.slot_index
        << " nmse_db " << std::setw(9) << r.nmse_db << " rate " << std::setw(7) << r.rate_bps_hz << '\n';
  }
  return kOk;
}

int cmd_gradcheck(const RunConfig& cfg, const GradcheckArgs& args, std::ostream& out) {
  cfg.validate();
  if (!(args.tolerance > 0.0)) throw ConfigError("invalid config field 'tolerance': must be positive");
  const SystemConfig& sc = cfg.system;
  const Dataset data = generate_dataset(sc, 1, DatasetMode::kTrain, sc.seed);
  const Sample& s = data.samples.front();
  // Random head: a zero head would zero every other gradient.
  const ModelParams p = init_params(sc, sc.seed, HeadInit::kRandom);
  const std::vector<CMatrix> flat = flatten_params(p);
  const TapedObjective obj = [&](Tape& tape, std::span<const Var> leaves) {
    TnodeWeights<Var> w;
    std::size_t i = 0;
    w.visit([&](const char*, Var& v) { v = leaves[i++]; });
    std::vector<Var> in;
    for (const CMatrix& h : s.inputs) in.push_back(constant(tape, h));
    return nmse_loss(predict(w, in, s.label_times, cfg.solver), s.labels);
  };
  const auto start = std::chrono::steady_clock::now();
  const double err = finite_diff_check(obj, flat, args.probes, 1e-6, derive_seed(sc.seed, Stream::kProbe));
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const bool pass = err < args.tolerance;
  out << "max_relative_error " << std::scientific << std::setprecision(3) << err << '\n'
      << "tolerance " << args.tolerance << '\n'
      << "seconds " << std::fixed << std::setprecision(2) << secs << '\n'
      << (pass ? "PASS" : "FAIL") << '\n';
  return pass ? kOk : kNumeric;
}

int cmd_flops(const RunConfig& cfg, std::ostream& out) {
  cfg.validate();
  const FlopReport r = count_flops(cfg.system, cfg.solver);
  auto row = [&](const char* name, std::uint64_t counted, double formula) {
    out << std::left << std::setw(10) << name << std::right << std::setw(14) << counted << std::setw(16)
        << std::setprecision(0) << std::fixed << formula << std::setw(10) << std::setprecision(4)
        << static_cast<double>(counted) / formula << '\n';
  };
  out << std::left << std::setw(10) << "component" << std::right << std::setw(14) << "counted" << std::setw(16)
      << "formula" << std::setw(10) << "ratio" << '\n';
  row("encoder", r.encoder, r.encoder_full);
  row("decoder", r.decoder, r.decoder_formula);
  row("head", r.head, r.head_formula);
  out << "encoder_input_only_formula " << std::setprecision(0) << r.encoder_input << '\n'
      << "field_evaluations " << r.g << '\n';
  return kOk;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const IoError*>(&e) != nullptr) return kIo;
  if (dynamic_cast<const NumericError*>(&e) != nullptr) return kNumeric;
  return kValidation;
}

}  // namespace ctpred::cli
