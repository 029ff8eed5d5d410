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

#include "ctpred/channelsim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "ctpred/parallel.hpp"

namespace ctpred {
namespace {

constexpr char kDatasetMagic[] = "CTCP";
constexpr std::uint32_t kDatasetVersion = 1;

[[noreturn]] void bad_field(const char* field, const std::string& why) {
  throw ConfigError(std::string("invalid config field '") + field + "': " + why);
}

void require_positive(const char* field, std::uint64_t v) {
  if (v == 0) bad_field(field, "must be positive");
}

void require_positive(const char* field, double v) {
  if (!(v > 0.0) || !std::isfinite(v)) bad_field(field, "must be a positive finite number");
}

void require_range(const char* lo_name, double lo, const char* hi_name, double hi) {
  if (!(lo >= 0.0) || !std::isfinite(lo)) bad_field(lo_name, "must be a non-negative finite number");
  if (!(hi >= lo) || !std::isfinite(hi)) bad_field(hi_name, std::string("must be finite and not below ") + lo_name);
}

Complex expj(double phase) { return {std::cos(phase), std::sin(phase)}; }

CMatrix column_of(const CMatrix& a, std::size_t c) {
  CMatrix out(a.rows(), 1);
  for (std::size_t r = 0; r < a.rows(); ++r) out[r] = a(r, c);
  return out;
}

}  // namespace

SystemConfig SystemConfig::full_scale() {
  SystemConfig c;
  c.n_tx = 128;
  c.n_rx = 4;
  c.n_rf = 4;
  c.n_subcarriers = 256;
  c.feature_l = 64;
  c.feature_r = 128;
  return c;
}

void SystemConfig::validate() const {
  require_positive("n_tx", std::uint64_t{n_tx});
  require_positive("n_rx", std::uint64_t{n_rx});
  require_positive("n_rf", std::uint64_t{n_rf});
  require_positive("n_subcarriers", std::uint64_t{n_subcarriers});
  require_positive("slots_per_frame", std::uint64_t{slots_per_frame});
  require_positive("history_frames", std::uint64_t{history_frames});
  require_positive("future_frames", std::uint64_t{future_frames});
  require_positive("label_samples", std::uint64_t{label_samples});
  require_positive("n_paths", std::uint64_t{n_paths});
  require_positive("feature_l", std::uint64_t{feature_l});
  require_positive("feature_r", std::uint64_t{feature_r});
  if (n_rf > n_tx) {
    bad_field("n_rf", "must not exceed n_tx (" + std::to_string(n_rf) + " > " + std::to_string(n_tx) + ")");
  }
  if (pilot_symbols != 0 && pilot_symbols < n_rx) bad_field("pilot_symbols", "must be 0 or at least n_rx");
  require_positive("carrier_hz", carrier_hz);
  require_positive("bandwidth_hz", bandwidth_hz);
  require_positive("frame_s", frame_s);
  require_positive("slot_s", slot_s);
  if (std::isnan(snr_db) || snr_db == -std::numeric_limits<double>::infinity()) {
    bad_field("snr_db", "must be a number or +inf");
  }
  if (std::abs(frame_s - slots_per_frame * slot_s) > 1e-12 * frame_s) {
    bad_field("frame_s", "must equal slots_per_frame * slot_s");
  }
  require_range("velocity_min_kmh", velocity_min_kmh, "velocity_max_kmh", velocity_max_kmh);
  require_range("delay_spread_min_ns", delay_spread_min_ns, "delay_spread_max_ns", delay_spread_max_ns);
}

bool operator==(const Sample& a, const Sample& b) {
  return a.inputs == b.inputs && a.label_times == b.label_times && a.labels == b.labels;
}

const char* to_string(DatasetMode mode) {
  switch (mode) {
    case DatasetMode::kTrain: return "train";
    case DatasetMode::kTest: return "test";
    case DatasetMode::kDiscrete: return "discrete";
  }
  return "unknown";
}

DatasetMode parse_dataset_mode(const std::string& s) {
  if (s == "train") return DatasetMode::kTrain;
  if (s == "test") return DatasetMode::kTest;
  if (s == "discrete") return DatasetMode::kDiscrete;
  throw ConfigError("invalid mode '" + s + "': expected train, test or discrete");
}

double Dataset::noise_variance() const { return ctpred::noise_variance(e_avg, config.snr_db); }

CMatrix steering_vector(std::size_t n_ant, double angle_rad) {
  if (n_ant == 0) throw ContractError("steering_vector: n_ant must be at least 1");
  CMatrix a(n_ant, 1);
  const double norm = 1.0 / std::sqrt(static_cast<double>(n_ant));
  const double s = std::sin(angle_rad);
  for (std::size_t k = 0; k < n_ant; ++k) a[k] = norm * expj(-std::numbers::pi * s * static_cast<double>(k));
  return a;
}

PathSet sample_paths(const SystemConfig& cfg, Rng& rng) {
  PathSet ps;
  ps.speed_mps = rng.uniform(cfg.velocity_min_kmh, cfg.velocity_max_kmh) / 3.6;
  ps.delay_spread_s = rng.uniform(cfg.delay_spread_min_ns, cfg.delay_spread_max_ns) * 1e-9;
  const double max_doppler = cfg.carrier_hz * ps.speed_mps / kSpeedOfLight;
  const double half_pi = std::numbers::pi / 2.0;
  ps.paths.reserve(cfg.n_paths);
  for (std::uint32_t l = 0; l < cfg.n_paths; ++l) {
    Path p{};
    const double psi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    p.doppler_hz = max_doppler * std::cos(psi);
    p.delay_s = rng.uniform(0.0, ps.delay_spread_s);
    p.aod_rad = -half_pi + std::numbers::pi * rng.uniform_open();
    p.aoa_rad = -half_pi + std::numbers::pi * rng.uniform_open();
    p.gain = rng.cnormal(1.0 / cfg.n_paths);
    ps.paths.push_back(p);
  }
  return ps;
}

double subcarrier_frequency(const SystemConfig& cfg, std::size_t m) {
  return cfg.carrier_hz +
         (cfg.bandwidth_hz / 2.0) * (static_cast<double>(m) - static_cast<double>(cfg.n_subcarriers) / 2.0);
}

CMatrix channel_at(const PathSet& paths, const SystemConfig& cfg, double t_s, std::size_t m) {
  if (m < 1 || m > cfg.n_subcarriers) {
    throw ContractError("channel_at: subcarrier " + std::to_string(m) + " outside 1.." +
                        std::to_string(cfg.n_subcarriers));
  }
  const double fm = subcarrier_frequency(cfg, m);
  CMatrix h = CMatrix::zeros(cfg.n_tx, cfg.n_rx);
  for (const Path& p : paths.paths) {
    const Complex c = p.gain * expj(-2.0 * std::numbers::pi * (p.doppler_hz * t_s + fm * p.delay_s));
    const CMatrix at = steering_vector(cfg.n_tx, p.aod_rad);
    const CMatrix ar = steering_vector(cfg.n_rx, p.aoa_rad);
    for (std::size_t i = 0; i < cfg.n_tx; ++i) {
      for (std::size_t j = 0; j < cfg.n_rx; ++j) h(i, j) += c * at[i] * std::conj(ar[j]);
    }
  }
  return h;
}

CMatrix dft_codebook(std::size_t n) {
  CMatrix f(n, n);
  const double norm = 1.0 / std::sqrt(static_cast<double>(n));
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t g = 0; g < n; ++g) {
      // Reduce k*g modulo n first so the phase stays exact for large arrays.
      const double frac = static_cast<double>((k * g) % n) / static_cast<double>(n);
      f(k, g) = norm * expj(-2.0 * std::numbers::pi * frac);
    }
  }
  return f;
}

CMatrix select_combiner(const PathSet& paths, const SystemConfig& cfg) {
  const std::size_t n = cfg.n_tx;
  const CMatrix book = dft_codebook(n);
  std::vector<double> energy(n, 0.0);
  for (std::size_t m = 1; m <= cfg.n_subcarriers; ++m) {
    const CMatrix proj = matmul_ah(book, channel_at(paths, cfg, 0.0, m));  // row g = w_g^H H_m(0)
    for (std::size_t g = 0; g < n; ++g) {
      for (std::size_t j = 0; j < proj.cols(); ++j) energy[g] += std::norm(proj(g, j));
    }
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return energy[a] > energy[b]; });

  CMatrix a(cfg.n_rf, n);
  for (std::size_t i = 0; i < cfg.n_rf; ++i) {
    for (std::size_t k = 0; k < n; ++k) a(i, k) = std::conj(book(k, order[i]));
  }
  return a;
}

CMatrix effective_channel(const PathSet& paths, const CMatrix& combiner, const SystemConfig& cfg, double t_frames) {
  const std::size_t nrf = cfg.n_rf;
  const std::size_t nr = cfg.n_rx;
  if (combiner.rows() != nrf || combiner.cols() != cfg.n_tx) {
    throw ShapeError("effective_channel: combiner " + combiner.shape_string() + " does not match N_RF x N_T");
  }
  const double t_s = t_frames * cfg.frame_s;
  CMatrix out = CMatrix::zeros(nrf * nr, cfg.n_subcarriers);
  for (const Path& p : paths.paths) {
    const CMatrix beam = matmul(combiner, steering_vector(cfg.n_tx, p.aod_rad));
    const CMatrix ar = steering_vector(nr, p.aoa_rad);
    for (std::size_t m = 1; m <= cfg.n_subcarriers; ++m) {
      const double fm = subcarrier_frequency(cfg, m);
      const Complex c = p.gain * expj(-2.0 * std::numbers::pi * (p.doppler_hz * t_s + fm * p.delay_s));
      for (std::size_t j = 0; j < nr; ++j) {
        const Complex cj = c * std::conj(ar[j]);
        for (std::size_t r = 0; r < nrf; ++r) out(r + nrf * j, m - 1) += cj * beam[r];
      }
    }
  }
  return out;
}

CMatrix pilot_matrix(const SystemConfig& cfg) {
  const std::size_t nq = cfg.pilot_length();
  if (nq == cfg.n_rx) return CMatrix::identity(cfg.n_rx);
  CMatrix s(cfg.n_rx, nq);
  for (std::size_t r = 0; r < cfg.n_rx; ++r) {
    for (std::size_t q = 0; q < nq; ++q) {
      s(r, q) = expj(-2.0 * std::numbers::pi * static_cast<double>((r * q) % nq) / static_cast<double>(nq));
    }
  }
  return s;
}

CMatrix ls_estimate(const CMatrix& y, const CMatrix& pilot) {
  if (y.cols() != pilot.cols()) {
    throw ShapeError("ls_estimate: received " + y.shape_string() + " and pilot " + pilot.shape_string() +
                     " disagree on the symbol count");
  }
  if (pilot.cols() < pilot.rows()) {
    throw NumericError("ls_estimate: pilot " + pilot.shape_string() + " has fewer symbols than antennas");
  }
  const CMatrix gram = matmul_bh(pilot, pilot);
  CMatrix x;
  try {
    x = solve_hermitian(gram, matmul_bh(pilot, y));
  } catch (const NumericError& e) {
    throw NumericError(std::string("ls_estimate: rank-deficient pilot (") + e.what() + ")");
  }
  return conj_transpose(x);
}

double noise_variance(double reference_power, double snr_db) { return reference_power / std::pow(10.0, snr_db / 10.0); }

CMatrix add_noise(const CMatrix& signal, double snr_db, Rng& rng, std::optional<double> reference_power) {
  const double ref = reference_power.value_or(fro_norm_sq(signal) / static_cast<double>(signal.size()));
  const double var = noise_variance(ref, snr_db);
  CMatrix out = signal;
  for (auto& z : out.data()) z += rng.cnormal(var);
  return out;
}

std::vector<double> label_times_for(const SystemConfig& cfg, DatasetMode mode, Rng& rng) {
  std::vector<double> times;
  switch (mode) {
    case DatasetMode::kTrain:
      times.reserve(cfg.label_samples);
      for (std::uint32_t i = 0; i < cfg.label_samples; ++i) {
        times.push_back(cfg.future_frames * (1.0 - rng.uniform()));  // (0, K]
      }
      std::sort(times.begin(), times.end());
      break;
    case DatasetMode::kTest:
      for (std::size_t i = 1; i <= cfg.test_slots(); ++i) {
        times.push_back(static_cast<double>(i) / cfg.slots_per_frame);
      }
      break;
    case DatasetMode::kDiscrete:
      for (std::uint32_t k = 1; k <= cfg.future_frames; ++k) times.push_back(static_cast<double>(k));
      break;
  }
  return times;
}

Dataset generate_dataset(const SystemConfig& cfg, std::size_t n_samples, DatasetMode mode, std::uint64_t seed,
                         std::size_t threads) {
  cfg.validate();
  if (n_samples == 0) throw ConfigError("invalid config field 'samples': must be at least 1");

  Dataset ds;
  ds.config = cfg;
  ds.samples.resize(n_samples);
  const std::size_t j_frames = cfg.history_frames;
  const CMatrix pilot = pilot_matrix(cfg);
  std::vector<std::vector<CMatrix>> clean(n_samples);
  std::vector<double> energy(n_samples, 0.0);

  parallel_for(n_samples, threads, [&](std::size_t i) {
    Sample& s = ds.samples[i];
    Rng path_rng(derive_seed(seed, Stream::kPaths, i));
    Rng label_rng(derive_seed(seed, Stream::kLabelTimes, i));
    s.paths = sample_paths(cfg, path_rng);
    s.combiner = select_combiner(s.paths, cfg);
    clean[i].reserve(j_frames);
    for (std::size_t j = 0; j < j_frames; ++j) {
      const double t = static_cast<double>(j) - static_cast<double>(j_frames - 1);  // n = -J+1 .. 0
      clean[i].push_back(effective_channel(s.paths, s.combiner, cfg, t));
      for (std::size_t m = 0; m < cfg.n_subcarriers; ++m) {
        const CMatrix h = unvec(column_of(clean[i].back(), m), cfg.n_rf, cfg.n_rx);
        energy[i] += fro_norm_sq(matmul(h, pilot));
      }
    }
    s.label_times = label_times_for(cfg, mode, label_rng);
    s.labels.reserve(s.label_times.size());
    for (double t : s.label_times) s.labels.push_back(effective_channel(s.paths, s.combiner, cfg, t));
  });

  const double entries = static_cast<double>(n_samples) * static_cast<double>(j_frames) * cfg.n_subcarriers *
                         cfg.n_rf * static_cast<double>(pilot.cols());
  ds.e_avg = std::accumulate(energy.begin(), energy.end(), 0.0) / entries;
  const double sigma2 = ds.noise_variance();

  parallel_for(n_samples, threads, [&](std::size_t i) {
    Rng noise_rng(derive_seed(seed, Stream::kNoise, i));
    Sample& s = ds.samples[i];
    s.inputs.reserve(j_frames);
    for (std::size_t j = 0; j < j_frames; ++j) {
      CMatrix est(cfg.effective_rows(), cfg.n_subcarriers);
      for (std::size_t m = 0; m < cfg.n_subcarriers; ++m) {
        const CMatrix h = unvec(column_of(clean[i][j], m), cfg.n_rf, cfg.n_rx);
        CMatrix y = matmul(h, pilot);
        for (auto& z : y.data()) z += noise_rng.cnormal(sigma2);
        const CMatrix col = vec(ls_estimate(y, pilot));
        for (std::size_t r = 0; r < col.rows(); ++r) est(r, m) = col[r];
      }
      s.inputs.push_back(std::move(est));
    }
  });
  return ds;
}

void write_config_block(io::ByteWriter& w, const SystemConfig& c) {
  for (std::uint32_t v : {c.n_tx, c.n_rx, c.n_rf, c.n_subcarriers, c.slots_per_frame, c.history_frames,
                          c.future_frames, c.label_samples, c.n_paths, c.feature_l, c.feature_r, c.pilot_symbols}) {
    w.u32(v);
  }
  w.u64(c.seed);
  for (double v : {c.carrier_hz, c.bandwidth_hz, c.snr_db, c.frame_s, c.slot_s, c.velocity_min_kmh,
                   c.velocity_max_kmh, c.delay_spread_min_ns, c.delay_spread_max_ns}) {
    w.f64(v);
  }
}

SystemConfig read_config_block(io::ByteReader& r) {
  SystemConfig c;
  for (std::uint32_t* v : {&c.n_tx, &c.n_rx, &c.n_rf, &c.n_subcarriers, &c.slots_per_frame, &c.history_frames,
                           &c.future_frames, &c.label_samples, &c.n_paths, &c.feature_l, &c.feature_r,
                           &c.pilot_symbols}) {
    *v = r.u32();
  }
  c.seed = r.u64();
  for (double* v : {&c.carrier_hz, &c.bandwidth_hz, &c.snr_db, &c.frame_s, &c.slot_s, &c.velocity_min_kmh,
                    &c.velocity_max_kmh, &c.delay_spread_min_ns, &c.delay_spread_max_ns}) {
    *v = r.f64();
  }
  try {
    c.validate();
  } catch (const ConfigError& e) {
    r.fail(std::string("bad config block (") + e.what() + ")");
  }
  return c;
}

std::vector<std::uint8_t> serialize_dataset(const Dataset& ds) {
  io::ByteWriter w;
  w.bytes(std::string_view(kDatasetMagic, 4));
  w.u32(kDatasetVersion);
  write_config_block(w, ds.config);
  w.f64(ds.e_avg);
  w.u64(ds.samples.size());
  for (const Sample& s : ds.samples) {
    for (const CMatrix& m : s.inputs) w.matrix(m);
    w.u32(static_cast<std::uint32_t>(s.label_times.size()));
    for (double t : s.label_times) w.f64(t);
    for (const CMatrix& m : s.labels) w.matrix(m);
  }
  return w.take();
}

Dataset deserialize_dataset(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes, "dataset file");
  if (r.bytes(4) != std::string_view(kDatasetMagic, 4)) r.fail("bad magic (expected CTCP)");
  const std::uint32_t version = r.u32();
  if (version != kDatasetVersion) r.fail("unsupported version " + std::to_string(version));
  Dataset ds;
  ds.config = read_config_block(r);
  ds.e_avg = r.f64();
  const std::uint64_t count = r.u64();
  const std::size_t rows = ds.config.effective_rows();
  const std::size_t cols = ds.config.n_subcarriers;
  // Every sample needs at least J matrix headers; reject absurd counts before allocating.
  if (count > r.remaining() / 8) r.fail("sample count " + std::to_string(count) + " exceeds payload");
  ds.samples.resize(count);
  for (Sample& s : ds.samples) {
    for (std::size_t j = 0; j < ds.config.history_frames; ++j) s.inputs.push_back(r.matrix(rows, cols, "input"));
    const std::uint32_t n_labels = r.u32();
    if (n_labels > r.remaining() / 8) r.fail("label count exceeds payload");
    s.label_times.resize(n_labels);
    for (double& t : s.label_times) t = r.f64();
    if (!std::is_sorted(s.label_times.begin(), s.label_times.end())) r.fail("label times not ascending");
    for (std::uint32_t k = 0; k < n_labels; ++k) s.labels.push_back(r.matrix(rows, cols, "label"));
  }
  r.expect_end();
  return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path) { io::write_file(path, serialize_dataset(ds)); }

Dataset load_dataset(const std::filesystem::path& path) { return deserialize_dataset(io::read_file(path)); }

std::string dataset_hash(const Dataset& ds) { return io::git_blob_sha1(serialize_dataset(ds)); }

}  // namespace ctpred
