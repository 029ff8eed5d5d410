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
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctpred/binary_io.hpp"
#include "ctpred/ctmath.hpp"
#include "ctpred/rng.hpp"

namespace ctpred {

inline constexpr double kSpeedOfLight = 2.99792458e8;  // m/s

/// Physical and model dimensions of one experiment. Defaults are the desk
/// scale used by the tests and the CLI; `full_scale()` gives the full-size setup.
struct SystemConfig {
  std::uint32_t n_tx = 32;           ///< base-station antennas N_T
  std::uint32_t n_rx = 2;            ///< user antennas N_R
  std::uint32_t n_rf = 4;            ///< RF chains N_RF
  std::uint32_t n_subcarriers = 16;  ///< M
  std::uint32_t slots_per_frame = 5;  ///< Q
  std::uint32_t history_frames = 10;  ///< J
  std::uint32_t future_frames = 2;    ///< K
  std::uint32_t label_samples = 5;    ///< P, training label times per sample
  std::uint32_t n_paths = 6;          ///< L
  std::uint32_t feature_l = 16;       ///< F_l
  std::uint32_t feature_r = 32;       ///< F_r
  std::uint32_t pilot_symbols = 0;    ///< N_q; 0 selects the identity pilot (N_q = N_R)
  std::uint64_t seed = 1;

  double carrier_hz = 28e9;
  double bandwidth_hz = 100e6;
  double snr_db = 10.0;
  double frame_s = 0.625e-3;  ///< T_f
  double slot_s = 0.125e-3;   ///< T_s
  double velocity_min_kmh = 30.0;
  double velocity_max_kmh = 60.0;
  double delay_spread_min_ns = 50.0;
  double delay_spread_max_ns = 200.0;

  static SystemConfig desk() { return {}; }
  static SystemConfig full_scale();

  /// Throws ConfigError naming the first invalid field.
  void validate() const;

  std::size_t effective_rows() const { return std::size_t{n_rf} * n_rx; }
  std::size_t pilot_length() const { return pilot_symbols == 0 ? n_rx : pilot_symbols; }
  std::size_t test_slots() const { return std::size_t{future_frames} * slots_per_frame; }

  friend bool operator==(const SystemConfig&, const SystemConfig&) = default;
};

struct Path {
  Complex gain;       ///< alpha_l
  double doppler_hz;  ///< v_l
  double delay_s;     ///< tau_l
  double aod_rad;     ///< base-station side angle
  double aoa_rad;     ///< user side angle
};

struct PathSet {
  std::vector<Path> paths;
  double speed_mps = 0.0;
  double delay_spread_s = 0.0;
};

struct Sample {
  std::vector<CMatrix> inputs;      ///< J noisy LS estimates, oldest (n = -J+1) first
  std::vector<double> label_times;  ///< frames, ascending, in (0, K]
  std::vector<CMatrix> labels;      ///< noise-free effective channels at label_times
  PathSet paths;                    ///< diagnostics only; not persisted
  CMatrix combiner;                 ///< diagnostics only; not persisted
};

/// Compares the persisted content (inputs, label times, labels).
bool operator==(const Sample& a, const Sample& b);

enum class DatasetMode {
  kTrain,     ///< P label times drawn uniformly from (0, K]
  kTest,      ///< the slot grid i/Q, i = 1..KQ
  kDiscrete,  ///< frame boundaries 1..K, for the discrete baselines
};

const char* to_string(DatasetMode mode);
DatasetMode parse_dataset_mode(const std::string& s);

struct Dataset {
  SystemConfig config;
  double e_avg = 0.0;  ///< mean per-entry noise-free pilot signal power
  std::vector<Sample> samples;

  double noise_variance() const;
  friend bool operator==(const Dataset& a, const Dataset& b) = default;
};

/// Unit-norm ULA response with half-wavelength spacing:
/// entry k = exp(-j pi sin(angle) k) / sqrt(n_ant).
CMatrix steering_vector(std::size_t n_ant, double angle_rad);

PathSet sample_paths(const SystemConfig& cfg, Rng& rng);

/// f_m = f + (B/2)(m - M/2) for 1-based m.
double subcarrier_frequency(const SystemConfig& cfg, std::size_t m);

/// N_T x N_R channel of subcarrier m (1-based) at absolute time t_s seconds.
CMatrix channel_at(const PathSet& paths, const SystemConfig& cfg, double t_s, std::size_t m);

/// Unitary N-point DFT matrix; column g is the codeword steering to sin(phi) = 2g/N.
CMatrix dft_codebook(std::size_t n);

/// N_RF x N_T analog combiner: conjugated DFT codewords with the largest
/// energy sum_m |w^H H_m(0)|^2, strongest first, ties to the lower index.
CMatrix select_combiner(const PathSet& paths, const SystemConfig& cfg);

/// Noise-free effective channel at t_frames stacked as (N_RF N_R) x M;
/// column m is vec(A H_m).
CMatrix effective_channel(const PathSet& paths, const CMatrix& combiner, const SystemConfig& cfg, double t_frames);

/// N_R x N_q pilot: the identity for N_q = N_R, otherwise the first N_R rows
/// of the N_q-point DFT matrix scaled to unit-modulus entries.
CMatrix pilot_matrix(const SystemConfig& cfg);

/// Least-squares estimate Y S^H (S S^H)^{-1}. Throws NumericError for a
/// rank-deficient pilot.
CMatrix ls_estimate(const CMatrix& y, const CMatrix& pilot);

/// sigma^2 = reference_power / 10^(snr_db / 10).
double noise_variance(double reference_power, double snr_db);

/// signal + CN(0, sigma^2) noise. The reference power defaults to the
/// signal's own mean per-entry power.
CMatrix add_noise(const CMatrix& signal, double snr_db, Rng& rng, std::optional<double> reference_power = {});

/// Label times of one sample for the given mode.
std::vector<double> label_times_for(const SystemConfig& cfg, DatasetMode mode, Rng& rng);

/// Each sample uses sub-seeds derive_seed(seed, stream, index) for its paths,
/// noise and label times, so serial and parallel generation agree and the
/// train/test/discrete modes with the same seed share paths and inputs.
Dataset generate_dataset(const SystemConfig& cfg, std::size_t n_samples, DatasetMode mode, std::uint64_t seed,
                         std::size_t threads = 1);

/// Fixed-width SystemConfig block shared by the dataset and checkpoint formats.
void write_config_block(io::ByteWriter& w, const SystemConfig& cfg);
SystemConfig read_config_block(io::ByteReader& r);

std::vector<std::uint8_t> serialize_dataset(const Dataset& ds);
Dataset deserialize_dataset(std::span<const std::uint8_t> bytes);
void save_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

/// Git blob SHA-1 of the serialized dataset.
std::string dataset_hash(const Dataset& ds);

}  // namespace ctpred
