#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdoa/array_model.hpp"
#include "sdoa/sdoanet.hpp"

namespace sdoa {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SweepRange {
  double start = 0.0;
  double stop = 30.0;
  double step = 10.0;

  /// start, start + step, ... up to stop inclusive (within 1e-9 * step).
  std::vector<double> values() const;
};

/// Everything a bench command needs. Loaded from an INI-style file:
///
///   [run]      seed, out_dir
///   [array]    n_antennas, spacing, wavelength
///   [caps]     max_pos_std, max_gain_std, max_phase_std, coupling_base,
///              nonlinear_strength, imperfect_factor
///   [sources]  k, min_separation_deg, doa_min_deg, doa_max_deg
///   [dataset]  n_samples, snr_min_db, snr_max_db, stages
///   [net]      n_filters, inner_dim, n_conv_layers, kernel_size,
///              batch_size, learning_rate, bn_epsilon, bn_momentum,
///              output_init_scale
///   [train]    epochs, samples_per_epoch, sigma_bar, grid_points,
///              fixed_dataset
///   [eval]     estimators, n_trials, grid_points, snr_start, snr_stop,
///              snr_step, imperfect_factor, xi_values, xi_snr_db
///   [spectrum] doas_deg, snr_db, imperfect_factor, grid_points
///
/// Every key is optional; missing keys keep the defaults below.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::filesystem::path out_dir = "out";

  ArrayConfig array = ArrayConfig::ula(16);
  ImperfectionCaps caps;
  DoaPolicy doa;

  std::int64_t n_samples = 1000;
  double snr_min_db = 0.0;
  double snr_max_db = 30.0;
  std::vector<CurriculumStage> stages{CurriculumStage::AllEffects};

  net::NetConfig net;
  int epochs = 14;
  std::int64_t samples_per_epoch = 5000;
  double sigma_bar = 100.0;
  int train_grid_points = 361;
  bool fixed_dataset = false;

  std::vector<std::string> estimators{"sdoanet", "fft", "music", "omp", "anm"};
  int n_trials = 100;
  int eval_grid_points = 1801;
  SweepRange snr_sweep;
  /// Imperfect factor used by the SNR sweep.
  double eval_imperfect_factor = 1.0;
  std::vector<double> xi_values{0.0, 0.5, 1.0};
  double xi_snr_db = 20.0;

  std::vector<double> spectrum_doas_deg{-30.0, 10.0, 20.0};
  double spectrum_snr_db = 20.0;
  double spectrum_imperfect_factor = 0.0;
  int spectrum_grid_points = 1801;

  /// Throws ConfigError on any violated invariant.
  void validate() const;

  /// Dataset description for `cmd_simulate`.
  DatasetSpec dataset_spec() const;
  /// Training description for `cmd_train`.
  net::TrainConfig train_config() const;
};

ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& text);

/// Splits "a, b,c" into trimmed nonempty tokens.
std::vector<std::string> split_list(const std::string& text);
std::vector<double> parse_double_list(const std::string& text);

}  // namespace sdoa
