#pragma once

#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "sdoa/config.hpp"
#include "sdoa/estimators.hpp"
#include "sdoa/sdoanet.hpp"

namespace sdoa::bench {

class UnknownEstimator : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// sdoanet, fft, music, omp, anm.
const std::vector<std::string>& estimator_names();

/// Throws UnknownEstimator naming the valid choices.
void check_estimators(const std::vector<std::string>& names);
bool needs_model(const std::vector<std::string>& names);

struct EstimatorContext {
  const SteeringTable* table = nullptr;  // nominal array, evaluation grid
  int k = 3;
  double spacing = 0.5;
  const net::NetworkParams* model = nullptr;
  AnmConfig anm;
};

struct EstimatorRun {
  /// Unit-peak spectrum; OMP reports its selected atoms as sticks.
  Spectrum spectrum;
  DoaEstimate estimate;
  /// ANM hit its iteration cap and the last iterate was used.
  bool anm_fallback = false;
};

EstimatorRun run_estimator(const std::string& name, const CVector& r, const EstimatorContext& ctx);

struct ResultRow {
  std::string estimator;
  double value = 0.0;  // SNR in dB or imperfect factor
  double rmse_deg = 0.0;
  int n_trials = 0;
  double mean_runtime_ms = 0.0;
  double median_runtime_ms = 0.0;
  int anm_fallbacks = 0;
};

/// Header: estimator,<variable>,rmse_deg,n_trials,mean_runtime_ms,
///         median_runtime_ms,anm_fallbacks
void write_results_csv(std::ostream& os, const std::string& variable,
                       const std::vector<ResultRow>& rows);

/// Trial i at sweep point (snr, xi): all effects active with caps scaled by
/// xi, sources/imperfections/noise seeded from (cfg.seed, i). Trials are
/// therefore paired across estimators and sweep points.
Snapshot trial_snapshot(const ExperimentConfig& cfg, double snr_db, double xi, int trial);

/// RMSE per (estimator, SNR) at xi = cfg.eval_imperfect_factor.
std::vector<ResultRow> eval_snr(const ExperimentConfig& cfg, const net::NetworkParams* model,
                                bool single_thread);

/// RMSE per (estimator, xi) at SNR = cfg.xi_snr_db.
std::vector<ResultRow> eval_imperfect(const ExperimentConfig& cfg,
                                      const net::NetworkParams* model, bool single_thread);

struct OverlayEntry {
  std::string estimator;
  EstimatorRun run;
};

struct Overlay {
  Snapshot snapshot;
  std::vector<OverlayEntry> entries;
};

/// One snapshot from the [spectrum] scenario, every requested estimator's
/// unit-peak spectrum on the spectrum grid.
Overlay spectrum_overlay(const ExperimentConfig& cfg, const std::vector<std::string>& estimators,
                         const net::NetworkParams* model);

}  // namespace sdoa::bench
