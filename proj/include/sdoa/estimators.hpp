#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include "sdoa/array_model.hpp"
#include "sdoa/numerics.hpp"
#include "sdoa/spectrum.hpp"

namespace sdoa {

/// Matched-filter ("FFT") spectrum |a^H(zeta) r|^2.
Spectrum beamformer_spectrum(const CVector& r, const SteeringTable& table);

/// L x (N-L+1) Hankel matrix with entry (i, j) = r[i + j].
CMatrix hankel_lift(const CVector& r, int rows);

struct MusicConfig {
  int hankel_rows = 8;
  int n_sources = 3;

  /// Hankel rows default to N/2.
  static MusicConfig for_array(int n_antennas, int n_sources) {
    return {n_antennas / 2, n_sources};
  }
  void validate(int n_antennas) const;
};

struct EstimatorOutput {
  Spectrum spectrum;
  DoaEstimate estimate;
};

inline constexpr double kMusicCap = 1e12;

/// Single-snapshot MUSIC on the Hankel lift. The pseudospectrum
/// 1/||a_L^H(zeta) U_noise||^2 is capped at 1e12 and scaled to unit peak.
/// Steering vectors have length L on the nominal half-wavelength ULA.
EstimatorOutput music_single_snapshot(const CVector& r, const MusicConfig& cfg,
                                      const AngleGrid& grid, double spacing = 0.5);

struct OmpResult {
  DoaEstimate estimate;
  std::vector<int> atoms;     // grid indices, in selection order
  CVector coefficients;       // least-squares fit on the unit-norm atoms
  double residual_norm = 0.0;
};

/// Greedy OMP over the grid dictionary with unit-norm steering atoms.
OmpResult omp(const CVector& r, const SteeringTable& table, int k);

struct AnmConfig {
  /// Trace budget; if unset, 1.2 * ||r||_2.
  std::optional<double> beta;
  double rho = 1.0;
  int max_iters = 5000;
  double tol_primal = 1e-6;
  double tol_dual = 1e-6;

  void validate() const;
};

struct AnmResult {
  CVector h;
  CMatrix toeplitz_block;  // B
  double beta = 0.0;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
};

class AnmConvergenceError : public std::runtime_error {
 public:
  AnmConvergenceError(const std::string& what, AnmResult last)
      : std::runtime_error(what), last_(std::move(last)) {}
  const AnmResult& last_iterate() const { return last_; }

 private:
  AnmResult last_;
};

/// Solves
///   min ||r - h||^2  s.t.  [[B, h], [h^H, 1]] PSD, B Hermitian,
///                          Tr B = beta^2, sum_n B[n, n+l] = 0 for l != 0
/// by ADMM. Throws AnmConvergenceError after max_iters.
AnmResult anm_denoise(const CVector& r, const AnmConfig& cfg);

/// Lifted matrix [[B, h], [h^H, 1]].
CMatrix anm_lifted(const AnmResult& res);

/// |a^H(zeta) h|^2.
Spectrum anm_spectrum(const CVector& h, const SteeringTable& table);

}  // namespace sdoa
