#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "sdoa/array_model.hpp"
#include "sdoa/numerics.hpp"

namespace sdoa {

/// Uniform angle grid in degrees.
class AngleGrid {
 public:
  /// `count` points from `start_deg` to `stop_deg` inclusive.
  AngleGrid(double start_deg, double stop_deg, int count);

  /// [-90, 90] with `count` points (361 -> 0.5 deg, 1801 -> 0.1 deg).
  static AngleGrid full(int count) { return AngleGrid(-90.0, 90.0, count); }

  int size() const { return static_cast<int>(angles_.size()); }
  double step() const { return step_; }
  double start() const { return angles_.front(); }
  double stop() const { return angles_.back(); }
  double operator[](int i) const { return angles_[static_cast<size_t>(i)]; }
  const std::vector<double>& angles() const { return angles_; }
  bool operator==(const AngleGrid& o) const { return angles_ == o.angles_; }

 private:
  std::vector<double> angles_;
  double step_ = 0.0;
};

struct Spectrum {
  AngleGrid grid;
  std::vector<double> values;

  int argmax() const;
  double max_value() const;
  /// Copy scaled so the largest value is 1 (unchanged if all zero).
  Spectrum normalized() const;
};

struct DoaEstimate {
  std::vector<double> doas_deg;
  std::vector<double> peak_values;
  /// Fewer than k local maxima were found; the remainder was padded
  /// from the largest remaining grid values.
  bool padded = false;
};

/// e^{j 2 pi d_n / lambda sin(theta)} for every position.
CVector steering_vector(double theta_deg, const RVector& positions, double wavelength = 1.0);

/// Steering vectors for every grid angle, stored as rows (grid x antennas).
class SteeringTable {
 public:
  SteeringTable(const AngleGrid& grid, const RVector& positions, double wavelength = 1.0);

  const AngleGrid& grid() const { return grid_; }
  int n_antennas() const { return static_cast<int>(table_.cols()); }
  /// Row w holds a(zeta_w)^T.
  const CMatrix& rows() const { return table_; }
  /// conj(rows()); row w times z gives a^H(zeta_w) z.
  const CMatrix& conj_rows() const { return conj_; }

 private:
  AngleGrid grid_;
  CMatrix table_;
  CMatrix conj_;
};

/// |a^H(zeta) z|^2 over the grid.
Spectrum eval_spectrum(const CVector& z, const AngleGrid& grid, const RVector& positions,
                       double wavelength = 1.0);
Spectrum eval_spectrum(const CVector& z, const SteeringTable& table);

/// Sum of Gaussian bumps exp(-(zeta - theta_k)^2 / sigma_g^2) with
/// sigma_g = sigma_bar / n_antennas degrees.
Spectrum reference_spectrum(const SourceSet& truth, double amplitude, double sigma_bar,
                            int n_antennas, const AngleGrid& grid);
/// Same, for a bare list of DOAs.
Spectrum reference_spectrum(const std::vector<double>& doas_deg, double amplitude,
                            double sigma_bar, int n_antennas, const AngleGrid& grid);

/// (1/Omega) * sum (ref - est)^2. Throws std::invalid_argument on grid mismatch.
double spectrum_loss(const Spectrum& ref, const Spectrum& est);

inline constexpr double kDefaultPeakSeparationDeg = 5.0;

/// Local maxima (a two-sample plateau counts once), refined by a parabola through the log-values of the
/// three samples around each, then the k largest that keep `min_separation_deg`
/// apart. Result sorted by angle.
DoaEstimate find_peaks(const Spectrum& spec, int k,
                       double min_separation_deg = kDefaultPeakSeparationDeg);

/// sqrt(sum of squared errors / (trials * K)); each trial pairs estimate and
/// truth after sorting both.
double rmse(const std::vector<DoaEstimate>& estimates, const std::vector<SourceSet>& truths);
double rmse(const std::vector<std::vector<double>>& estimates,
            const std::vector<std::vector<double>>& truths);

/// Two-column CSV (angle_deg,value), 12 significant digits.
void write_spectrum_csv(std::ostream& os, const Spectrum& spec);

}  // namespace sdoa
