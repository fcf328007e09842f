#include "sdoa/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace sdoa {

AngleGrid::AngleGrid(double start_deg, double stop_deg, int count) {
  if (count < 2) throw std::invalid_argument("angle grid needs at least 2 points");
  if (!(stop_deg > start_deg) || start_deg < -90.0 || stop_deg > 90.0)
    throw std::invalid_argument("angle grid must be increasing and inside [-90, 90]");
  const double span = stop_deg - start_deg;
  angles_.resize(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) angles_[static_cast<size_t>(i)] = start_deg + span * i / (count - 1);
  angles_.back() = stop_deg;
  step_ = span / (count - 1);
}

int Spectrum::argmax() const {
  return static_cast<int>(std::max_element(values.begin(), values.end()) - values.begin());
}

double Spectrum::max_value() const { return *std::max_element(values.begin(), values.end()); }

Spectrum Spectrum::normalized() const {
  Spectrum out = *this;
  const double peak = max_value();
  if (peak > 0.0)
    for (double& v : out.values) v /= peak;
  return out;
}

CVector steering_vector(double theta_deg, const RVector& positions, double wavelength) {
  const double s = std::sin(theta_deg * std::numbers::pi / 180.0);
  CVector a(positions.size());
  for (Eigen::Index n = 0; n < positions.size(); ++n)
    a(n) = std::polar(1.0, 2.0 * std::numbers::pi * positions(n) / wavelength * s);
  return a;
}

SteeringTable::SteeringTable(const AngleGrid& grid, const RVector& positions, double wavelength)
    : grid_(grid), table_(grid.size(), positions.size()) {
  for (int w = 0; w < grid.size(); ++w)
    table_.row(w) = steering_vector(grid[w], positions, wavelength).transpose();
  conj_ = table_.conjugate();
}

Spectrum eval_spectrum(const CVector& z, const SteeringTable& table) {
  if (z.size() != table.n_antennas())
    throw std::invalid_argument("eval_spectrum: vector length differs from array size");
  const CVector u = table.conj_rows() * z;
  Spectrum out{table.grid(), std::vector<double>(static_cast<size_t>(u.size()))};
  for (Eigen::Index w = 0; w < u.size(); ++w) out.values[static_cast<size_t>(w)] = std::norm(u(w));
  return out;
}

Spectrum eval_spectrum(const CVector& z, const AngleGrid& grid, const RVector& positions,
                       double wavelength) {
  return eval_spectrum(z, SteeringTable(grid, positions, wavelength));
}

Spectrum reference_spectrum(const std::vector<double>& doas_deg, double amplitude,
                            double sigma_bar, int n_antennas, const AngleGrid& grid) {
  if (!(sigma_bar > 0.0)) throw std::invalid_argument("sigma_bar must be positive");
  if (n_antennas < 1) throw std::invalid_argument("n_antennas must be positive");
  const double sigma_g = sigma_bar / n_antennas;
  const double inv_var = 1.0 / (sigma_g * sigma_g);
  Spectrum out{grid, std::vector<double>(static_cast<size_t>(grid.size()), 0.0)};
  for (int w = 0; w < grid.size(); ++w) {
    double acc = 0.0;
    for (double theta : doas_deg) {
      const double d = grid[w] - theta;
      acc += amplitude * std::exp(-d * d * inv_var);
    }
    out.values[static_cast<size_t>(w)] = acc;
  }
  return out;
}

Spectrum reference_spectrum(const SourceSet& truth, double amplitude, double sigma_bar,
                            int n_antennas, const AngleGrid& grid) {
  return reference_spectrum(std::vector<double>(truth.doas_deg.begin(), truth.doas_deg.end()),
                            amplitude, sigma_bar, n_antennas, grid);
}

double spectrum_loss(const Spectrum& ref, const Spectrum& est) {
  if (!(ref.grid == est.grid) || ref.values.size() != est.values.size())
    throw std::invalid_argument("spectrum_loss: spectra are on different grids");
  double acc = 0.0;
  for (size_t w = 0; w < ref.values.size(); ++w) {
    const double d = ref.values[w] - est.values[w];
    acc += d * d;
  }
  return acc / static_cast<double>(ref.values.size());
}

namespace {

struct Peak {
  double angle;
  double value;
  int index;
};

// Vertex of the parabola through (-1, l), (0, c), (1, r), clamped to the cell.
double parabola_offset(double l, double c, double r) {
  const double denom = l - 2.0 * c + r;
  if (!(denom < 0.0)) return 0.0;
  return std::clamp(0.5 * (l - r) / denom, -0.5, 0.5);
}

Peak refine(const Spectrum& spec, int i) {
  const auto& v = spec.values;
  const double l = v[static_cast<size_t>(i - 1)];
  const double c = v[static_cast<size_t>(i)];
  const double r = v[static_cast<size_t>(i + 1)];
  double delta = 0.0;
  double value = c;
  if (l > 0.0 && c > 0.0 && r > 0.0) {
    const double ll = std::log(l), lc = std::log(c), lr = std::log(r);
    delta = parabola_offset(ll, lc, lr);
    value = std::exp(lc - 0.25 * (ll - lr) * delta);
  } else {
    delta = parabola_offset(l, c, r);
    value = c - 0.25 * (l - r) * delta;
  }
  return {spec.grid[i] + delta * spec.grid.step(), value, i};
}

bool far_enough(const std::vector<Peak>& chosen, double angle, double min_sep) {
  return std::all_of(chosen.begin(), chosen.end(),
                     [&](const Peak& p) { return std::abs(p.angle - angle) >= min_sep; });
}

}  // namespace

DoaEstimate find_peaks(const Spectrum& spec, int k, double min_separation_deg) {
  const int omega = static_cast<int>(spec.values.size());
  if (k < 1) throw std::invalid_argument("find_peaks: k must be >= 1");
  if (omega == 0) throw std::invalid_argument("find_peaks: empty spectrum");
  if (k > omega) throw std::invalid_argument("find_peaks: k exceeds the grid size");

  std::vector<Peak> candidates;
  for (int i = 1; i + 1 < omega; ++i) {
    const double c = spec.values[static_cast<size_t>(i)];
    // A two-sample plateau counts once, at its left sample.
    if (c > spec.values[static_cast<size_t>(i - 1)] && c >= spec.values[static_cast<size_t>(i + 1)])
      candidates.push_back(refine(spec, i));
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Peak& a, const Peak& b) { return a.value > b.value; });

  std::vector<Peak> chosen;
  for (const Peak& p : candidates) {
    if (static_cast<int>(chosen.size()) == k) break;
    if (far_enough(chosen, p.angle, min_separation_deg)) chosen.push_back(p);
  }

  DoaEstimate est;
  if (static_cast<int>(chosen.size()) < k) {
    est.padded = true;
    std::vector<int> order(static_cast<size_t>(omega));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return spec.values[static_cast<size_t>(a)] > spec.values[static_cast<size_t>(b)];
    });
    auto taken = [&](int i) {
      return std::any_of(chosen.begin(), chosen.end(), [&](const Peak& p) { return p.index == i; });
    };
    for (bool enforce_sep : {true, false}) {
      for (int i : order) {
        if (static_cast<int>(chosen.size()) == k) break;
        if (taken(i)) continue;
        if (enforce_sep && !far_enough(chosen, spec.grid[i], min_separation_deg)) continue;
        chosen.push_back({spec.grid[i], spec.values[static_cast<size_t>(i)], i});
      }
    }
  }

  std::sort(chosen.begin(), chosen.end(),
            [](const Peak& a, const Peak& b) { return a.angle < b.angle; });
  for (const Peak& p : chosen) {
    est.doas_deg.push_back(p.angle);
    est.peak_values.push_back(p.value);
  }
  return est;
}

double rmse(const std::vector<std::vector<double>>& estimates,
            const std::vector<std::vector<double>>& truths) {
  if (estimates.size() != truths.size()) throw std::invalid_argument("rmse: trial count mismatch");
  if (estimates.empty()) throw std::invalid_argument("rmse: no trials");
  const size_t k = truths.front().size();
  double acc = 0.0;
  for (size_t t = 0; t < truths.size(); ++t) {
    if (estimates[t].size() != k || truths[t].size() != k)
      throw std::invalid_argument("rmse: source count differs between trials or from the truth");
    std::vector<double> e = estimates[t];
    std::vector<double> g = truths[t];
    std::sort(e.begin(), e.end());
    std::sort(g.begin(), g.end());
    for (size_t i = 0; i < k; ++i) acc += (e[i] - g[i]) * (e[i] - g[i]);
  }
  return std::sqrt(acc / static_cast<double>(truths.size() * k));
}

double rmse(const std::vector<DoaEstimate>& estimates, const std::vector<SourceSet>& truths) {
  std::vector<std::vector<double>> e, g;
  for (const auto& x : estimates) e.push_back(x.doas_deg);
  for (const auto& x : truths) g.emplace_back(x.doas_deg.begin(), x.doas_deg.end());
  return rmse(e, g);
}

void write_spectrum_csv(std::ostream& os, const Spectrum& spec) {
  os << "angle_deg,value\n";
  os << std::setprecision(12);
  for (int w = 0; w < spec.grid.size(); ++w)
    os << spec.grid[w] << ',' << spec.values[static_cast<size_t>(w)] << '\n';
}

}  // namespace sdoa
