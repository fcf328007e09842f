#include "sdoa/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace sdoa {

Spectrum beamformer_spectrum(const CVector& r, const SteeringTable& table) {
  return eval_spectrum(r, table);
}

CMatrix hankel_lift(const CVector& r, int rows) {
  const auto n = static_cast<int>(r.size());
  if (rows < 1 || rows > n) throw std::invalid_argument("hankel_lift: row count out of range");
  const int cols = n - rows + 1;
  CMatrix h(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) h(i, j) = r(i + j);
  return h;
}

void MusicConfig::validate(int n_antennas) const {
  if (n_sources < 1) throw std::invalid_argument("MUSIC needs at least one source");
  if (n_sources >= hankel_rows)
    throw std::invalid_argument("MUSIC needs more Hankel rows than sources");
  if (hankel_rows > n_antennas - n_sources)
    throw std::invalid_argument("MUSIC Hankel rows must not exceed N - K");
}

EstimatorOutput music_single_snapshot(const CVector& r, const MusicConfig& cfg,
                                      const AngleGrid& grid, double spacing) {
  cfg.validate(static_cast<int>(r.size()));
  const CMatrix hankel = hankel_lift(r, cfg.hankel_rows);
  const linalg::SvdResult dec = linalg::svd(hankel);

  // Left singular vectors span C^L only when L <= N - L + 1; otherwise the
  // thin U is completed to a full basis first.
  CMatrix u = dec.u;
  if (u.cols() < cfg.hankel_rows) {
    const linalg::EigResult e = linalg::hermitian_eig(hankel * hankel.adjoint());
    u = e.eigenvectors;
  }
  const CMatrix noise = u.rightCols(cfg.hankel_rows - cfg.n_sources);

  RVector positions(cfg.hankel_rows);
  for (int n = 0; n < cfg.hankel_rows; ++n) positions(n) = n * spacing;
  const SteeringTable table(grid, positions);
  const CMatrix proj = table.conj_rows() * noise;  // row w: a^H(zeta_w) U_noise

  Spectrum spec{grid, std::vector<double>(static_cast<size_t>(grid.size()))};
  for (int w = 0; w < grid.size(); ++w) {
    const double d = proj.row(w).squaredNorm();
    spec.values[static_cast<size_t>(w)] = d > 1.0 / kMusicCap ? 1.0 / d : kMusicCap;
  }
  spec = spec.normalized();
  DoaEstimate est = find_peaks(spec, cfg.n_sources);
  return {std::move(spec), std::move(est)};
}

OmpResult omp(const CVector& r, const SteeringTable& table, int k) {
  const int omega = table.grid().size();
  if (k < 1) throw std::invalid_argument("omp: k must be >= 1");
  if (k > omega) throw std::invalid_argument("omp: k exceeds the dictionary size");
  if (r.size() != table.n_antennas()) throw std::invalid_argument("omp: length mismatch");

  const double norm = std::sqrt(static_cast<double>(table.n_antennas()));
  OmpResult out;
  CVector residual = r;
  CMatrix selected(r.size(), 0);
  std::vector<bool> used(static_cast<size_t>(omega), false);

  for (int iter = 0; iter < k; ++iter) {
    const CVector corr = table.conj_rows() * residual;
    int best = -1;
    double best_val = -1.0;
    for (int w = 0; w < omega; ++w) {
      if (used[static_cast<size_t>(w)]) continue;
      const double v = std::abs(corr(w));
      if (v > best_val) {
        best_val = v;
        best = w;
      }
    }
    used[static_cast<size_t>(best)] = true;
    out.atoms.push_back(best);
    selected.conservativeResize(Eigen::NoChange, selected.cols() + 1);
    selected.col(selected.cols() - 1) = table.rows().row(best).transpose() / norm;

    out.coefficients = linalg::lstsq(selected, r);
    residual = r - selected * out.coefficients;
  }
  out.residual_norm = residual.norm();

  std::vector<int> order(static_cast<size_t>(k));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return table.grid()[out.atoms[static_cast<size_t>(a)]] < table.grid()[out.atoms[static_cast<size_t>(b)]];
  });
  for (int i : order) {
    out.estimate.doas_deg.push_back(table.grid()[out.atoms[static_cast<size_t>(i)]]);
    out.estimate.peak_values.push_back(std::abs(out.coefficients(i)));
  }
  return out;
}

void AnmConfig::validate() const {
  if (beta && !(*beta >= 0.0)) throw std::invalid_argument("ANM beta must be nonnegative");
  if (!(rho > 0.0) || max_iters < 1 || !(tol_primal > 0.0) || !(tol_dual > 0.0))
    throw std::invalid_argument("ANM penalty, iteration cap and tolerances must be positive");
}

namespace {

// Nearest Hermitian matrix with every off-diagonal summing to zero and the
// prescribed trace. The constraints act on disjoint diagonals, so the
// projection is a per-diagonal mean removal plus a uniform diagonal shift.
CMatrix project_affine_block(const CMatrix& w, double trace) {
  const Eigen::Index n = w.rows();
  CMatrix b = 0.5 * (w + w.adjoint());
  for (Eigen::Index lag = 1; lag < n; ++lag) {
    cplx sum = 0.0;
    for (Eigen::Index i = 0; i + lag < n; ++i) sum += b(i, i + lag);
    const cplx mean = sum / static_cast<double>(n - lag);
    for (Eigen::Index i = 0; i + lag < n; ++i) {
      b(i, i + lag) -= mean;
      b(i + lag, i) = std::conj(b(i, i + lag));
    }
  }
  double tr = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) tr += b(i, i).real();
  const double shift = (trace - tr) / static_cast<double>(n);
  for (Eigen::Index i = 0; i < n; ++i) b(i, i) = b(i, i).real() + shift;
  return b;
}

CMatrix assemble(const CMatrix& b, const CVector& h) {
  const Eigen::Index n = b.rows();
  CMatrix x(n + 1, n + 1);
  x.topLeftCorner(n, n) = b;
  x.topRightCorner(n, 1) = h;
  x.bottomLeftCorner(1, n) = h.adjoint();
  x(n, n) = 1.0;
  return x;
}

}  // namespace

CMatrix anm_lifted(const AnmResult& res) { return assemble(res.toeplitz_block, res.h); }

AnmResult anm_denoise(const CVector& r, const AnmConfig& cfg) {
  cfg.validate();
  const Eigen::Index n = r.size();
  if (n < 1) throw std::invalid_argument("anm_denoise: empty snapshot");
  const double beta = cfg.beta.value_or(1.2 * r.norm());
  const double trace = beta * beta;

  // Strictly feasible anchor: B = (beta^2 / N) I, h = 0.
  const CMatrix anchor = assemble(CMatrix::Identity(n, n) * (trace / static_cast<double>(n)),
                                  CVector::Zero(n));
  CMatrix z = anchor;
  CMatrix u = CMatrix::Zero(n + 1, n + 1);
  double rho = cfg.rho;

  AnmResult res;
  res.beta = beta;
  for (int it = 1; it <= cfg.max_iters; ++it) {
    const CMatrix w = z - u;
    const CVector wh = 0.5 * (w.topRightCorner(n, 1) + w.bottomLeftCorner(1, n).adjoint());
    res.h = (r + rho * wh) / (1.0 + rho);
    res.toeplitz_block = project_affine_block(w.topLeftCorner(n, n), trace);
    const CMatrix x = assemble(res.toeplitz_block, res.h);

    const CMatrix z_old = z;
    z = linalg::psd_project(x + u);
    u += x - z;

    res.iterations = it;
    res.primal_residual = (x - z).norm();
    res.dual_residual = rho * (z - z_old).norm();
    if (res.primal_residual < cfg.tol_primal && res.dual_residual < cfg.tol_dual) {
      // X is affine-feasible and within tol of the PSD cone. Blending with
      // the anchor restores exact PSD-ness without leaving the affine set.
      const double lmin = linalg::hermitian_eig(x).eigenvalues(n);
      if (lmin < 0.0) {
        const double lanchor = std::min(trace / static_cast<double>(n), 1.0);
        const double t = -lmin / (-lmin + lanchor);
        res.toeplitz_block = (1.0 - t) * res.toeplitz_block + t * anchor.topLeftCorner(n, n);
        res.h = (1.0 - t) * res.h;
      }
      return res;
    }
    if (it % 10 == 0) {
      if (res.primal_residual > 10.0 * res.dual_residual) {
        rho *= 2.0;
        u /= 2.0;
      } else if (res.dual_residual > 10.0 * res.primal_residual) {
        rho /= 2.0;
        u *= 2.0;
      }
    }
  }
  throw AnmConvergenceError("anm_denoise: ADMM did not converge (primal " +
                                std::to_string(res.primal_residual) + ", dual " +
                                std::to_string(res.dual_residual) + ")",
                            res);
}

Spectrum anm_spectrum(const CVector& h, const SteeringTable& table) {
  return eval_spectrum(h, table);
}

}  // namespace sdoa
