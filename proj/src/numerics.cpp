#include "sdoa/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace sdoa::linalg {

namespace {

constexpr int kMaxSweeps = 100;

double off_diagonal_norm2(const CMatrix& a) {
  double s = 0.0;
  const Eigen::Index n = a.rows();
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i)
      if (i != j) s += std::norm(a(i, j));
  return s;
}

// Columns i of u are made orthonormal against columns [0, i) when `filled[i]`
// is false: the first standard basis vector that survives two rounds of
// Gram-Schmidt is used.
void complete_orthonormal(CMatrix& u, const std::vector<bool>& filled) {
  const Eigen::Index m = u.rows();
  for (Eigen::Index i = 0; i < u.cols(); ++i) {
    if (filled[static_cast<size_t>(i)]) continue;
    for (Eigen::Index e = 0; e < m; ++e) {
      CVector cand = CVector::Zero(m);
      cand(e) = 1.0;
      for (int round = 0; round < 2; ++round) {
        for (Eigen::Index j = 0; j < u.cols(); ++j) {
          if (j == i || (!filled[static_cast<size_t>(j)] && j > i)) continue;
          cand -= u.col(j) * u.col(j).dot(cand);
        }
      }
      const double nrm = cand.norm();
      if (nrm > 1e-6) {
        u.col(i) = cand / nrm;
        break;
      }
    }
  }
}

}  // namespace

double hermitian_defect(const CMatrix& a) {
  if (a.rows() != a.cols()) return INFINITY;
  double scale = 1.0;
  double defect = 0.0;
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      scale = std::max(scale, std::abs(a(i, j)));
      defect = std::max(defect, std::abs(a(i, j) - std::conj(a(j, i))));
    }
  }
  return defect / scale;
}

EigResult hermitian_eig(const CMatrix& input, double tol) {
  if (input.rows() != input.cols() || input.rows() == 0)
    throw NumericsError("hermitian_eig: matrix must be square and non-empty");
  if (hermitian_defect(input) > 1e-12)
    throw NumericsError("hermitian_eig: matrix is not Hermitian");

  const Eigen::Index n = input.rows();
  CMatrix a = 0.5 * (input + input.adjoint());
  CMatrix v = CMatrix::Identity(n, n);
  const double threshold = std::pow(tol * std::max(a.norm(), 1e-300), 2);

  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    if (off_diagonal_norm2(a) <= threshold) break;
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const cplx b = a(p, q);
        const double mag = std::abs(b);
        if (mag == 0.0) continue;
        const cplx phase = b / mag;  // e^{i phi}
        const double app = a(p, p).real();
        const double aqq = a(q, q).real();
        const double theta = (aqq - app) / (2.0 * mag);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        const cplx sp = s * std::conj(phase);  // s e^{-i phi}
        const cplx cp = c * std::conj(phase);  // c e^{-i phi}

        // A <- A G, V <- V G
        for (Eigen::Index k = 0; k < n; ++k) {
          const cplx akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - sp * akq;
          a(k, q) = s * akp + cp * akq;
          const cplx vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - sp * vkq;
          v(k, q) = s * vkp + cp * vkq;
        }
        // A <- G^H A
        for (Eigen::Index k = 0; k < n; ++k) {
          const cplx apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * phase * aqk;
          a(q, k) = s * apk + c * phase * aqk;
        }
        a(p, q) = 0.0;
        a(q, p) = 0.0;
        a(p, p) = a(p, p).real();
        a(q, q) = a(q, q).real();
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) {
    return a(i, i).real() > a(j, j).real();
  });

  EigResult out{RVector(n), CMatrix(n, n)};
  for (Eigen::Index k = 0; k < n; ++k) {
    out.eigenvalues(k) = a(order[static_cast<size_t>(k)], order[static_cast<size_t>(k)]).real();
    out.eigenvectors.col(k) = v.col(order[static_cast<size_t>(k)]);
  }
  return out;
}

SvdResult svd(const CMatrix& a) {
  const Eigen::Index m = a.rows();
  const Eigen::Index n = a.cols();
  if (m == 0 || n == 0) return {CMatrix(m, 0), RVector(0), CMatrix(n, 0)};

  SvdResult out;
  if (m >= n) {
    const EigResult gram = hermitian_eig(a.adjoint() * a);
    out.v = gram.eigenvectors;
    out.singular_values = gram.eigenvalues.cwiseMax(0.0).cwiseSqrt();
    out.u = CMatrix::Zero(m, n);
    const double smax = out.singular_values(0);
    std::vector<bool> filled(static_cast<size_t>(n), false);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double si = out.singular_values(i);
      if (smax > 0.0 && si > 1e-12 * smax) {
        CVector ui = a * out.v.col(i) / si;
        // Renormalize to absorb rounding in small singular values.
        out.u.col(i) = ui / ui.norm();
        filled[static_cast<size_t>(i)] = true;
      }
    }
    complete_orthonormal(out.u, filled);
  } else {
    SvdResult t = svd(a.adjoint());
    out.u = std::move(t.v);
    out.singular_values = std::move(t.singular_values);
    out.v = std::move(t.u);
  }

  // Phase convention: first non-negligible entry of each right vector is
  // real and positive.
  for (Eigen::Index i = 0; i < out.v.cols(); ++i) {
    for (Eigen::Index k = 0; k < out.v.rows(); ++k) {
      const double mag = std::abs(out.v(k, i));
      if (mag > 1e-12) {
        const cplx rot = std::conj(out.v(k, i) / mag);
        out.v.col(i) *= rot;
        out.u.col(i) *= rot;
        break;
      }
    }
  }
  return out;
}

CMatrix psd_project(const CMatrix& a) {
  const EigResult e = hermitian_eig(a);
  const RVector clamped = e.eigenvalues.cwiseMax(0.0);
  CMatrix out = e.eigenvectors * clamped.asDiagonal() * e.eigenvectors.adjoint();
  return 0.5 * (out + out.adjoint());
}

CVector lstsq(const CMatrix& a, const CVector& b) {
  if (a.rows() < a.cols())
    throw NumericsError("lstsq: system is underdetermined");
  if (a.rows() != b.size()) throw NumericsError("lstsq: dimension mismatch");
  const EigResult gram = hermitian_eig(a.adjoint() * a);
  const double lmax = gram.eigenvalues(0);
  const double lmin = gram.eigenvalues(gram.eigenvalues.size() - 1);
  if (!(lmax > 0.0) || lmin <= 1e-12 * lmax)
    throw NumericsError("lstsq: matrix is rank deficient");
  const CMatrix& vecs = gram.eigenvectors;
  CVector rhs = vecs.adjoint() * (a.adjoint() * b);
  rhs = rhs.cwiseQuotient(gram.eigenvalues.cast<cplx>());
  return vecs * rhs;
}

}  // namespace sdoa::linalg
