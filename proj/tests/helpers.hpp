#pragma once

#include <cstdint>
#include <random>

#include "sdoa/numerics.hpp"

namespace testutil {

using sdoa::CMatrix;
using sdoa::CVector;
using sdoa::cplx;

inline CMatrix random_matrix(std::mt19937_64& rng, int rows, int cols) {
  std::normal_distribution<double> n(0.0, 1.0);
  CMatrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = cplx(n(rng), n(rng));
  return m;
}

inline CVector random_vector(std::mt19937_64& rng, int n) { return random_matrix(rng, n, 1).col(0); }

inline CMatrix random_hermitian(std::mt19937_64& rng, int n) {
  const CMatrix a = random_matrix(rng, n, n);
  return 0.5 * (a + a.adjoint());
}

inline CMatrix random_unitary(std::mt19937_64& rng, int n) {
  Eigen::HouseholderQR<CMatrix> qr(random_matrix(rng, n, n));
  return qr.householderQ() * CMatrix::Identity(n, n);
}

inline double rel_fro(const CMatrix& a, const CMatrix& b) {
  const double scale = std::max(b.norm(), 1e-300);
  return (a - b).norm() / scale;
}

}  // namespace testutil
