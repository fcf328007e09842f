#pragma once

#include <complex>
#include <stdexcept>

#include <Eigen/Dense>

namespace sdoa {

using cplx = std::complex<double>;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;
/// Dense complex matrix. Eigen's default storage is column-major; nothing in
/// this project depends on the storage order.
using CMatrix = Eigen::MatrixXcd;

class NumericsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace linalg {

/// Eigen-decomposition of a Hermitian matrix. Eigenvalues are sorted in
/// descending order, eigenvectors are the matching (orthonormal) columns.
struct EigResult {
  RVector eigenvalues;
  CMatrix eigenvectors;
};

/// Thin SVD, A = U diag(s) V^H with p = min(rows, cols) columns in U and V.
struct SvdResult {
  CMatrix u;
  RVector singular_values;
  CMatrix v;
};

/// Cyclic complex Jacobi. Sweeps until the off-diagonal Frobenius mass is
/// below tol * ||A||_F. Throws NumericsError if `a` is not square or not
/// Hermitian to within 1e-12 (relative).
EigResult hermitian_eig(const CMatrix& a, double tol = 1e-14);

/// SVD through the Gram matrix of the smaller side. Squares the condition
/// number, so singular values below ~1e-8 * s_max lose relative accuracy;
/// fine for the small, well-scaled matrices used here.
SvdResult svd(const CMatrix& a);

/// Nearest positive semidefinite matrix in the Frobenius norm.
CMatrix psd_project(const CMatrix& a);

/// Least squares via the normal equations. Throws NumericsError when
/// rows < cols or the Gram matrix is numerically singular.
CVector lstsq(const CMatrix& a, const CVector& b);

/// max |A - A^H| relative to max(1, ||A||_max).
double hermitian_defect(const CMatrix& a);

}  // namespace linalg
}  // namespace sdoa
