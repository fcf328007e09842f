#include "doctest.h"

#include <Eigen/Eigenvalues>

#include "helpers.hpp"
#include "sdoa/estimators.hpp"
#include "sdoa/numerics.hpp"
#include "sdoa/spectrum.hpp"

using namespace sdoa;
using namespace testutil;

TEST_SUITE("numerics") {

TEST_CASE("hermitian_eig on hand-checked matrices") {
  const auto id = linalg::hermitian_eig(CMatrix::Identity(4, 4));
  for (int i = 0; i < 4; ++i) CHECK(id.eigenvalues(i) == doctest::Approx(1.0).epsilon(1e-14));

  CMatrix a(2, 2);
  a << 2.0, 1.0, 1.0, 2.0;
  const auto e = linalg::hermitian_eig(a);
  CHECK(e.eigenvalues(0) == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(e.eigenvalues(1) == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("hermitian_eig agrees with an independent solver") {
  std::mt19937_64 rng(11);
  for (int n : {1, 2, 3, 5, 9, 16, 34}) {
    const CMatrix a = random_hermitian(rng, n);
    const auto e = linalg::hermitian_eig(a);
    Eigen::SelfAdjointEigenSolver<CMatrix> ref(a);
    for (int i = 0; i < n; ++i)
      CHECK(e.eigenvalues(i) == doctest::Approx(ref.eigenvalues()(n - 1 - i)).epsilon(1e-10));
    for (int i = 1; i < n; ++i) CHECK(e.eigenvalues(i - 1) >= e.eigenvalues(i));

    const CMatrix& v = e.eigenvectors;
    CHECK((v.adjoint() * v - CMatrix::Identity(n, n)).norm() < 1e-10);
    const CMatrix recon = v * e.eigenvalues.cast<cplx>().asDiagonal() * v.adjoint();
    CHECK(rel_fro(recon, a) < 1e-12);
    for (int i = 0; i < n; ++i)
      CHECK((a * v.col(i) - e.eigenvalues(i) * v.col(i)).norm() < 1e-10 * a.norm());
  }
}

TEST_CASE("eigenvalue sum equals trace, product equals determinant") {
  std::mt19937_64 rng(5);
  const CMatrix a = random_hermitian(rng, 16);
  CHECK(linalg::hermitian_eig(a).eigenvalues.sum() == doctest::Approx(a.trace().real()).epsilon(1e-10));

  const CMatrix b = random_hermitian(rng, 2);
  const double det2 = (b(0, 0) * b(1, 1) - b(0, 1) * b(1, 0)).real();
  CHECK(linalg::hermitian_eig(b).eigenvalues.prod() == doctest::Approx(det2).epsilon(1e-12));

  const CMatrix c = random_hermitian(rng, 3);
  const cplx det3 = c(0, 0) * c(1, 1) * c(2, 2) + c(0, 1) * c(1, 2) * c(2, 0) +
                    c(0, 2) * c(1, 0) * c(2, 1) - c(0, 2) * c(1, 1) * c(2, 0) -
                    c(0, 0) * c(1, 2) * c(2, 1) - c(0, 1) * c(1, 0) * c(2, 2);
  CHECK(linalg::hermitian_eig(c).eigenvalues.prod() == doctest::Approx(det3.real()).epsilon(1e-12));
}

TEST_CASE("hermitian_eig rejects invalid input") {
  CMatrix a(2, 2);
  a << 1.0, 2.0, 0.0, 1.0;
  CHECK_THROWS_AS(linalg::hermitian_eig(a), NumericsError);
  CHECK_THROWS_AS(linalg::hermitian_eig(CMatrix::Zero(2, 3)), NumericsError);
}

TEST_CASE("svd of simple matrices") {
  const auto z = linalg::svd(CMatrix::Zero(3, 2));
  CHECK(z.singular_values.norm() == 0.0);

  CMatrix d = CMatrix::Zero(2, 2);
  d(0, 0) = 3.0;
  d(1, 1) = 2.0;
  const auto s = linalg::svd(d);
  CHECK(s.singular_values(0) == doctest::Approx(3.0));
  CHECK(s.singular_values(1) == doctest::Approx(2.0));
}

TEST_CASE("svd reconstructs and matches an independent solver") {
  std::mt19937_64 rng(23);
  for (auto [m, n] : {std::pair{4, 4}, {8, 9}, {9, 8}, {16, 3}, {3, 16}, {34, 34}, {1, 5}}) {
    const CMatrix a = random_matrix(rng, m, n);
    const auto s = linalg::svd(a);
    const int p = std::min(m, n);
    REQUIRE(s.singular_values.size() == p);
    const CMatrix recon = s.u * s.singular_values.cast<cplx>().asDiagonal() * s.v.adjoint();
    CHECK(rel_fro(recon, a) < 1e-9);
    CHECK((s.u.adjoint() * s.u - CMatrix::Identity(p, p)).norm() < 1e-9);
    CHECK((s.v.adjoint() * s.v - CMatrix::Identity(p, p)).norm() < 1e-9);
    Eigen::JacobiSVD<CMatrix> ref(a);
    for (int i = 0; i < p; ++i)
      CHECK(s.singular_values(i) == doctest::Approx(ref.singularValues()(i)).epsilon(1e-9));
    for (int i = 0; i < p; ++i) {
      int first = 0;
      while (std::abs(s.v(first, i)) <= 1e-12) ++first;
      CHECK(std::abs(s.v(first, i).imag()) < 1e-12);
      CHECK(s.v(first, i).real() > 0.0);
    }
  }
}

TEST_CASE("singular values are unitarily invariant") {
  std::mt19937_64 rng(31);
  const CMatrix a = random_matrix(rng, 10, 7);
  const CMatrix b = random_unitary(rng, 10) * a * random_unitary(rng, 7);
  const auto sa = linalg::svd(a).singular_values;
  const auto sb = linalg::svd(b).singular_values;
  CHECK((sa - sb).norm() < 1e-9 * sa(0));
}

TEST_CASE("Hankel lift of one noiseless source has numerical rank 1") {
  const RVector pos = ArrayConfig::ula(16).positions;
  const CVector r = steering_vector(23.7, pos);
  const auto s = linalg::svd(hankel_lift(r, 8));
  CHECK(s.singular_values(1) / s.singular_values(0) < 1e-6);
}

TEST_CASE("psd_project") {
  std::mt19937_64 rng(41);
  SUBCASE("fixed point on PSD input") {
    const CMatrix g = random_matrix(rng, 6, 6);
    const CMatrix p = g * g.adjoint();
    CHECK(rel_fro(linalg::psd_project(p), p) < 1e-10);
  }
  SUBCASE("clamps negative eigenvalues") {
    CMatrix d = CMatrix::Zero(2, 2);
    d(0, 0) = 1.0;
    d(1, 1) = -1.0;
    CMatrix want = CMatrix::Zero(2, 2);
    want(0, 0) = 1.0;
    CHECK((linalg::psd_project(d) - want).norm() < 1e-12);
  }
  SUBCASE("nearest PSD matrix among random candidates") {
    const CMatrix a = random_hermitian(rng, 8);
    const CMatrix proj = linalg::psd_project(a);
    Eigen::SelfAdjointEigenSolver<CMatrix> es(proj);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10 * a.norm());
    const double dist = (proj - a).norm();
    for (int t = 0; t < 100; ++t) {
      const CMatrix g = random_matrix(rng, 8, 8) * 0.5;
      CHECK(dist <= (g * g.adjoint() - a).norm() + 1e-12);
    }
    CHECK(rel_fro(linalg::psd_project(proj), proj) < 1e-10);
  }
  SUBCASE("rejects non-Hermitian input") {
    CMatrix a = CMatrix::Zero(2, 2);
    a(0, 1) = 1.0;
    CHECK_THROWS_AS(linalg::psd_project(a), NumericsError);
  }
}

TEST_CASE("lstsq") {
  std::mt19937_64 rng(53);
  const CVector b = random_vector(rng, 4);
  CHECK((linalg::lstsq(CMatrix::Identity(4, 4), b) - b).norm() < 1e-14);

  CMatrix ones(2, 1);
  ones << 1.0, 1.0;
  CVector rhs(2);
  rhs << 0.0, 2.0;
  CHECK(std::abs(linalg::lstsq(ones, rhs)(0) - 1.0) < 1e-14);

  const CMatrix a = random_matrix(rng, 16, 3);
  const CVector y = random_vector(rng, 16);
  const CVector x = linalg::lstsq(a, y);
  CHECK((a.adjoint() * (a * x - y)).norm() < 1e-9);
  CHECK((x - a.colPivHouseholderQr().solve(y)).norm() < 1e-10);

  CMatrix dup(3, 2);
  dup << 1.0, 1.0, 2.0, 2.0, 3.0, 3.0;
  CHECK_THROWS_AS(linalg::lstsq(dup, CVector::Ones(3)), NumericsError);
  CHECK_THROWS_AS(linalg::lstsq(CMatrix::Ones(1, 2), CVector::Ones(1)), NumericsError);
}

}  // TEST_SUITE
