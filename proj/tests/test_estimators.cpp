#include "doctest.h"

#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "helpers.hpp"
#include "sdoa/array_model.hpp"
#include "sdoa/estimators.hpp"

using namespace sdoa;
using namespace testutil;

namespace {

const RVector kUla16 = ArrayConfig::ula(16).positions;

CVector mixture(const std::vector<double>& doas, const std::vector<cplx>& amps) {
  CVector r = CVector::Zero(16);
  for (size_t k = 0; k < doas.size(); ++k) r += amps[k] * steering_vector(doas[k], kUla16);
  return r;
}

SourceSet source_set(const std::vector<double>& doas) {
  SourceSet s;
  s.doas_deg = RVector(static_cast<Eigen::Index>(doas.size()));
  s.amplitudes = CVector(static_cast<Eigen::Index>(doas.size()));
  for (size_t k = 0; k < doas.size(); ++k) {
    s.doas_deg(static_cast<Eigen::Index>(k)) = doas[k];
    s.amplitudes(static_cast<Eigen::Index>(k)) = std::polar(1.0, 1.3 * static_cast<double>(k) + 0.2);
  }
  return s;
}

void check_feasible(const AnmResult& res) {
  const CMatrix lifted = anm_lifted(res);
  Eigen::SelfAdjointEigenSolver<CMatrix> es(lifted);
  CHECK(es.eigenvalues().minCoeff() >= -1e-8);
  CHECK(std::abs(res.toeplitz_block.trace().real() - res.beta * res.beta) <= 1e-8);
  CHECK(linalg::hermitian_defect(res.toeplitz_block) < 1e-12);
  const Eigen::Index n = res.toeplitz_block.rows();
  for (Eigen::Index lag = 1; lag < n; ++lag) {
    cplx up = 0.0, down = 0.0;
    for (Eigen::Index i = 0; i + lag < n; ++i) {
      up += res.toeplitz_block(i, i + lag);
      down += res.toeplitz_block(i + lag, i);
    }
    CHECK(std::abs(up) <= 1e-8);
    CHECK(std::abs(down) <= 1e-8);
  }
}

}  // namespace

TEST_SUITE("estimators") {

TEST_CASE("beamformer") {
  const AngleGrid g = AngleGrid::full(1801);
  const SteeringTable t(g, kUla16);
  CHECK(g[beamformer_spectrum(steering_vector(20.0, kUla16), t).argmax()] == doctest::Approx(20.0));
  const Spectrum z = beamformer_spectrum(CVector::Zero(16), t);
  CHECK(*std::max_element(z.values.begin(), z.values.end()) == 0.0);

  const SourceSet s = source_set({-40.0, 40.0});
  const Snapshot snap = synthesize_snapshot(ArrayConfig::ula(16), ImperfectionRealization::identity(16), s, 30.0, 17);
  const DoaEstimate e = find_peaks(beamformer_spectrum(snap.received, t), 2);
  CHECK(std::abs(e.doas_deg[0] + 40.0) < 1.0);
  CHECK(std::abs(e.doas_deg[1] - 40.0) < 1.0);
}

TEST_CASE("beamformer is the matched-filter power and samples the DFT") {
  std::mt19937_64 rng(6);
  const CVector r = random_vector(rng, 16);
  const AngleGrid g = AngleGrid::full(181);
  const Spectrum s = beamformer_spectrum(r, SteeringTable(g, kUla16));
  for (int i = 0; i < g.size(); ++i)
    CHECK(s.values[static_cast<size_t>(i)] ==
          doctest::Approx(std::norm(steering_vector(g[i], kUla16).dot(r))).epsilon(1e-10));

  // Half-wavelength spacing: sin(zeta) = 2m/P lands on bin m of a length-P DFT.
  const int p = 64;
  for (int m = -p / 2 + 1; m < p / 2; ++m) {
    const double zeta = std::asin(2.0 * m / p) * 180.0 / std::numbers::pi;
    cplx bin = 0.0;
    for (int n = 0; n < 16; ++n)
      bin += r(n) * std::exp(cplx(0.0, -2.0 * std::numbers::pi * ((m + p) % p) * n / p));
    CHECK(std::norm(steering_vector(zeta, kUla16).dot(r)) == doctest::Approx(std::norm(bin)).epsilon(1e-10));
  }
}

TEST_CASE("hankel lift") {
  const CVector r = CVector::LinSpaced(16, 0.0, 15.0);
  const CMatrix h = hankel_lift(r, 8);
  CHECK(h.rows() == 8);
  CHECK(h.cols() == 9);
  CVector r4(4);
  r4 << 0.0, 1.0, 2.0, 3.0;
  CMatrix want(2, 3);
  want << 0.0, 1.0, 2.0, 1.0, 2.0, 3.0;
  CHECK(hankel_lift(r4, 2) == want);
  CHECK_THROWS_AS(hankel_lift(r4, 0), std::invalid_argument);
  CHECK_THROWS_AS(hankel_lift(r4, 5), std::invalid_argument);
  const auto s = linalg::svd(hankel_lift(steering_vector(-17.0, kUla16) * cplx(0.3, 2.0), 8));
  CHECK(s.singular_values(1) < 1e-6 * s.singular_values(0));
}

TEST_CASE("MUSIC configuration") {
  CHECK(MusicConfig::for_array(16, 3).hankel_rows == 8);
  CHECK_THROWS_AS((MusicConfig{3, 3}.validate(16)), std::invalid_argument);
  CHECK_THROWS_AS((MusicConfig{14, 3}.validate(16)), std::invalid_argument);
  CHECK_NOTHROW((MusicConfig{13, 3}.validate(16)));
}

TEST_CASE("MUSIC noiseless recovery") {
  const AngleGrid g = AngleGrid::full(1801);
  {
    const auto out = music_single_snapshot(steering_vector(10.0, kUla16), MusicConfig::for_array(16, 1), g);
    CHECK(std::abs(out.estimate.doas_deg[0] - 10.0) < 0.05);
    CHECK(out.spectrum.max_value() == doctest::Approx(1.0));
  }
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> idx(-550, 550);
  for (int t = 0; t < 30; ++t) {
    const int k = 1 + t % 3;
    std::vector<double> doas;
    while (static_cast<int>(doas.size()) < k) {
      const double d = idx(rng) * 0.1;
      bool ok = true;
      for (double e : doas) ok = ok && std::abs(e - d) >= 15.0;
      if (ok) doas.push_back(d);
    }
    std::sort(doas.begin(), doas.end());
    std::vector<cplx> amps;
    for (int i = 0; i < k; ++i) amps.push_back(std::polar(1.0, 0.9 * i + 0.1 * t));
    const auto out = music_single_snapshot(mixture(doas, amps), MusicConfig::for_array(16, k), g);
    for (int i = 0; i < k; ++i) CHECK(std::abs(out.estimate.doas_deg[static_cast<size_t>(i)] - doas[static_cast<size_t>(i)]) <= 0.05);
  }
}

TEST_CASE("MUSIC on pure noise does not throw") {
  std::mt19937_64 rng(8);
  const auto out = music_single_snapshot(random_vector(rng, 16), MusicConfig::for_array(16, 1), AngleGrid::full(361));
  CHECK(out.estimate.doas_deg.size() == 1);
}

TEST_CASE("MUSIC RMSE at 30 dB on a perfect array") {
  const AngleGrid g = AngleGrid::full(1801);
  const ArrayConfig a = ArrayConfig::ula(16);
  std::vector<DoaEstimate> est;
  std::vector<SourceSet> truth;
  for (int t = 0; t < 100; ++t) {
    SourceSet s = source_set({-30.0, 10.0, 20.0});
    for (int k = 0; k < 3; ++k) s.amplitudes(k) = std::polar(1.0, 2.0 * std::numbers::pi * std::fmod(0.618 * (t * 3 + k), 1.0));
    const Snapshot snap = synthesize_snapshot(a, ImperfectionRealization::identity(16), s, 30.0, 1000 + static_cast<std::uint64_t>(t));
    est.push_back(music_single_snapshot(snap.received, MusicConfig::for_array(16, 3), g).estimate);
    truth.push_back(s);
  }
  CHECK(rmse(est, truth) < 0.5);
}

TEST_CASE("OMP") {
  const AngleGrid g = AngleGrid::full(1801);
  const SteeringTable t(g, kUla16);
  SUBCASE("single exact atom") {
    const OmpResult r = omp(steering_vector(0.0, kUla16), t, 1);
    CHECK(r.estimate.doas_deg[0] == doctest::Approx(0.0));
    CHECK(r.residual_norm < 1e-12);
  }
  SUBCASE("exact recovery on an incoherent dictionary") {
    const AngleGrid coarse(-60.0, 60.0, 5);
    const SteeringTable ct(coarse, kUla16);
    double mu = 0.0;
    for (int i = 0; i < coarse.size(); ++i)
      for (int j = i + 1; j < coarse.size(); ++j)
        mu = std::max(mu, std::abs(ct.rows().row(i).dot(ct.rows().row(j))) / 16.0);
    REQUIRE(mu < 1.0 / 3.0);
    std::mt19937_64 rng(15);
    std::uniform_real_distribution<double> mag(0.5, 2.0), ph(0.0, 6.283185307179586);
    for (int trial = 0; trial < 10; ++trial)
      for (int i = 0; i < coarse.size(); ++i)
        for (int j = i + 1; j < coarse.size(); ++j) {
          const OmpResult res = omp(mixture({coarse[i], coarse[j]},
                                            {std::polar(mag(rng), ph(rng)), std::polar(mag(rng), ph(rng))}),
                                    ct, 2);
          std::vector<int> got = res.atoms;
          std::sort(got.begin(), got.end());
          CHECK(got == std::vector<int>{i, j});
          CHECK(res.residual_norm < 1e-10);
        }
  }
  SUBCASE("first greedy step picks the stronger source") {
    const AngleGrid coarse(-60.0, 60.0, 5);
    const CVector r = mixture({0.0, 30.0}, {0.6, 1.5});
    const OmpResult res = omp(r, SteeringTable(coarse, kUla16), 1);
    CHECK(res.estimate.doas_deg[0] == doctest::Approx(30.0));
    CHECK(res.residual_norm < r.norm());
  }
  SUBCASE("fine grid lands within a cell of well separated sources") {
    const OmpResult r = omp(mixture({-30.0, 25.0}, {1.0, cplx(0.0, 1.0)}), t, 2);
    CHECK(std::abs(r.estimate.doas_deg[0] + 30.0) <= 0.5);
    CHECK(std::abs(r.estimate.doas_deg[1] - 25.0) <= 0.5);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(omp(CVector::Ones(16), SteeringTable(AngleGrid(-1, 1, 3), kUla16), 4), std::invalid_argument);
    CHECK_THROWS_AS(omp(CVector::Ones(16), t, 0), std::invalid_argument);
  }
}

TEST_CASE("ANM") {
  const AngleGrid g = AngleGrid::full(1801);
  const SteeringTable t(g, kUla16);
  SUBCASE("zero input") {
    const AnmResult res = anm_denoise(CVector::Zero(16), AnmConfig{});
    CHECK(res.h.norm() < 1e-12);
    const Spectrum s = anm_spectrum(res.h, t);
    CHECK(*std::max_element(s.values.begin(), s.values.end()) < 1e-20);
  }
  SUBCASE("single source") {
    for (double theta : {10.3, -47.15, 0.0, 62.0}) {
      const AnmResult res = anm_denoise(steering_vector(theta, kUla16) * std::polar(0.7, 1.1), AnmConfig{});
      check_feasible(res);
      const DoaEstimate e = find_peaks(anm_spectrum(res.h, t), 1);
      CHECK(std::abs(e.doas_deg[0] - theta) < 0.2);
    }
  }
  SUBCASE("two sources") {
    const AnmResult res = anm_denoise(mixture({-25.0, 30.0}, {1.0, cplx(0.0, 0.8)}), AnmConfig{});
    check_feasible(res);
    const DoaEstimate e = find_peaks(anm_spectrum(res.h, t), 2);
    CHECK(std::abs(e.doas_deg[0] + 25.0) < 0.5);
    CHECK(std::abs(e.doas_deg[1] - 30.0) < 0.5);
  }
  SUBCASE("anm_spectrum matches evaluation") {
    CHECK(g[anm_spectrum(steering_vector(15.0, kUla16), t).argmax()] == doctest::Approx(15.0));
  }
  SUBCASE("iteration cap reports the last iterate") {
    AnmConfig cfg;
    cfg.max_iters = 3;
    try {
      anm_denoise(mixture({-25.0, 30.0}, {1.0, 1.0}), cfg);
      FAIL("expected a convergence error");
    } catch (const AnmConvergenceError& e) {
      CHECK(e.last_iterate().iterations == 3);
      CHECK(e.last_iterate().h.size() == 16);
    }
  }
  SUBCASE("invalid config") {
    AnmConfig cfg;
    cfg.rho = 0.0;
    CHECK_THROWS_AS(anm_denoise(CVector::Ones(4), cfg), std::invalid_argument);
  }
}

}  // TEST_SUITE
