#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Eigenvalues>

#include "support.hpp"
#include "systems.hpp"
#include "ttspin/dense_oracle.hpp"

using namespace ttspin;
using namespace ttspin::oracle;
using namespace testing_support;

namespace {

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> out(n);
  for (int k = 0; k < n; ++k) out[k] = n == 1 ? a : a + (b - a) * k / (n - 1);
  return out;
}

} // namespace

TEST_CASE("dense Hamiltonian") {
  SUBCASE("single spin") {
    SpinSystem sys{{{"H", "1H", 100.0}}, {}, 1.0};
    Matrix expect = kTwoPi * 100.0 * spin_sz();
    CHECK(rel_diff(dense_hamiltonian(sys), expect) <= 1e-15);
  }
  SUBCASE("AB system eigenvalues") {
    // Two homonuclear spins: the standard strongly coupled pair. With
    // sigma = nu1 - nu2 and D = sqrt(sigma^2 + J^2), the energies in Hz are
    // J/4 +- (nu1+nu2)/2 and -J/4 +- D/2.
    const double nu1 = 120.0, nu2 = -35.0, j = 12.0;
    SpinSystem sys{{{"a", "1H", nu1}, {"b", "1H", nu2}}, {{0, 1, j}}, 1.0};
    Eigen::SelfAdjointEigenSolver<Matrix> es(dense_hamiltonian(sys));
    const double d = std::hypot(nu1 - nu2, j);
    std::vector<double> expect{j / 4 + (nu1 + nu2) / 2, j / 4 - (nu1 + nu2) / 2,
                               -j / 4 + d / 2, -j / 4 - d / 2};
    std::sort(expect.begin(), expect.end());
    for (int k = 0; k < 4; ++k) {
      CHECK(es.eigenvalues()[k] / kTwoPi == doctest::Approx(expect[k]).epsilon(1e-12));
    }
  }
  SUBCASE("eight random spins are Hermitian") {
    std::mt19937_64 rng(31);
    const Matrix h = dense_hamiltonian(random_system(rng, 8));
    CHECK((h - h.adjoint()).norm() == 0.0);
  }
  SUBCASE("caps") {
    std::mt19937_64 rng(32);
    const SpinSystem big = random_system(rng, 13, 0.1);
    try {
      dense_hamiltonian(big);
      FAIL("expected cap error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::dimension_cap);
      CHECK(std::string(e.what()).find("oracle cap exceeded") != std::string::npos);
    }
    const SpinSystem eight = random_system(rng, 8, 0.1);
    CHECK_THROWS_AS(dense_liouvillian(eight), Error);
    DenseLimits tight{4, 2};
    CHECK_THROWS_AS(dense_liouvillian(random_system(rng, 3), tight), Error);
  }
}

TEST_CASE("dense Liouvillian implements the commutator") {
  std::mt19937_64 rng(33);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 1 + trial % 4;
    const SpinSystem sys = random_system(rng, n);
    const Matrix h = dense_hamiltonian(sys);
    const Index dim = h.rows();
    Matrix rho(dim, dim);
    for (Index i = 0; i < dim; ++i)
      for (Index j = 0; j < dim; ++j) rho(i, j) = Complex(g(rng), g(rng));
    const Vector lhs = dense_liouvillian(sys) * dense_vectorize(rho);
    const Vector rhs = dense_vectorize(h * rho - rho * h);
    CHECK(rel_diff(lhs, rhs) <= 1e-13);
    CHECK(rel_diff(dense_unvectorize(dense_vectorize(rho), n), rho) == 0.0);
  }
  SpinSystem one{{{"N", "15N", 50.0}}, {}, 1.0};
  Matrix expect = Matrix::Zero(4, 4);
  expect(1, 1) = kTwoPi * 50.0;
  expect(2, 2) = -kTwoPi * 50.0;
  CHECK(rel_diff(dense_liouvillian(one), expect) <= 1e-15);
}

TEST_CASE("shifted operator for one spin") {
  const double nu = 70.0, w = 300.0, mu = 9.0;
  SpinSystem one{{{"N", "15N", nu}}, {}, mu};
  const Matrix m = dense_shifted(dense_liouvillian(one), w, mu);
  const double a = kTwoPi * nu;
  Matrix expect = Matrix::Zero(4, 4);
  expect(0, 0) = w * w + mu * mu;
  expect(1, 1) = (a + w) * (a + w) + mu * mu;
  expect(2, 2) = (a - w) * (a - w) + mu * mu;
  expect(3, 3) = w * w + mu * mu;
  CHECK(rel_diff(m, expect) <= 1e-15);
}

TEST_CASE("single spin spectrum is a Lorentzian") {
  // Detected vector s+ sits in the (0,1) coherence, where L = 2 pi nu, so
  // the line is centred at omega = -2 pi nu with unit weight.
  const double nu = -300.0, mu = 15.0;
  SpinSystem one{{{"N", "15N", nu}}, {}, mu};
  const auto grid = linspace(-kTwoPi * 400.0, kTwoPi * 100.0, 301);
  const auto o = dense_spectrum(one, grid, mu, "15N");
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double x = grid[k] + kTwoPi * nu;
    CHECK(o[k] == doctest::Approx(mu / (x * x + mu * mu)).epsilon(1e-12));
  }
}

TEST_CASE("spectrum evaluation routes agree") {
  std::mt19937_64 rng(34);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 1 + trial % 4;
    SpinSystem sys = random_system(rng, n, 0.6, 500.0);
    sys.damping_mu = 5.0 + trial;
    const std::string iso = sys.spins.back().isotope;
    const auto grid = linspace(-kTwoPi * 800.0, kTwoPi * 800.0, 41);
    const auto direct = dense_spectrum(sys, grid, sys.damping_mu, iso);
    const auto eig =
        dense_spectrum(sys, grid, sys.damping_mu, iso, SpectrumMethod::eigen);
    const auto res =
        dense_spectrum(sys, grid, sys.damping_mu, iso, SpectrumMethod::resolvent);
    double peak = 0.0;
    for (double v : direct) peak = std::max(peak, std::abs(v));
    for (std::size_t k = 0; k < grid.size(); ++k) {
      CHECK(std::abs(direct[k] - res[k]) <= 1e-12 * peak);
      CHECK(std::abs(direct[k] - eig[k]) <= 1e-10 * peak);
      CHECK(std::isfinite(direct[k]));
      CHECK(direct[k] >= -1e-12 * peak);
    }
  }
}

TEST_CASE("heteronuclear doublet splits by J") {
  const SpinSystem sys = load_spin_system(fixture("two_spin_hn.json"));
  const double j = sys.couplings[0].j_hz;
  const double nu = sys.spins[1].offset_hz;
  // Peaks on the -omega/(2 pi) axis at nu +- J/2.
  const auto grid = linspace(-kTwoPi * (nu + 100.0), -kTwoPi * (nu - 100.0), 2001);
  const auto o = dense_spectrum(sys, grid, sys.damping_mu, "15N");
  std::vector<double> peaks;
  for (std::size_t k = 1; k + 1 < o.size(); ++k) {
    if (o[k] > o[k - 1] && o[k] >= o[k + 1]) peaks.push_back(-grid[k] / kTwoPi);
  }
  REQUIRE(peaks.size() == 2);
  std::sort(peaks.begin(), peaks.end());
  CHECK(peaks[1] - peaks[0] == doctest::Approx(std::abs(j)).epsilon(2e-3));
  CHECK((peaks[0] + peaks[1]) / 2 == doctest::Approx(nu).epsilon(1e-3));
}

TEST_CASE("N = 5 spectrum is finite everywhere") {
  const SpinSystem sys = load_spin_system(fixture("five_spin.json"));
  const auto grid = linspace(-kTwoPi * 400.0, kTwoPi * 400.0, 9);
  for (double v : dense_spectrum(sys, grid, sys.damping_mu, "15N")) {
    CHECK(std::isfinite(v));
  }
}
