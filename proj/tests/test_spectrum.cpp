#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include "support.hpp"
#include "systems.hpp"
#include "ttspin/dense_oracle.hpp"
#include "ttspin/spectrum.hpp"

using namespace ttspin;
using namespace testing_support;

namespace {

std::vector<double> hz_grid(double lo_hz, double hi_hz, std::size_t n) {
  // Ascending in omega, i.e. descending in Hz under freq = -omega / 2pi.
  std::vector<double> g(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = n == 1 ? 0.0 : double(k) / double(n - 1);
    g[k] = -kTwoPi * (hi_hz - (hi_hz - lo_hz) * t);
  }
  return g;
}

std::vector<double> amplitudes(const SpectrumResult& r) {
  std::vector<double> out;
  for (const auto& p : r.points) out.push_back(p.amplitude);
  return out;
}

double peak(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double max_dev(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

SpectrumRequest request(const SpinSystem& sys, const std::string& iso,
                        std::vector<double> grid, double eps) {
  SpectrumRequest req;
  req.system = sys;
  req.isotope = iso;
  req.omega_grid = std::move(grid);
  req.solver.rel_tolerance = eps;
  return req;
}

double trapezoid(const std::vector<double>& x, const std::vector<double>& y) {
  double s = 0.0;
  for (std::size_t k = 1; k < x.size(); ++k) {
    s += 0.5 * (x[k] - x[k - 1]) * (y[k] + y[k - 1]);
  }
  return s;
}

} // namespace

TEST_CASE("single-spin commutation superoperator") {
  const double nu = -73.0;
  SpinSystem one{{{"N", "15N", nu}}, {}, 10.0};
  const Liouvillian l = build_liouvillian(one, 1e-14);
  Matrix expect = Matrix::Zero(4, 4);
  expect(1, 1) = kTwoPi * nu;
  expect(2, 2) = -kTwoPi * nu;
  CHECK((to_dense(l.hcomm) - expect).norm() <= 1e-12 * expect.norm());
  CHECK(rel_diff(to_dense(l.hcomm), oracle::dense_liouvillian(one)) <= 1e-14);
}

TEST_CASE("squared superoperator matches the dense square") {
  std::mt19937_64 rng(3);
  for (std::size_t n = 1; n <= 4; ++n) {
    const SpinSystem sys = random_system(rng, n, 0.7);
    const double tol = 1e-12;
    const Liouvillian l = build_liouvillian(sys, tol);
    const Matrix ld = oracle::dense_liouvillian(sys);
    CHECK(rel_diff(to_dense(l.hcomm), ld) <= 10 * tol);
    CHECK(rel_diff(to_dense(l.hcomm_sq), ld * ld) <= 10 * tol);
    const Matrix h = to_dense(l.hcomm);
    CHECK((h - h.adjoint()).norm() <= 1e-12 * h.norm());
  }
}

TEST_CASE("zero Hamiltonian gives the zero superoperator") {
  SpinSystem quiet{{{"A", "1H", 0.0}, {"B", "13C", 0.0}}, {}, 5.0};
  const Liouvillian l = build_liouvillian(quiet, 1e-12);
  CHECK(norm(l.hcomm.as_vector()) == 0.0);
  CHECK(norm(l.hcomm_sq.as_vector()) == 0.0);
  const TTOperator a = assemble_shifted(l.hcomm, l.hcomm_sq, 0.0, 1.0, 1e-12);
  CHECK(rel_diff(to_dense(a), Matrix::Identity(16, 16)) <= 1e-15);
}

TEST_CASE("shifted operator") {
  SUBCASE("single spin is diagonal") {
    const double nu = 41.0, w = -190.0, mu = 7.0;
    SpinSystem one{{{"H", "1H", nu}}, {}, mu};
    const Liouvillian l = build_liouvillian(one, 1e-14);
    const Matrix a = to_dense(assemble_shifted(l.hcomm, l.hcomm_sq, w, mu, 1e-14));
    const double x = kTwoPi * nu;
    Matrix expect = Matrix::Zero(4, 4);
    expect(0, 0) = w * w + mu * mu;
    expect(1, 1) = (x + w) * (x + w) + mu * mu;
    expect(2, 2) = (x - w) * (x - w) + mu * mu;
    expect(3, 3) = w * w + mu * mu;
    CHECK((a - expect).norm() <= 1e-12 * expect.norm());
    CHECK(rel_diff(a, oracle::dense_shifted(oracle::dense_liouvillian(one), w, mu)) <=
          1e-13);
  }
  SUBCASE("spectrum bounded below by mu squared") {
    std::mt19937_64 rng(8);
    for (std::size_t n = 1; n <= 3; ++n) {
      const SpinSystem sys = random_system(rng, n, 0.8);
      const Liouvillian l = build_liouvillian(sys, 1e-14);
      for (double w : {-3000.0, 0.0, 1234.0}) {
        const Matrix a = to_dense(
            assemble_shifted(l.hcomm, l.hcomm_sq, w, sys.damping_mu, 1e-14));
        const Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (a + a.adjoint()));
        const double mu2 = sys.damping_mu * sys.damping_mu;
        CHECK(es.eigenvalues().minCoeff() >= mu2 * (1.0 - 1e-6));
      }
    }
  }
  SUBCASE("mu must be positive") {
    const TTOperator id = TTOperator::identity(std::vector<Index>{4});
    CHECK_THROWS_AS(assemble_shifted(id, id, 0.0, 0.0, 1e-12), Error);
  }
}

TEST_CASE("single spin traces a Lorentzian") {
  const double nu = 120.0, mu = 9.0;
  SpinSystem one{{{"N", "15N", nu}}, {}, mu};
  const auto grid = hz_grid(60.0, 180.0, 61);
  SpectrumRequest req = request(one, "15N", grid, 1e-12);
  const auto got = amplitudes(spectrum(req));

  // Line position and scale read off the dense reference.
  const double w0 = -kTwoPi * nu;
  const double c = oracle::dense_spectrum(one, {w0}, mu, "15N")[0] * mu;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double d = grid[k] - w0;
    const double closed = c * mu / (d * d + mu * mu);
    CHECK(std::abs(got[k] - closed) <= 1e-10 * c / mu);
  }
  const auto top = std::max_element(got.begin(), got.end()) - got.begin();
  CHECK(std::abs(-grid[top] / kTwoPi - nu) <= 1.0);
}

TEST_CASE("heteronuclear pair gives a doublet split by J") {
  const SpinSystem hn = load_spin_system(fixture("two_spin_hn.json"));
  REQUIRE(hn.couplings.size() == 1);
  const double j = hn.couplings[0].j_hz;
  const double nu = hn.spins[0].isotope == "15N" ? hn.spins[0].offset_hz
                                                  : hn.spins[1].offset_hz;
  const double step = 0.25;
  const double lo = nu - std::abs(j), hi = nu + std::abs(j);
  const auto n = static_cast<std::size_t>(std::lround((hi - lo) / step)) + 1;
  const auto grid = hz_grid(lo, hi, n);
  const SpectrumResult r = spectrum(request(hn, "15N", grid, 1e-8));
  const auto got = amplitudes(r);
  const auto ref = oracle::dense_spectrum(hn, grid, hn.damping_mu, "15N");
  CHECK(max_dev(got, ref) <= 1e-4 * peak(ref));

  std::vector<double> peaks_hz;
  for (std::size_t k = 1; k + 1 < got.size(); ++k) {
    if (got[k] > got[k - 1] && got[k] > got[k + 1]) {
      peaks_hz.push_back(-grid[k] / kTwoPi);
    }
  }
  REQUIRE(peaks_hz.size() == 2);
  CHECK(std::abs(std::abs(peaks_hz[0] - peaks_hz[1]) - std::abs(j)) <= step);
  CHECK(std::abs(0.5 * (peaks_hz[0] + peaks_hz[1]) - nu) <= step);
}

TEST_CASE("heavy damping flattens to the bare envelope") {
  SpinSystem sys{{{"N", "15N", 40.0}, {"H", "1H", -25.0}}, {{0, 1, -90.0}}, 2e5};
  const auto grid = hz_grid(-2e5, 2e5, 9);
  const auto got = amplitudes(spectrum(request(sys, "15N", grid, 1e-10)));
  const double rho2 = oracle::dense_detection_state(sys, "15N").squaredNorm();
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double mu = sys.damping_mu;
    const double env = mu * rho2 / (grid[k] * grid[k] + mu * mu);
    CHECK(std::abs(got[k] - env) <= 1e-2 * env);
  }
}

TEST_CASE("random systems match the dense spectrum") {
  std::mt19937_64 rng(17);
  const double eps = 1e-6;
  for (std::size_t n = 2; n <= 5; ++n) {
    const SpinSystem sys = random_system(rng, n, 0.6, 400.0);
    const std::string iso = sys.spins.front().isotope;
    const auto grid = hz_grid(-500.0, 500.0, 30);
    const SpectrumResult r = spectrum(request(sys, iso, grid, eps));
    const auto got = amplitudes(r);
    const auto ref = oracle::dense_spectrum(sys, grid, sys.damping_mu, iso);
    const double dev = max_dev(got, ref) / peak(ref);
    MESSAGE("N=" << n << " max relative deviation " << dev);
    CHECK(r.converged_points() == grid.size());
    CHECK(dev <= 1e-4);
    for (double v : got) CHECK(v >= -1e-4 * peak(ref));
  }
}

TEST_CASE("warm starts do not move converged amplitudes") {
  std::mt19937_64 rng(29);
  const SpinSystem sys = random_system(rng, 3, 0.8, 300.0);
  const std::string iso = sys.spins.front().isotope;
  const double eps = 1e-9;
  SpectrumRequest req = request(sys, iso, hz_grid(-400.0, 400.0, 24), eps);
  const SpectrumResult warm = spectrum(req);
  req.warm_start = false;
  const SpectrumResult cold = spectrum(req);
  const auto a = amplitudes(warm), b = amplitudes(cold);
  CHECK(max_dev(a, b) <= 10 * eps * peak(b));
  std::size_t sw_warm = 0, sw_cold = 0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    sw_warm += warm.points[k].report.sweeps_used;
    sw_cold += cold.points[k].report.sweeps_used;
  }
  CHECK(sw_warm < sw_cold);
}

TEST_CASE("line area does not depend on the damping") {
  SpinSystem sys{{{"N", "15N", 0.0}, {"H", "1H", 300.0}}, {{0, 1, -92.0}}, 1.0};
  // Fine uniform core around the lines, geometrically widening tails.
  std::vector<double> grid;
  for (double w = -1200.0; w <= 1200.0; w += 1.0) grid.push_back(w);
  double h = 1.0;
  for (double w = 1200.0; w < 4e4;) {
    h *= 1.05;
    w += h;
    grid.push_back(w);
    grid.insert(grid.begin(), -w);
  }
  std::vector<double> areas;
  for (double mu : {5.0, 15.0, 50.0}) {
    sys.damping_mu = mu;
    SpectrumRequest req = request(sys, "15N", grid, 1e-10);
    req.chunk = grid.size();
    const auto got = amplitudes(spectrum(req));
    const auto ref = oracle::dense_spectrum(sys, grid, mu, "15N");
    const double area = trapezoid(grid, got);
    CHECK(std::abs(area - trapezoid(grid, ref)) <= 1e-6 * std::abs(area));
    areas.push_back(area);
  }
  for (double a : areas) CHECK(std::abs(a - areas[0]) <= 1e-2 * areas[0]);
}

TEST_CASE("thread count does not change the output") {
  std::mt19937_64 rng(41);
  const SpinSystem sys = random_system(rng, 3, 0.8, 300.0);
  SpectrumRequest req = request(sys, sys.spins.front().isotope,
                                hz_grid(-400.0, 400.0, 17), 1e-8);
  req.chunk = 4;
  req.threads = 1;
  const std::string one = to_csv(spectrum(req));
  req.threads = 3;
  const std::string three = to_csv(spectrum(req));
  CHECK(one == three);
}

TEST_CASE("points that miss the tolerance are flagged, not dropped") {
  const SpinSystem sys = load_spin_system(fixture("four_spin.json"));
  SpectrumRequest req = request(sys, sys.spins.front().isotope,
                                hz_grid(-300.0, 300.0, 5), 1e-12);
  req.solver.max_sweeps = 1;
  req.warm_start = false;
  const SpectrumResult r = spectrum(req);
  REQUIRE(r.points.size() == 5);
  CHECK(r.converged_points() < 5);
  for (const auto& p : r.points) {
    CHECK(std::isfinite(p.amplitude));
    if (p.status != PointStatus::ok) CHECK(p.status == PointStatus::not_converged);
  }
}

TEST_CASE("one-site DMRG is selectable") {
  std::mt19937_64 rng(43);
  const SpinSystem sys = random_system(rng, 2, 1.0, 200.0);
  SpectrumRequest req = request(sys, sys.spins.front().isotope,
                                hz_grid(-250.0, 250.0, 6), 1e-8);
  req.method = SolverKind::dmrg;
  const SpectrumResult r = spectrum(req);
  for (const auto& p : r.points) CHECK(p.report.method == "dmrg");
}

TEST_CASE("request validation") {
  SpinSystem one{{{"N", "15N", 10.0}}, {}, 5.0};
  SpectrumRequest req = request(one, "15N", {}, 1e-6);
  CHECK_THROWS_AS(spectrum(req), Error);
  req.omega_grid = {1.0, 1.0};
  CHECK_THROWS_AS(spectrum(req), Error);
  req.omega_grid = {2.0, 1.0};
  CHECK_THROWS_AS(spectrum(req), Error);
  req.omega_grid = {1.0, NAN};
  CHECK_THROWS_AS(spectrum(req), Error);
  req.omega_grid = {1.0};
  req.isotope = "13C";
  CHECK_THROWS_AS(spectrum(req), Error);
  req.isotope = "15N";
  req.op_round_tol = 0.0;
  CHECK_THROWS_AS(spectrum(req), Error);
  req.op_round_tol.reset();
  req.system.damping_mu = 0.0;
  CHECK_THROWS_AS(spectrum(req), Error);
}

TEST_CASE("CSV and JSON output") {
  SpinSystem one{{{"N", "15N", 10.0}}, {}, 5.0};
  const auto grid = hz_grid(0.0, 20.0, 3);
  const SpectrumResult r = spectrum(request(one, "15N", grid, 1e-10));
  std::istringstream csv(to_csv(r));
  std::string line;
  std::getline(csv, line);
  CHECK(line == "omega_rad_s,freq_hz,amplitude,sweeps,residual,eff_rank,converged");
  std::size_t rows = 0;
  while (std::getline(csv, line)) {
    const double w = std::stod(line.substr(0, line.find(',')));
    const auto rest = line.substr(line.find(',') + 1);
    const double f = std::stod(rest.substr(0, rest.find(',')));
    CHECK(w == grid[rows]);
    CHECK(f == doctest::Approx(-w / kTwoPi).epsilon(1e-15));
    CHECK(line.back() == '1');
    ++rows;
  }
  CHECK(rows == grid.size());

  const auto doc = nlohmann::json::parse(to_json(r));
  CHECK(doc["points"] == grid.size());
  CHECK(doc["converged_points"] == grid.size());
  CHECK(doc["per_point"].size() == grid.size());
  CHECK(doc["per_point"][0]["status"] == "ok");
  CHECK(doc["hcomm"]["ranks"].size() == 2);
}
