#include "ttspin/validate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

#include "ttspin/amen_sum.hpp"
#include "ttspin/spectrum.hpp"

namespace ttspin {

namespace {

double rel(const Matrix& a, const Matrix& b) {
  const double s = b.norm();
  return s == 0.0 ? a.norm() : (a - b).norm() / s;
}

double rel(const Vector& a, const Vector& b) {
  const double s = b.norm();
  return s == 0.0 ? a.norm() : (a - b).norm() / s;
}

/// Hz window holding every line: offsets widened by the total coupling and
/// a few line widths.
std::vector<double> default_grid(const SpinSystem& sys, std::size_t points) {
  double lo = sys.spins.front().offset_hz, hi = lo, jsum = 0.0;
  for (const Spin& s : sys.spins) {
    lo = std::min(lo, s.offset_hz);
    hi = std::max(hi, s.offset_hz);
  }
  for (const Coupling& c : sys.couplings) jsum += std::abs(c.j_hz);
  const double pad = jsum + 4.0 * sys.damping_mu / kTwoPi;
  lo -= pad;
  hi += pad;
  std::vector<double> g(points);
  for (std::size_t k = 0; k < points; ++k) {
    const double t = points == 1 ? 0.5 : double(k) / double(points - 1);
    g[k] = -kTwoPi * (hi - (hi - lo) * t);
  }
  return g;
}

} // namespace

ValidationReport validate_against_oracle(const SpinSystem& sys,
                                         const ValidationConfig& cfg) {
  validate(sys);
  if (!(cfg.spectrum_eps > 0.0) || !(cfg.operator_eps > 0.0) || cfg.grid_points < 1) {
    throw Error(ErrorCode::invalid_argument, "bad validation config");
  }
  if (sys.size() > cfg.limits.max_liouville_spins) {
    throw Error(ErrorCode::dimension_cap,
                "oracle cap exceeded: " + std::to_string(sys.size()) +
                    " spins, dense Liouville space allows at most " +
                    std::to_string(cfg.limits.max_liouville_spins));
  }
  const auto t0 = std::chrono::steady_clock::now();
  ValidationReport rep;
  auto add = [&](std::string name, double dev, double tol) {
    const bool spec = name.rfind("spectrum", 0) == 0;
    rep.checks.push_back(
        {std::move(name), spec ? "spectrum" : "operator", dev, tol, dev <= tol});
  };
  const double op_tol = 100.0 * cfg.operator_eps;

  SummationConfig sc;
  sc.rel_tolerance = cfg.operator_eps;
  const CPOperatorSum h_terms = hamiltonian_terms(sys);
  const Matrix h_ref = oracle::dense_hamiltonian(sys, cfg.limits);
  if (h_terms.terms.empty()) {
    add("hamiltonian", h_ref.norm(), op_tol);
  } else {
    add("hamiltonian", rel(to_dense(amen_sum(h_terms, sc).tt), h_ref), op_tol);
  }

  const Liouvillian liou = build_liouvillian(sys, cfg.operator_eps);
  const Matrix l_ref = oracle::dense_liouvillian(sys, cfg.limits);
  add("liouvillian", rel(to_dense(liou.hcomm), l_ref), op_tol);
  add("liouvillian_squared", rel(to_dense(liou.hcomm_sq), l_ref * l_ref), op_tol);

  std::set<std::string> isotopes;
  for (const Spin& s : sys.spins) isotopes.insert(s.isotope);
  const std::vector<double> grid = default_grid(sys, cfg.grid_points);
  // One eigendecomposition serves the whole grid; cheaper than a solve per
  // point once the Liouville space is a few thousand wide.
  const auto method = sys.size() <= 5 ? oracle::SpectrumMethod::direct
                                      : oracle::SpectrumMethod::eigen;
  for (const std::string& iso : isotopes) {
    const Vector rho_ref = oracle::dense_detection_state(sys, iso, cfg.limits);
    add("detection_state " + iso, rel(to_dense(detection_state(sys, iso)), rho_ref),
        1e-12);

    SpectrumRequest req;
    req.system = sys;
    req.isotope = iso;
    req.omega_grid = grid;
    req.solver.rel_tolerance = cfg.spectrum_eps;
    const SpectrumResult got = spectrum(req);
    const std::vector<double> ref =
        oracle::dense_spectrum(l_ref, rho_ref, grid, sys.damping_mu, method);
    double peak = 0.0, dev = 0.0;
    for (double v : ref) peak = std::max(peak, std::abs(v));
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const double a = got.points[k].amplitude;
      // NaN from a failed point must fail the check.
      dev = std::isfinite(a) ? std::max(dev, std::abs(a - ref[k]))
                             : std::numeric_limits<double>::infinity();
    }
    add("spectrum " + iso, peak == 0.0 ? dev : dev / peak, 100.0 * cfg.spectrum_eps);
  }

  for (const auto& c : rep.checks) {
    rep.max_deviation = std::max(rep.max_deviation, c.deviation);
    double& m = c.kind == "spectrum" ? rep.max_spectrum_deviation
                                     : rep.max_operator_deviation;
    m = std::max(m, c.deviation);
    rep.passed = rep.passed && c.passed;
  }
  rep.total_ms = std::chrono::duration<double, std::milli>(
                     std::chrono::steady_clock::now() - t0)
                     .count();
  return rep;
}

std::string to_json(const ValidationReport& report) {
  nlohmann::json j;
  j["passed"] = report.passed;
  j["max_deviation"] = report.max_deviation;
  j["max_operator_deviation"] = report.max_operator_deviation;
  j["max_spectrum_deviation"] = report.max_spectrum_deviation;
  j["total_ms"] = report.total_ms;
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : report.checks) {
    checks.push_back({{"name", c.name},
                      {"kind", c.kind},
                      {"deviation", c.deviation},
                      {"tolerance", c.tolerance},
                      {"passed", c.passed}});
  }
  j["checks"] = std::move(checks);
  return j.dump(2);
}

} // namespace ttspin
