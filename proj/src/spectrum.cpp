#include "ttspin/spectrum.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <thread>

#include <nlohmann/json.hpp>

namespace ttspin {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

void check(const SpectrumRequest& req) {
  validate(req.system);
  if (req.omega_grid.empty()) {
    throw Error(ErrorCode::invalid_argument, "frequency grid is empty");
  }
  for (std::size_t k = 0; k < req.omega_grid.size(); ++k) {
    if (!std::isfinite(req.omega_grid[k])) {
      throw Error(ErrorCode::invalid_argument, "frequency grid has a non-finite point");
    }
    if (k > 0 && !(req.omega_grid[k] > req.omega_grid[k - 1])) {
      throw Error(ErrorCode::invalid_argument,
                  "frequency grid must be strictly increasing");
    }
  }
  if (req.op_round_tol && !(*req.op_round_tol > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "op_round_tol must be positive");
  }
  if (!(req.system.damping_mu > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "damping_mu must be positive");
  }
  if (req.chunk < 1) {
    throw Error(ErrorCode::invalid_argument, "chunk must be >= 1");
  }
  const bool detected =
      std::any_of(req.system.spins.begin(), req.system.spins.end(),
                  [&](const Spin& s) { return s.isotope == req.isotope; });
  if (!detected) {
    throw Error(ErrorCode::invalid_argument,
                "no spins of detected isotope " + req.isotope);
  }
}

const char* status_name(PointStatus s) {
  switch (s) {
  case PointStatus::ok: return "ok";
  case PointStatus::not_converged: return "not_converged";
  case PointStatus::failed: return "failed";
  }
  return "failed";
}

} // namespace

Liouvillian build_liouvillian(const SpinSystem& sys, double op_round_tol) {
  validate(sys);
  if (!(op_round_tol > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "op_round_tol must be positive");
  }
  const CPOperatorSum terms =
      commutation_superoperator(hamiltonian_terms(sys));
  Liouvillian out;
  if (terms.terms.empty()) {
    const std::vector<Index> modes(sys.size(), 16);
    const std::vector<Index> dims(sys.size(), 4);
    out.hcomm = TTOperator(TTVector::zeros(modes), dims, dims);
    out.hcomm_sq = out.hcomm;
    out.summation.method = "amen";
    out.summation.converged = true;
    return out;
  }
  SummationConfig cfg;
  cfg.rel_tolerance = op_round_tol;
  SummationResult s = amen_sum(terms, cfg);
  out.hcomm = std::move(s.tt);
  out.summation = std::move(s.report);
  out.hcomm_sq = round(compose(out.hcomm, out.hcomm),
                       TruncationPolicy{op_round_tol, std::nullopt});
  return out;
}

TTOperator assemble_shifted(const TTOperator& hcomm, const TTOperator& hcomm_sq,
                            double omega, double mu, double op_round_tol) {
  if (!(mu > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "mu must be positive");
  }
  const TTOperator id = TTOperator::identity(hcomm.rows());
  TTOperator sum = add(hcomm_sq, scale(hcomm, 2.0 * omega));
  sum = add(sum, scale(id, omega * omega + mu * mu));
  return round(sum, TruncationPolicy{op_round_tol, std::nullopt});
}

std::size_t SpectrumResult::converged_points() const {
  return static_cast<std::size_t>(
      std::count_if(points.begin(), points.end(), [](const SpectrumPoint& p) {
        return p.status == PointStatus::ok;
      }));
}

SpectrumResult spectrum(const SpectrumRequest& req) {
  check(req);
  const auto t0 = Clock::now();
  const double eps = req.solver.rel_tolerance;
  const double tol = req.op_round_tol.value_or(std::min(eps / 10.0, 1e-14));
  const double mu = req.system.damping_mu;

  SpectrumResult res;
  res.op_round_tol = tol;
  const Liouvillian liou = build_liouvillian(req.system, tol);
  res.hcomm_ranks = rank_profile(liou.hcomm);
  res.hcomm_sq_ranks = rank_profile(liou.hcomm_sq);
  const TTVector rho0 = detection_state(req.system, req.isotope);
  res.assembly_ms = ms_since(t0);

  const std::size_t npts = req.omega_grid.size();
  res.points.resize(npts);
  auto run_chunk = [&](std::size_t c) {
    const std::size_t first = c * req.chunk;
    const std::size_t last = std::min(npts, first + req.chunk);
    std::optional<TTVector> prev;
    for (std::size_t k = first; k < last; ++k) {
      SpectrumPoint& p = res.points[k];
      p.omega = req.omega_grid[k];
      try {
        const TTOperator a =
            assemble_shifted(liou.hcomm, liou.hcomm_sq, p.omega, mu, tol);
        SolverConfig cfg = req.solver;
        if (req.warm_start && prev) cfg.initial_guess = prev;
        SolveResult s = req.method == SolverKind::amen
                            ? amen_solve(a, rho0, cfg)
                            : dmrg_solve_one_site(a, rho0, cfg);
        const Complex o = mu * inner(rho0, s.x);
        p.amplitude = o.real();
        p.imag_residue = std::abs(o.imag());
        p.report = std::move(s.report);
        p.status = p.report.converged ? PointStatus::ok
                                      : PointStatus::not_converged;
        if (p.imag_residue > 10.0 * eps * std::abs(o)) {
          p.status = PointStatus::failed;
          p.error = "imaginary residue above tolerance";
        }
        prev = std::move(s.x);
      } catch (const Error& e) {
        p.amplitude = std::numeric_limits<double>::quiet_NaN();
        p.status = PointStatus::failed;
        p.error = e.what();
        prev.reset();
      }
    }
  };

  const std::size_t chunks = (npts + req.chunk - 1) / req.chunk;
  unsigned workers = req.threads == 0 ? std::thread::hardware_concurrency()
                                      : req.threads;
  workers = static_cast<unsigned>(
      std::clamp<std::size_t>(workers, 1, chunks));
  if (workers == 1) {
    for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t c = next++; c < chunks; c = next++) run_chunk(c);
      });
    }
    for (auto& t : pool) t.join();
  }
  res.total_ms = ms_since(t0);
  return res;
}

std::string to_csv(const SpectrumResult& result) {
  std::string out = "omega_rad_s,freq_hz,amplitude,sweeps,residual,eff_rank,converged\n";
  char line[256];
  for (const SpectrumPoint& p : result.points) {
    const double eff = p.report.rank_history.empty()
                           ? 0.0
                           : p.report.rank_history.back().effective_rank;
    std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%zu,%.6e,%.6g,%d\n",
                  p.omega, -p.omega / kTwoPi, p.amplitude, p.report.sweeps_used,
                  p.report.final_residual, eff,
                  p.status == PointStatus::ok ? 1 : 0);
    out += line;
  }
  return out;
}

std::string to_json(const SpectrumResult& result) {
  nlohmann::json j;
  j["points"] = result.points.size();
  j["converged_points"] = result.converged_points();
  j["op_round_tol"] = result.op_round_tol;
  j["hcomm"] = {{"ranks", result.hcomm_ranks.ranks},
                {"effective_rank", result.hcomm_ranks.effective_rank}};
  j["hcomm_sq"] = {{"ranks", result.hcomm_sq_ranks.ranks},
                   {"effective_rank", result.hcomm_sq_ranks.effective_rank}};
  j["timings_ms"] = {{"assembly", result.assembly_ms}, {"total", result.total_ms}};
  nlohmann::json pts = nlohmann::json::array();
  for (const SpectrumPoint& p : result.points) {
    nlohmann::json q;
    q["omega_rad_s"] = p.omega;
    q["status"] = status_name(p.status);
    if (!p.error.empty()) q["error"] = p.error;
    q["imag_residue"] = p.imag_residue;
    q["sweeps"] = p.report.sweeps_used;
    q["residual_history"] = p.report.residual_history;
    q["total_ms"] = p.report.total_ms;
    pts.push_back(std::move(q));
  }
  j["per_point"] = std::move(pts);
  return j.dump(2);
}

} // namespace ttspin
