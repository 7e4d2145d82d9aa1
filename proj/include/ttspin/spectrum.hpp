#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ttspin/amen_solve.hpp"
#include "ttspin/amen_sum.hpp"
#include "ttspin/spin_model.hpp"
#include "ttspin/tt.hpp"

namespace ttspin {

struct Liouvillian {
  /// rho -> [H, rho]
  TTOperator hcomm;
  /// hcomm composed with itself, rounded.
  TTOperator hcomm_sq;
  SummationReport summation;
};

Liouvillian build_liouvillian(const SpinSystem& sys, double op_round_tol);

/// round(hcomm_sq + 2 omega hcomm + (omega^2 + mu^2) 1), i.e. the train of
/// (L + omega)^2 + mu^2.
TTOperator assemble_shifted(const TTOperator& hcomm, const TTOperator& hcomm_sq,
                            double omega, double mu, double op_round_tol);

enum class SolverKind { amen, dmrg };

struct SpectrumRequest {
  SpinSystem system;
  std::string isotope;
  /// Angular frequencies in rad/s, strictly increasing.
  std::vector<double> omega_grid;
  SolverConfig solver;
  SolverKind method = SolverKind::amen;
  /// Defaults to min(solver.rel_tolerance / 10, 1e-14): the damping mu^2
  /// is tiny next to the Frobenius norm of (L + omega)^2, so a looser
  /// rounding of the operator swamps the line shapes.
  std::optional<double> op_round_tol;
  bool warm_start = true;
  /// Worker threads; 0 picks the hardware concurrency.
  unsigned threads = 1;
  /// Grid points per warm-started chain. Fixed independently of `threads`
  /// so results do not depend on the thread count.
  std::size_t chunk = 25;
};

enum class PointStatus { ok, not_converged, failed };

struct SpectrumPoint {
  double omega = 0.0;
  /// mu * Re <rho0, y>; NaN when the solve threw.
  double amplitude = 0.0;
  /// |mu * Im <rho0, y>|, zero up to rounding for a Hermitian problem.
  double imag_residue = 0.0;
  PointStatus status = PointStatus::ok;
  std::string error;
  SolveReport report;
};

struct SpectrumResult {
  std::vector<SpectrumPoint> points;
  RankProfile hcomm_ranks;
  RankProfile hcomm_sq_ranks;
  double op_round_tol = 0.0;
  double assembly_ms = 0.0;
  double total_ms = 0.0;

  std::size_t converged_points() const;
};

/// Solves ((L + omega)^2 + mu^2) y = rho0 at every grid point, rho0 the
/// vectorized S+ of the detected isotope, and reports mu * <rho0, y>. A
/// single spin at offset nu gives a Lorentzian centred at omega = -2 pi nu.
SpectrumResult spectrum(const SpectrumRequest& req);

/// Columns omega_rad_s, freq_hz, amplitude, sweeps, residual, eff_rank,
/// converged. freq_hz = -omega / (2 pi), so lines sit at +offset.
std::string to_csv(const SpectrumResult& result);
std::string to_json(const SpectrumResult& result);

} // namespace ttspin
