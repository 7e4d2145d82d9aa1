#pragma once

#include <string>
#include <vector>

#include "ttspin/dense_oracle.hpp"
#include "ttspin/spin_model.hpp"

namespace ttspin {

struct ValidationCheck {
  std::string name;
  /// "operator" for exact constructions, "spectrum" for solver output.
  std::string kind;
  /// Relative deviation from the dense reference (Frobenius, or max over
  /// the grid relative to the peak for spectra).
  double deviation = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;
  double max_deviation = 0.0;
  double max_operator_deviation = 0.0;
  double max_spectrum_deviation = 0.0;
  bool passed = true;
  double total_ms = 0.0;
};

struct ValidationConfig {
  /// Solver tolerance for the spectrum check; spectra must agree to 100x.
  /// Below ~1e-10 the squared shifted operator is too ill-conditioned for
  /// double precision to reach the residual near sharp lines.
  double spectrum_eps = 1e-6;
  /// Rounding tolerance for the operator trains; they must agree to 100x.
  double operator_eps = 1e-12;
  std::size_t grid_points = 48;
  oracle::DenseLimits limits;
};

/// Compares every TT construction for `sys` with its dense counterpart:
/// Hamiltonian, commutation superoperator and its square, detection states
/// and a spectrum per detected isotope. Throws Error(dimension_cap) when
/// the system exceeds the dense limits.
ValidationReport validate_against_oracle(const SpinSystem& sys,
                                         const ValidationConfig& cfg = {});

std::string to_json(const ValidationReport& report);

} // namespace ttspin
