#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ttspin/tt.hpp"

namespace ttspin {

enum class LocalSolver {
  /// Dense Cholesky up to direct_threshold unknowns, CG above.
  automatic,
  direct,
  iterative,
};

struct SolverConfig {
  double rel_tolerance = 1e-6;
  Index enrichment_rank = 3;
  std::size_t max_sweeps = 50;
  LocalSolver local_solver = LocalSolver::automatic;
  Index direct_threshold = 2500;
  /// Defaults to a seeded random rank-1 train.
  std::optional<TTVector> initial_guess;
  std::uint64_t seed = 0x5eedu;
  /// Called after every site update with the current iterate.
  std::function<void(std::size_t site, const TTVector& x)> observer;
};

struct SolveReport {
  std::string method;
  std::size_t sweeps_used = 0;
  bool converged = false;
  /// ||b - A x|| / ||b|| after each sweep, computed exactly in TT.
  std::vector<double> residual_history;
  std::vector<RankProfile> rank_history;
  std::vector<double> sweep_ms;
  double final_residual = 0.0;
  std::size_t direct_solves = 0;
  std::size_t iterative_solves = 0;
  double total_ms = 0.0;
};

struct SolveResult {
  TTVector x;
  SolveReport report;
};

/// Solves A x = b for Hermitian positive definite A by one-site updates with
/// residual enrichment. A sweep is one directional pass; directions
/// alternate. Throws Error(singular_local_system) naming the site if a local
/// Cholesky factorization fails.
SolveResult amen_solve(const TTOperator& a, const TTVector& b,
                       const SolverConfig& cfg = {});

/// One-site DMRG: same local problems, no enrichment, ranks frozen at the
/// initial guess.
SolveResult dmrg_solve_one_site(const TTOperator& a, const TTVector& b,
                                const SolverConfig& cfg = {});

/// ||b - A x|| / ||b||, exact (no rounding).
double relative_residual(const TTOperator& a, const TTVector& x,
                         const TTVector& b);

std::string to_json(const SolveReport& report);

} // namespace ttspin
