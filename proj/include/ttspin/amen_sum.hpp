#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ttspin/spin_model.hpp"
#include "ttspin/tt.hpp"

namespace ttspin {

struct SummationConfig {
  double rel_tolerance = 1e-12;
  Index enrichment_rank = 4;
  std::size_t max_sweeps = 20;
  /// Defaults to the first term of the sum.
  std::optional<TTOperator> initial_guess;
  std::optional<Index> max_rank;
  std::uint64_t seed = 0x7a11u;
};

struct SummationReport {
  std::string method;
  std::size_t terms = 0;
  std::size_t sweeps_used = 0;
  bool converged = false;
  bool cap_limited = false;
  double final_rel_error_estimate = 0.0;
  /// One entry per sweep (a sweep is one directional pass over the chain).
  std::vector<RankProfile> rank_history;
  std::vector<double> error_history;
  std::vector<double> update_history;
  std::vector<double> sweep_ms;
  /// Binary summation only: largest intermediate ranks after and before
  /// each recompression.
  std::optional<RankProfile> max_intermediate;
  std::optional<RankProfile> max_intermediate_unrounded;
  double setup_ms = 0.0;
  double total_ms = 0.0;
};

struct SummationResult {
  TTOperator tt;
  SummationReport report;
};

/// Alternating projection of a Kronecker-term sum onto a TT with residual
/// enrichment. Sweeps alternate direction; stops once the relative update
/// of every core in a sweep is below rel_tolerance, then runs one last
/// sweep without enrichment to drop the auxiliary directions.
SummationResult amen_sum(const CPOperatorSum& terms,
                         const SummationConfig& cfg = {});

/// Pairwise add + round in balanced-tree order.
SummationResult binary_sum(const CPOperatorSum& terms,
                           const TruncationPolicy& policy = {});

std::string to_json(const SummationReport& report);

} // namespace ttspin
