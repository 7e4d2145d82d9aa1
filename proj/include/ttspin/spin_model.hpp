#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "ttspin/tt.hpp"

namespace ttspin {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Spin {
  std::string label;
  std::string isotope;
  double offset_hz = 0.0;
};

struct Coupling {
  std::size_t i = 0;
  std::size_t j = 0;
  double j_hz = 0.0;
};

/// Liquid-state spin-1/2 system: isotropic offsets, scalar couplings and a
/// uniform damping rate mu (rad/s).
struct SpinSystem {
  std::vector<Spin> spins;
  std::vector<Coupling> couplings;
  double damping_mu = 0.0;

  std::size_t size() const noexcept { return spins.size(); }
};

bool is_spin_half_isotope(std::string_view isotope);

/// Throws Error(schema) on the first violated invariant.
void validate(const SpinSystem& sys);

/// Parses and validates the JSON input format. Unknown fields are rejected;
/// syntax errors report line and column.
SpinSystem parse_spin_system(std::string_view json_text);
SpinSystem load_spin_system(const std::filesystem::path& path);
std::string to_json(const SpinSystem& sys);

/// Backbone-like chain (N, H, CA, HA, C per residue) with literature-scale
/// offsets and one-/two-/three-bond couplings; truncated to `spins` nuclei.
SpinSystem synthetic_backbone(std::size_t spins, std::uint64_t seed = 1);

// ---------------------------------------------------------------- operators

/// Spin-1/2 matrices with the factor 1/2: sz = diag(1/2, -1/2), s+ = sx + i sy.
namespace spin_half {
Matrix identity();
Matrix sx();
Matrix sy();
Matrix sz();
Matrix splus();
Matrix sminus();
} // namespace spin_half

enum class OpKind { identity, sx, sy, sz, splus, sminus, custom };

struct LocalOperator {
  OpKind kind = OpKind::custom;
  Matrix matrix;

  static LocalOperator of(OpKind kind);
  static LocalOperator custom(Matrix m);
};

enum class Space { hilbert, liouville };

struct CPTerm {
  Complex coeff{1.0, 0.0};
  /// Sites not present carry the identity.
  std::map<std::size_t, LocalOperator> factors;
};

/// Sum of Kronecker-product terms over a chain of `sites` sites.
struct CPOperatorSum {
  Space space = Space::hilbert;
  std::size_t sites = 0;
  std::vector<CPTerm> terms;

  Index local_dim() const noexcept { return space == Space::hilbert ? 2 : 4; }
};

/// Throws Error(invalid_structure) if a term is empty, out of range, or has
/// a factor of the wrong size.
void validate(const CPOperatorSum& sum);

/// Zeeman, strong (same isotope) and weak (different isotope) coupling
/// terms, in rad/s. No radiofrequency terms.
CPOperatorSum hamiltonian_terms(const SpinSystem& sys);

/// Rank-1 TT operator of a single term; identities on absent sites.
TTOperator term_to_tt(const CPOperatorSum& sum, std::size_t term);

/// Total S_z as a rank-2 train (boundary [sz 1], interior [[1 0][sz 1]],
/// last [1 sz]^T).
TTOperator analytic_total_sz(std::size_t n);
/// Sum over all pairs m > n of sz^(n) sz^(m) as a rank-3 train.
TTOperator analytic_zz_chain(std::size_t n);

/// Kronecker product a (x) b.
Matrix kron(const Matrix& a, const Matrix& b);

/// Row-major vectorization of a single-site matrix: vec(m)[r*cols + c].
Vector vec_rows(const Matrix& m);

/// rho -> [H, rho] on row-major vectorized density matrices. Every Hilbert
/// term maps to +(h (x) 1) and -(1 (x) h^T) per site.
CPOperatorSum commutation_superoperator(const CPOperatorSum& hilbert);

/// Vectorized sum of S+ over spins of the given isotope, rank <= 2.
TTVector detection_state(const SpinSystem& sys, std::string_view isotope);

} // namespace ttspin
