#pragma once

// Brute-force dense reference for small spin systems. Everything here is
// built by explicit basis indexing and never touches the tensor train code.

#include <cstddef>
#include <string_view>
#include <vector>

#include "ttspin/spin_model.hpp"

namespace ttspin::oracle {

struct DenseLimits {
  std::size_t max_hilbert_spins = 12;
  std::size_t max_liouville_spins = 7;
};

/// Sum of the expanded terms. Site 0 is the most significant digit, so the
/// result is in the same Kronecker order as to_dense. Respects the Hilbert or
/// Liouville cap according to sum.space.
Matrix dense_from_terms(const CPOperatorSum& sum, const DenseLimits& lim = {});

/// Hamiltonian in rad/s built directly from offsets and couplings.
Matrix dense_hamiltonian(const SpinSystem& sys, const DenseLimits& lim = {});

/// Index of the row-major vectorized entry rho(r, c) of an n-spin density
/// matrix in the site-ordered Liouville basis (per-site digit 2*r_k + c_k).
Index liouville_index(Index r, Index c, std::size_t n);

/// Site-ordered vector of a 2^n x 2^n operator.
Vector dense_vectorize(const Matrix& rho);
/// Inverse of dense_vectorize.
Matrix dense_unvectorize(const Vector& v, std::size_t n);

/// Commutation superoperator rho -> [H, rho] in the site-ordered basis.
Matrix dense_liouvillian(const SpinSystem& sys, const DenseLimits& lim = {});
Matrix dense_commutator(const Matrix& h);

/// Vectorized total S+ over the spins of one isotope.
Vector dense_detection_state(const SpinSystem& sys, std::string_view isotope,
                             const DenseLimits& lim = {});

/// (L + w)^H (L + w) + mu^2 for Hermitian L, i.e. L^2 + 2wL + (w^2 + mu^2).
Matrix dense_shifted(const Matrix& liouvillian, double omega, double mu);

enum class SpectrumMethod {
  /// One Cholesky solve of the shifted operator per grid point.
  direct,
  /// One Hermitian eigendecomposition of the Liouvillian, then closed form.
  eigen,
  /// Complex resolvent -i <rho|(L - i mu + w)^-1 |rho>, real part.
  resolvent,
};

/// O(w) = mu <rho0| ((L + w)^2 + mu^2)^-1 |rho0>, real part.
std::vector<double> dense_spectrum(const SpinSystem& sys,
                                   const std::vector<double>& omega_grid,
                                   double mu, std::string_view isotope,
                                   SpectrumMethod method = SpectrumMethod::direct,
                                   const DenseLimits& lim = {});

/// Same, for an explicit Liouvillian and detection vector.
std::vector<double> dense_spectrum(const Matrix& liouvillian,
                                   const Vector& rho0,
                                   const std::vector<double>& omega_grid,
                                   double mu, SpectrumMethod method);

} // namespace ttspin::oracle
