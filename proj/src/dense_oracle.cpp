#include "ttspin/dense_oracle.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

namespace ttspin::oracle {

namespace {

void require_cap(std::size_t n, std::size_t cap, const char* space) {
  if (n > cap) {
    throw Error(ErrorCode::dimension_cap,
                "oracle cap exceeded: " + std::to_string(n) + " spins in " +
                    space + " space, limit " + std::to_string(cap));
  }
}

Index ipow(Index base, std::size_t exp) {
  Index out = 1;
  for (std::size_t k = 0; k < exp; ++k) out *= base;
  return out;
}

/// Adds coeff * (x)_k op_k into out, identities on sites not listed. Basis
/// digits are base d with site 0 most significant.
void accumulate(Matrix& out, Complex coeff,
                const std::vector<std::pair<std::size_t, Matrix>>& factors,
                std::size_t n, Index d) {
  const Index dim = ipow(d, n);
  std::vector<Index> stride(n);
  for (std::size_t k = 0; k < n; ++k) stride[k] = ipow(d, n - 1 - k);
  const std::size_t f = factors.size();
  const Index combos = ipow(d, f);
  for (Index col = 0; col < dim; ++col) {
    for (Index combo = 0; combo < combos; ++combo) {
      Index row = col;
      Complex value = coeff;
      Index rest = combo;
      for (std::size_t q = 0; q < f; ++q) {
        const auto& [site, op] = factors[q];
        const Index out_digit = rest % d;
        rest /= d;
        const Index in_digit = (col / stride[site]) % d;
        value *= op(out_digit, in_digit);
        row += (out_digit - in_digit) * stride[site];
      }
      if (value != Complex(0.0, 0.0)) out(row, col) += value;
    }
  }
}

} // namespace

Matrix dense_from_terms(const CPOperatorSum& sum, const DenseLimits& lim) {
  validate(sum);
  if (sum.space == Space::hilbert) {
    require_cap(sum.sites, lim.max_hilbert_spins, "Hilbert");
  } else {
    require_cap(sum.sites, lim.max_liouville_spins, "Liouville");
  }
  const Index d = sum.local_dim();
  const Index dim = ipow(d, sum.sites);
  Matrix out = Matrix::Zero(dim, dim);
  for (const CPTerm& term : sum.terms) {
    std::vector<std::pair<std::size_t, Matrix>> factors;
    for (const auto& [site, op] : term.factors) factors.emplace_back(site, op.matrix);
    accumulate(out, term.coeff, factors, sum.sites, d);
  }
  return out;
}

Matrix dense_hamiltonian(const SpinSystem& sys, const DenseLimits& lim) {
  validate(sys);
  const std::size_t n = sys.size();
  require_cap(n, lim.max_hilbert_spins, "Hilbert");
  const Index dim = ipow(2, n);
  Matrix h = Matrix::Zero(dim, dim);
  for (std::size_t k = 0; k < n; ++k) {
    accumulate(h, kTwoPi * sys.spins[k].offset_hz, {{k, spin_half::sz()}}, n, 2);
  }
  for (const Coupling& c : sys.couplings) {
    const double w = kTwoPi * c.j_hz;
    if (sys.spins[c.i].isotope == sys.spins[c.j].isotope) {
      for (const Matrix& s : {spin_half::sx(), spin_half::sy(), spin_half::sz()}) {
        accumulate(h, w, {{c.i, s}, {c.j, s}}, n, 2);
      }
    } else {
      accumulate(h, w, {{c.i, spin_half::sz()}, {c.j, spin_half::sz()}}, n, 2);
    }
  }
  return h;
}

Index liouville_index(Index r, Index c, std::size_t n) {
  Index out = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const Index shift = static_cast<Index>(n - 1 - k);
    const Index rk = (r >> shift) & 1;
    const Index ck = (c >> shift) & 1;
    out = 4 * out + 2 * rk + ck;
  }
  return out;
}

namespace {

std::size_t log2_dim(Index dim) {
  std::size_t n = 0;
  while ((Index{1} << n) < dim) ++n;
  if ((Index{1} << n) != dim) {
    throw Error(ErrorCode::invalid_argument,
                "dimension " + std::to_string(dim) + " is not a power of two");
  }
  return n;
}

} // namespace

Vector dense_vectorize(const Matrix& rho) {
  const std::size_t n = log2_dim(rho.rows());
  Vector v(rho.size());
  for (Index r = 0; r < rho.rows(); ++r)
    for (Index c = 0; c < rho.cols(); ++c) v[liouville_index(r, c, n)] = rho(r, c);
  return v;
}

Matrix dense_unvectorize(const Vector& v, std::size_t n) {
  const Index dim = ipow(2, n);
  Matrix rho(dim, dim);
  for (Index r = 0; r < dim; ++r)
    for (Index c = 0; c < dim; ++c) rho(r, c) = v[liouville_index(r, c, n)];
  return rho;
}

Matrix dense_commutator(const Matrix& h) {
  const Index dim = h.rows();
  const std::size_t n = log2_dim(dim);
  std::vector<Index> idx(dim * dim);
  for (Index r = 0; r < dim; ++r)
    for (Index c = 0; c < dim; ++c) idx[r * dim + c] = liouville_index(r, c, n);
  Matrix l = Matrix::Zero(dim * dim, dim * dim);
  for (Index r = 0; r < dim; ++r) {
    for (Index c = 0; c < dim; ++c) {
      const Index row = idx[r * dim + c];
      for (Index k = 0; k < dim; ++k) {
        l(row, idx[k * dim + c]) += h(r, k);
        l(row, idx[r * dim + k]) -= h(k, c);
      }
    }
  }
  return l;
}

Matrix dense_liouvillian(const SpinSystem& sys, const DenseLimits& lim) {
  require_cap(sys.size(), lim.max_liouville_spins, "Liouville");
  return dense_commutator(dense_hamiltonian(sys, lim));
}

Vector dense_detection_state(const SpinSystem& sys, std::string_view isotope,
                             const DenseLimits& lim) {
  validate(sys);
  const std::size_t n = sys.size();
  require_cap(n, lim.max_liouville_spins, "Liouville");
  const Index dim = ipow(2, n);
  Matrix s = Matrix::Zero(dim, dim);
  bool any = false;
  for (std::size_t k = 0; k < n; ++k) {
    if (sys.spins[k].isotope != isotope) continue;
    accumulate(s, 1.0, {{k, spin_half::splus()}}, n, 2);
    any = true;
  }
  if (!any) {
    throw Error(ErrorCode::invalid_argument,
                "no spin of isotope " + std::string(isotope));
  }
  return dense_vectorize(s);
}

Matrix dense_shifted(const Matrix& liouvillian, double omega, double mu) {
  Matrix m = liouvillian * liouvillian + 2.0 * omega * liouvillian;
  m.diagonal().array() += omega * omega + mu * mu;
  return m;
}

namespace {

bool is_real(const Matrix& m) { return m.imag().isZero(0.0); }
bool is_real(const Vector& v) { return v.imag().isZero(0.0); }

std::vector<double> spectrum_direct(const Matrix& l, const Vector& rho0,
                                    const std::vector<double>& grid,
                                    double mu) {
  std::vector<double> out;
  out.reserve(grid.size());
  if (is_real(l) && is_real(rho0)) {
    const Eigen::MatrixXd lr = l.real();
    const Eigen::MatrixXd sq = lr * lr;
    const Eigen::VectorXd b = rho0.real();
    for (double w : grid) {
      Eigen::MatrixXd m = sq + 2.0 * w * lr;
      m.diagonal().array() += w * w + mu * mu;
      Eigen::LLT<Eigen::MatrixXd> llt(m);
      if (llt.info() != Eigen::Success) {
        throw Error(ErrorCode::singular_local_system,
                    "dense shifted operator is not positive definite");
      }
      Eigen::VectorXd y = llt.solve(b);
      // Refine against the unexpanded product (L + w)^2 + mu^2.
      for (int step = 0; step < 2; ++step) {
        const Eigen::VectorXd ly = lr * y + w * y;
        const Eigen::VectorXd r = b - (lr * ly + w * ly + mu * mu * y);
        y += llt.solve(r);
      }
      out.push_back(mu * b.dot(y));
    }
    return out;
  }
  const Matrix sq = l * l;
  for (double w : grid) {
    Matrix m = sq + 2.0 * w * l;
    m.diagonal().array() += w * w + mu * mu;
    Eigen::LLT<Matrix> llt(m);
    if (llt.info() != Eigen::Success) {
      throw Error(ErrorCode::singular_local_system,
                  "dense shifted operator is not positive definite");
    }
    Vector y = llt.solve(rho0);
    for (int step = 0; step < 2; ++step) {
      const Vector ly = l * y + w * y;
      const Vector r = rho0 - (l * ly + w * ly + mu * mu * y);
      y += llt.solve(r);
    }
    out.push_back(mu * rho0.dot(y).real());
  }
  return out;
}

std::vector<double> spectrum_eigen(const Matrix& l, const Vector& rho0,
                                   const std::vector<double>& grid,
                                   double mu) {
  Eigen::VectorXd lambda;
  Eigen::VectorXd weight;
  if (is_real(l) && is_real(rho0)) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(l.real());
    lambda = es.eigenvalues();
    weight = (es.eigenvectors().transpose() * rho0.real()).array().square();
  } else {
    Eigen::SelfAdjointEigenSolver<Matrix> es(l);
    lambda = es.eigenvalues();
    weight = (es.eigenvectors().adjoint() * rho0).cwiseAbs2();
  }
  std::vector<double> out;
  out.reserve(grid.size());
  for (double w : grid) {
    double acc = 0.0;
    for (Index k = 0; k < lambda.size(); ++k) {
      const double x = lambda[k] + w;
      acc += weight[k] / (x * x + mu * mu);
    }
    out.push_back(mu * acc);
  }
  return out;
}

std::vector<double> spectrum_resolvent(const Matrix& l, const Vector& rho0,
                                       const std::vector<double>& grid,
                                       double mu) {
  std::vector<double> out;
  out.reserve(grid.size());
  const Complex i(0.0, 1.0);
  for (double w : grid) {
    Matrix m = l;
    m.diagonal().array() += w - i * mu;
    Eigen::PartialPivLU<Matrix> lu(m);
    out.push_back((-i * rho0.dot(lu.solve(rho0))).real());
  }
  return out;
}

} // namespace

std::vector<double> dense_spectrum(const Matrix& liouvillian,
                                   const Vector& rho0,
                                   const std::vector<double>& omega_grid,
                                   double mu, SpectrumMethod method) {
  if (!(mu > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "damping mu must be positive");
  }
  switch (method) {
  case SpectrumMethod::direct:
    return spectrum_direct(liouvillian, rho0, omega_grid, mu);
  case SpectrumMethod::eigen:
    return spectrum_eigen(liouvillian, rho0, omega_grid, mu);
  case SpectrumMethod::resolvent:
    return spectrum_resolvent(liouvillian, rho0, omega_grid, mu);
  }
  return {};
}

std::vector<double> dense_spectrum(const SpinSystem& sys,
                                   const std::vector<double>& omega_grid,
                                   double mu, std::string_view isotope,
                                   SpectrumMethod method,
                                   const DenseLimits& lim) {
  const Vector rho0 = dense_detection_state(sys, isotope, lim);
  return dense_spectrum(dense_liouvillian(sys, lim), rho0, omega_grid, mu,
                        method);
}

} // namespace ttspin::oracle
