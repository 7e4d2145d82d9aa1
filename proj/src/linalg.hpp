#pragma once

// Internal helpers shared by the tensor train algorithms.

#include <algorithm>
#include <utility>
#include <vector>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "ttspin/tt.hpp"

namespace ttspin::detail {

struct ThinQR {
  Matrix q;
  Matrix r;
};

inline ThinQR thin_qr(const Matrix& m) {
  const Index k = std::min(m.rows(), m.cols());
  Eigen::HouseholderQR<Matrix> qr(m);
  ThinQR out;
  out.q = qr.householderQ() * Matrix::Identity(m.rows(), k);
  out.r = qr.matrixQR().topRows(k).triangularView<Eigen::Upper>();
  return out;
}

struct ThinSVD {
  Matrix u;
  Eigen::VectorXd s;
  Matrix v;
};

/// Thin SVD. A QR of the tall side feeds a one-sided Jacobi SVD of the
/// small square factor; BDCSVD in Eigen 3.4 can lose accuracy in deflation
/// on the rank-deficient unfoldings produced by additions.
inline ThinSVD thin_svd(const Matrix& m) {
  ThinSVD out;
  if (m.rows() >= m.cols()) {
    ThinQR f = thin_qr(m);
    Eigen::JacobiSVD<Matrix> j(f.r, Eigen::ComputeFullU | Eigen::ComputeFullV);
    out.u = f.q * j.matrixU();
    out.s = j.singularValues();
    out.v = j.matrixV();
  } else {
    ThinQR f = thin_qr(m.adjoint());
    Eigen::JacobiSVD<Matrix> j(f.r, Eigen::ComputeFullU | Eigen::ComputeFullV);
    out.u = j.matrixV();
    out.s = j.singularValues();
    out.v = f.q * j.matrixU();
  }
  return out;
}

/// Smallest rank whose discarded tail has Frobenius norm <= delta; at least 1.
template <typename Singular>
Index truncation_rank(const Singular& s, double delta) {
  const Index n = s.size();
  double tail = 0.0;
  Index keep = n;
  while (keep > 1) {
    const double next = tail + s[keep - 1] * s[keep - 1];
    if (next > delta * delta) break;
    tail = next;
    --keep;
  }
  return std::max<Index>(keep, 1);
}

/// Left-orthonormalize core n and push the triangular factor into core n+1.
inline void push_gauge_right(std::vector<Core>& cores, std::size_t n) {
  const Core& c = cores[n];
  ThinQR f = thin_qr(c.left_unfolding());
  Core& next = cores[n + 1];
  next = Core::from_right_unfolding(f.r * next.right_unfolding(), next.mode(),
                                    next.right());
  cores[n] = Core::from_left_unfolding(f.q, c.left(), c.mode());
}

/// Right-orthonormalize core n and push the factor into core n-1.
inline void push_gauge_left(std::vector<Core>& cores, std::size_t n) {
  const Core rev = cores[n].reversed();
  ThinQR f = thin_qr(rev.left_unfolding());
  Core& prev = cores[n - 1];
  prev = Core::from_left_unfolding(prev.left_unfolding() * f.r.transpose(),
                                   prev.left(), prev.mode());
  cores[n] = Core::from_left_unfolding(f.q, rev.left(), rev.mode()).reversed();
}

// Sweep helpers. A core is "oriented" when a right-to-left pass sees it
// reversed, so both directions run the same left-to-right code.

inline Core oriented(const Core& c, int dir) {
  return dir > 0 ? c : c.reversed();
}

inline Core orthonormal_part(const Core& c) {
  return Core::from_left_unfolding(thin_qr(c.left_unfolding()).q, c.left(),
                                   c.mode());
}

/// sum_i z_i^H env x_i
inline Matrix advance_cross(const Matrix& env, const Core& z, const Core& x) {
  Matrix out = Matrix::Zero(z.right(), x.right());
  for (Index i = 0; i < z.mode(); ++i) {
    out.noalias() += z.slice(i).adjoint() * (env * x.slice(i));
  }
  return out;
}

/// Slices behind * x_i * ahead^T.
inline Core sandwich(const Matrix& behind, const Core& x, const Matrix& ahead) {
  Core out(behind.rows(), x.mode(), ahead.rows());
  for (Index i = 0; i < x.mode(); ++i) {
    out.slice(i) = behind * x.slice(i) * ahead.transpose();
  }
  return out;
}

/// Bond ranks of a random start tensor, clipped to what the modes allow.
inline std::vector<Index> clipped_ranks(const std::vector<Index>& modes,
                                        Index rank) {
  const std::size_t n = modes.size();
  std::vector<Index> r(n + 1, 1);
  Index left = 1;
  for (std::size_t b = 1; b < n; ++b) {
    left = std::min(left * modes[b - 1], rank);
    r[b] = left;
  }
  Index right = 1;
  for (std::size_t b = n - 1; b >= 1; --b) {
    right = std::min(right * modes[b], rank);
    r[b] = std::min(r[b], right);
  }
  return r;
}

} // namespace ttspin::detail
