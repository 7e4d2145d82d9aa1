#pragma once

// Reference helpers for tests: naive element-by-element evaluation of trains,
// independent of the library's own dense conversion.

#include <cstdint>
#include <random>
#include <vector>

#include "ttspin/tt.hpp"

namespace testing_support {

using ttspin::Complex;
using ttspin::Index;
using ttspin::Matrix;
using ttspin::Vector;

inline std::vector<Index> digits(Index flat, const std::vector<Index>& modes) {
  std::vector<Index> d(modes.size());
  for (std::size_t n = modes.size(); n-- > 0;) {
    d[n] = flat % modes[n];
    flat /= modes[n];
  }
  return d;
}

inline Complex entry(const ttspin::TTVector& t, const std::vector<Index>& idx) {
  Matrix acc = Matrix::Identity(1, 1);
  for (std::size_t n = 0; n < t.order(); ++n) {
    acc = acc * Matrix(t.core(n).slice(idx[n]));
  }
  return acc(0, 0);
}

inline Vector naive_dense(const ttspin::TTVector& t) {
  const auto modes = t.modes();
  Index total = 1;
  for (Index m : modes) total *= m;
  Vector out(total);
  for (Index k = 0; k < total; ++k) out[k] = entry(t, digits(k, modes));
  return out;
}

inline Matrix naive_dense(const ttspin::TTOperator& a) {
  const auto& rows = a.rows();
  const auto& cols = a.cols();
  Index nr = 1, nc = 1;
  for (Index m : rows) nr *= m;
  for (Index m : cols) nc *= m;
  Matrix out(nr, nc);
  std::vector<Index> combined(a.order());
  for (Index r = 0; r < nr; ++r) {
    const auto dr = digits(r, rows);
    for (Index c = 0; c < nc; ++c) {
      const auto dc = digits(c, cols);
      for (std::size_t n = 0; n < a.order(); ++n) {
        combined[n] = dr[n] + rows[n] * dc[n];
      }
      out(r, c) = entry(a.as_vector(), combined);
    }
  }
  return out;
}

inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

/// Embeds `op` at `site` of an n-site chain of local dimension d.
inline Matrix embed(const Matrix& op, std::size_t site, std::size_t n,
                    Index d = 2) {
  Matrix acc = Matrix::Identity(1, 1);
  for (std::size_t k = 0; k < n; ++k) {
    acc = kron(acc, k == site ? op : Matrix(Matrix::Identity(d, d)));
  }
  return acc;
}

inline double rel_diff(const Matrix& a, const Matrix& b) {
  const double scale = b.norm();
  return scale == 0.0 ? a.norm() : (a - b).norm() / scale;
}

inline double rel_diff(const Vector& a, const Vector& b) {
  const double scale = b.norm();
  return scale == 0.0 ? a.norm() : (a - b).norm() / scale;
}

struct RandomShape {
  std::vector<Index> modes;
  std::vector<Index> ranks;
};

/// Random small train shape: 1..max_order sites, modes 1..4, ranks 1..4.
inline RandomShape random_shape(std::mt19937_64& rng, int max_order = 5,
                                Index max_rank = 4) {
  std::uniform_int_distribution<int> order_dist(1, max_order);
  std::uniform_int_distribution<Index> mode_dist(1, 4);
  std::uniform_int_distribution<Index> rank_dist(1, max_rank);
  RandomShape s;
  const int n = order_dist(rng);
  s.modes.resize(n);
  s.ranks.assign(n + 1, 1);
  for (auto& m : s.modes) m = mode_dist(rng);
  for (int k = 1; k < n; ++k) s.ranks[k] = rank_dist(rng);
  return s;
}

inline Matrix spin_sz() {
  Matrix m = Matrix::Zero(2, 2);
  m(0, 0) = 0.5;
  m(1, 1) = -0.5;
  return m;
}

} // namespace testing_support
