#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ttspin/error.hpp"

namespace ttspin {

using Complex = std::complex<double>;
using Index = Eigen::Index;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;

/// Order-3 core of shape (left, mode, right).
///
/// Storage is column-major with the left rank running fastest, i.e. entry
/// (a, i, b) lives at a + left*(i + mode*b). The left unfolding
/// (left*mode x right) and the right unfolding (left x mode*right) are then
/// both views of the same buffer.
class Core {
public:
  Core() = default;
  Core(Index left, Index mode, Index right);
  Core(Index left, Index mode, Index right, Vector data);

  static Core from_left_unfolding(const Matrix& m, Index left, Index mode);
  static Core from_right_unfolding(const Matrix& m, Index mode, Index right);

  Index left() const noexcept { return left_; }
  Index mode() const noexcept { return mode_; }
  Index right() const noexcept { return right_; }
  Index size() const noexcept { return data_.size(); }

  Complex& operator()(Index a, Index i, Index b) {
    return data_[a + left_ * (i + mode_ * b)];
  }
  const Complex& operator()(Index a, Index i, Index b) const {
    return data_[a + left_ * (i + mode_ * b)];
  }

  Eigen::Map<Matrix> left_unfolding() {
    return {data_.data(), left_ * mode_, right_};
  }
  Eigen::Map<const Matrix> left_unfolding() const {
    return {data_.data(), left_ * mode_, right_};
  }
  Eigen::Map<Matrix> right_unfolding() {
    return {data_.data(), left_, mode_ * right_};
  }
  Eigen::Map<const Matrix> right_unfolding() const {
    return {data_.data(), left_, mode_ * right_};
  }

  /// The left x right matrix for a fixed mode index.
  Eigen::Map<const Matrix, 0, Eigen::OuterStride<>> slice(Index i) const {
    return {data_.data() + left_ * i, left_, right_,
            Eigen::OuterStride<>(left_ * mode_)};
  }
  Eigen::Map<Matrix, 0, Eigen::OuterStride<>> slice(Index i) {
    return {data_.data() + left_ * i, left_, right_,
            Eigen::OuterStride<>(left_ * mode_)};
  }

  const Vector& data() const noexcept { return data_; }
  Vector& data() noexcept { return data_; }

  /// Same core with the two rank axes swapped: (right, mode, left).
  Core reversed() const;

private:
  Index left_ = 0;
  Index mode_ = 0;
  Index right_ = 0;
  Vector data_;
};

/// Structural check of a core chain. Returns the first violated invariant,
/// or nullopt if the chain is a valid tensor train.
std::optional<std::string> validate(std::span<const Core> cores);

/// Tensor train with order-3 cores. Values are immutable after
/// construction; operations return new trains.
class TTVector {
public:
  TTVector() = default;
  /// Throws Error(invalid_structure) if the chain is not valid.
  explicit TTVector(std::vector<Core> cores,
                    std::optional<std::size_t> ortho_center = std::nullopt);

  static TTVector zeros(std::span<const Index> modes);
  static TTVector product(std::span<const Vector> factors);
  static TTVector random(std::span<const Index> modes,
                         std::span<const Index> ranks, std::uint64_t seed);

  std::size_t order() const noexcept { return cores_.size(); }
  const std::vector<Core>& cores() const noexcept { return cores_; }
  const Core& core(std::size_t n) const { return cores_.at(n); }
  std::vector<Index> modes() const;
  /// r_0, ..., r_N.
  std::vector<Index> ranks() const;
  std::optional<std::size_t> ortho_center() const noexcept { return center_; }
  Index dense_size() const;

private:
  std::vector<Core> cores_;
  std::optional<std::size_t> center_;
};

/// Tensor train operator. Core n is stored as an order-3 core whose mode
/// combines (out, in) as out + rows[n]*in, so every vector algorithm applies
/// to the operator seen as a vector.
class TTOperator {
public:
  TTOperator() = default;
  TTOperator(TTVector train, std::vector<Index> rows, std::vector<Index> cols);

  static TTOperator identity(std::span<const Index> modes);
  /// Rank-1 operator from one local matrix per site.
  static TTOperator product(std::span<const Matrix> factors);

  std::size_t order() const noexcept { return train_.order(); }
  const TTVector& as_vector() const noexcept { return train_; }
  const std::vector<Index>& rows() const noexcept { return rows_; }
  const std::vector<Index>& cols() const noexcept { return cols_; }
  std::vector<Index> ranks() const { return train_.ranks(); }
  std::optional<std::size_t> ortho_center() const noexcept {
    return train_.ortho_center();
  }
  bool square() const { return rows_ == cols_; }

  /// Entry A(alpha, out, in, beta) of core n.
  Complex element(std::size_t n, Index alpha, Index out, Index in,
                  Index beta) const {
    const Core& c = train_.core(n);
    return c(alpha, out + rows_[n] * in, beta);
  }
  /// The local (rows x cols) block for bond indices (alpha, beta).
  Matrix block(std::size_t n, Index alpha, Index beta) const;

private:
  TTVector train_;
  std::vector<Index> rows_;
  std::vector<Index> cols_;
};

std::optional<std::string> validate(const TTVector& t);
std::optional<std::string> validate(const TTOperator& t);

struct RankProfile {
  std::vector<Index> ranks;
  double effective_rank = 0.0;
};

RankProfile rank_profile(std::span<const Index> ranks);
RankProfile rank_profile(const TTVector& t);
RankProfile rank_profile(const TTOperator& t);

/// Number of local blocks stored, sum of r_{n-1}*r_n.
Index local_block_count(const TTOperator& t);

struct TruncationPolicy {
  /// Relative Frobenius error budget for a whole rounding pass.
  double rel_tolerance = 1e-12;
  std::optional<Index> max_rank;

  /// Budget for a single truncated bond of an N-site train: eps/sqrt(N-1).
  double site_tolerance(std::size_t order) const;
};

template <typename T> struct Rounded {
  T tt;
  /// True if max_rank, not the error target, decided at least one bond.
  bool cap_limited = false;
  /// sqrt of the summed squared discarded singular values; bounds the
  /// Frobenius error of the rounding.
  double discarded = 0.0;
};

TTVector orthogonalize(const TTVector& t, std::size_t center);
TTOperator orthogonalize(const TTOperator& t, std::size_t center);

Rounded<TTVector> round_checked(const TTVector& t, const TruncationPolicy& p);
Rounded<TTOperator> round_checked(const TTOperator& t,
                                  const TruncationPolicy& p);
TTVector round(const TTVector& t, const TruncationPolicy& p);
TTOperator round(const TTOperator& t, const TruncationPolicy& p);

TTVector add(const TTVector& a, const TTVector& b);
TTOperator add(const TTOperator& a, const TTOperator& b);
TTVector scale(const TTVector& a, Complex alpha);
TTOperator scale(const TTOperator& a, Complex alpha);

TTVector apply(const TTOperator& a, const TTVector& x);
TTOperator compose(const TTOperator& a, const TTOperator& b);
TTOperator adjoint(const TTOperator& a);

/// Conjugate-linear in the first argument.
Complex inner(const TTVector& x, const TTVector& y);
double norm(const TTVector& x);
double norm(const TTOperator& a);

/// Entry cap for dense conversions.
inline constexpr Index kDefaultDenseCap = Index{1} << 24;

/// Full vector, site 0 varying slowest.
Vector to_dense(const TTVector& t, Index cap = kDefaultDenseCap);
/// Full matrix in Kronecker order (site 0 slowest on both axes).
Matrix to_dense(const TTOperator& t, Index cap = kDefaultDenseCap);

TTVector from_dense(const Vector& a, std::span<const Index> modes,
                    const TruncationPolicy& p);
TTOperator from_dense(const Matrix& a, std::span<const Index> rows,
                      std::span<const Index> cols, const TruncationPolicy& p);

} // namespace ttspin
