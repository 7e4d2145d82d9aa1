#include "ttspin/tt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include <Eigen/QR>
#include <Eigen/SVD>

#include "linalg.hpp"

namespace ttspin {

// ---------------------------------------------------------------- Core

Core::Core(Index left, Index mode, Index right)
    : left_(left), mode_(mode), right_(right),
      data_(Vector::Zero(left * mode * right)) {}

Core::Core(Index left, Index mode, Index right, Vector data)
    : left_(left), mode_(mode), right_(right), data_(std::move(data)) {
  if (data_.size() != left * mode * right) {
    throw Error(ErrorCode::invalid_structure,
                "core data size does not match its shape");
  }
}

Core Core::from_left_unfolding(const Matrix& m, Index left, Index mode) {
  Core c(left, mode, m.cols());
  c.left_unfolding() = m;
  return c;
}

Core Core::from_right_unfolding(const Matrix& m, Index mode, Index right) {
  Core c(m.rows(), mode, right);
  c.right_unfolding() = m;
  return c;
}

Core Core::reversed() const {
  Core r(right_, mode_, left_);
  for (Index b = 0; b < right_; ++b)
    for (Index i = 0; i < mode_; ++i)
      for (Index a = 0; a < left_; ++a) r(b, i, a) = (*this)(a, i, b);
  return r;
}

// ---------------------------------------------------------------- validation

std::optional<std::string> validate(std::span<const Core> cores) {
  if (cores.empty()) return "empty core list";
  for (std::size_t n = 0; n < cores.size(); ++n) {
    const Core& c = cores[n];
    if (c.mode() < 1) {
      return "zero mode size at site " + std::to_string(n);
    }
    if (c.left() < 1 || c.right() < 1) {
      return "zero rank at site " + std::to_string(n);
    }
    if (c.data().size() != c.left() * c.mode() * c.right()) {
      return "core data size mismatch at site " + std::to_string(n);
    }
  }
  if (cores.front().left() != 1) {
    return "boundary rank r_0 is " + std::to_string(cores.front().left()) +
           ", expected 1";
  }
  if (cores.back().right() != 1) {
    return "boundary rank r_N is " + std::to_string(cores.back().right()) +
           ", expected 1";
  }
  for (std::size_t n = 0; n + 1 < cores.size(); ++n) {
    if (cores[n].right() != cores[n + 1].left()) {
      std::ostringstream os;
      os << "rank mismatch at bond " << n + 1 << ": " << cores[n].right()
         << " vs " << cores[n + 1].left();
      return os.str();
    }
  }
  return std::nullopt;
}

std::optional<std::string> validate(const TTVector& t) {
  return validate(std::span<const Core>(t.cores()));
}

std::optional<std::string> validate(const TTOperator& t) {
  if (auto err = validate(t.as_vector())) return err;
  if (t.rows().size() != t.order() || t.cols().size() != t.order()) {
    return "operator row/col mode lists do not match the order";
  }
  for (std::size_t n = 0; n < t.order(); ++n) {
    if (t.rows()[n] < 1 || t.cols()[n] < 1) {
      return "zero mode size at site " + std::to_string(n);
    }
    if (t.rows()[n] * t.cols()[n] != t.as_vector().core(n).mode()) {
      return "operator mode factorization mismatch at site " +
             std::to_string(n);
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------- TTVector

TTVector::TTVector(std::vector<Core> cores,
                   std::optional<std::size_t> ortho_center)
    : cores_(std::move(cores)), center_(ortho_center) {
  if (auto err = validate(std::span<const Core>(cores_))) {
    throw Error(ErrorCode::invalid_structure, *err);
  }
  if (center_ && *center_ >= cores_.size()) {
    throw Error(ErrorCode::invalid_argument, "ortho center out of range");
  }
}

TTVector TTVector::zeros(std::span<const Index> modes) {
  std::vector<Core> cores;
  cores.reserve(modes.size());
  for (Index m : modes) cores.emplace_back(1, m, 1);
  return TTVector(std::move(cores));
}

TTVector TTVector::product(std::span<const Vector> factors) {
  std::vector<Core> cores;
  cores.reserve(factors.size());
  for (const Vector& f : factors) cores.emplace_back(1, f.size(), 1, f);
  return TTVector(std::move(cores));
}

TTVector TTVector::random(std::span<const Index> modes,
                          std::span<const Index> ranks, std::uint64_t seed) {
  if (ranks.size() != modes.size() + 1) {
    throw Error(ErrorCode::invalid_argument,
                "random: ranks must have one entry more than modes");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  std::vector<Core> cores;
  for (std::size_t n = 0; n < modes.size(); ++n) {
    Core c(ranks[n], modes[n], ranks[n + 1]);
    for (Index k = 0; k < c.size(); ++k) {
      const double re = gauss(rng);
      const double im = gauss(rng);
      c.data()[k] = Complex(re, im);
    }
    cores.push_back(std::move(c));
  }
  return TTVector(std::move(cores));
}

std::vector<Index> TTVector::modes() const {
  std::vector<Index> m;
  m.reserve(cores_.size());
  for (const Core& c : cores_) m.push_back(c.mode());
  return m;
}

std::vector<Index> TTVector::ranks() const {
  std::vector<Index> r;
  r.reserve(cores_.size() + 1);
  r.push_back(cores_.empty() ? 1 : cores_.front().left());
  for (const Core& c : cores_) r.push_back(c.right());
  return r;
}

Index TTVector::dense_size() const {
  Index total = 1;
  for (const Core& c : cores_) total *= c.mode();
  return total;
}

// ---------------------------------------------------------------- TTOperator

TTOperator::TTOperator(TTVector train, std::vector<Index> rows,
                       std::vector<Index> cols)
    : train_(std::move(train)), rows_(std::move(rows)), cols_(std::move(cols)) {
  if (auto err = validate(*this)) {
    throw Error(ErrorCode::invalid_structure, *err);
  }
}

TTOperator TTOperator::identity(std::span<const Index> modes) {
  std::vector<Matrix> factors;
  for (Index m : modes) factors.push_back(Matrix::Identity(m, m));
  return product(factors);
}

TTOperator TTOperator::product(std::span<const Matrix> factors) {
  std::vector<Core> cores;
  std::vector<Index> rows, cols;
  for (const Matrix& f : factors) {
    Core c(1, f.rows() * f.cols(), 1);
    c.data() = f.reshaped();
    cores.push_back(std::move(c));
    rows.push_back(f.rows());
    cols.push_back(f.cols());
  }
  return TTOperator(TTVector(std::move(cores)), std::move(rows),
                    std::move(cols));
}

Matrix TTOperator::block(std::size_t n, Index alpha, Index beta) const {
  Matrix m(rows_[n], cols_[n]);
  for (Index p = 0; p < cols_[n]; ++p)
    for (Index o = 0; o < rows_[n]; ++o) m(o, p) = element(n, alpha, o, p, beta);
  return m;
}

// ---------------------------------------------------------------- ranks

RankProfile rank_profile(std::span<const Index> ranks) {
  RankProfile rp;
  rp.ranks.assign(ranks.begin(), ranks.end());
  const std::size_t order = ranks.size() > 0 ? ranks.size() - 1 : 0;
  if (order == 0) return rp;
  double sum = 0.0;
  for (std::size_t n = 1; n <= order; ++n) {
    sum += static_cast<double>(ranks[n - 1]) * static_cast<double>(ranks[n]);
  }
  rp.effective_rank = std::sqrt(sum / static_cast<double>(order));
  return rp;
}

RankProfile rank_profile(const TTVector& t) { return rank_profile(t.ranks()); }
RankProfile rank_profile(const TTOperator& t) {
  return rank_profile(t.ranks());
}

Index local_block_count(const TTOperator& t) {
  const auto r = t.ranks();
  Index count = 0;
  for (std::size_t n = 1; n < r.size(); ++n) count += r[n - 1] * r[n];
  return count;
}

double TruncationPolicy::site_tolerance(std::size_t order) const {
  const double bonds = order > 1 ? static_cast<double>(order - 1) : 1.0;
  return rel_tolerance / std::sqrt(bonds);
}

// ---------------------------------------------------------------- gauge

TTVector orthogonalize(const TTVector& t, std::size_t center) {
  if (center >= t.order()) {
    throw Error(ErrorCode::invalid_argument, "orthogonalize: center " +
                                                 std::to_string(center) +
                                                 " out of range");
  }
  std::vector<Core> cores = t.cores();
  for (std::size_t n = 0; n < center; ++n) detail::push_gauge_right(cores, n);
  for (std::size_t n = t.order() - 1; n > center; --n) {
    detail::push_gauge_left(cores, n);
  }
  return TTVector(std::move(cores), center);
}

TTOperator orthogonalize(const TTOperator& t, std::size_t center) {
  return TTOperator(orthogonalize(t.as_vector(), center), t.rows(), t.cols());
}

// ---------------------------------------------------------------- rounding

Rounded<TTVector> round_checked(const TTVector& t, const TruncationPolicy& p) {
  if (p.rel_tolerance < 0.0) {
    throw Error(ErrorCode::invalid_argument, "negative rounding tolerance");
  }
  Rounded<TTVector> out;
  const std::size_t order = t.order();
  std::vector<Core> cores = orthogonalize(t, 0).cores();
  const double total = cores[0].data().norm();
  if (total == 0.0) {
    out.tt = TTVector::zeros(t.modes());
    return out;
  }
  const double delta = p.site_tolerance(order) * total;
  double tail = 0.0;
  for (std::size_t n = 0; n + 1 < order; ++n) {
    const Core& c = cores[n];
    const detail::ThinSVD svd = detail::thin_svd(c.left_unfolding());
    const auto& s = svd.s;
    Index keep = detail::truncation_rank(s, delta);
    if (p.max_rank && keep > *p.max_rank) {
      keep = std::max<Index>(*p.max_rank, 1);
      out.cap_limited = true;
    }
    tail += s.tail(s.size() - keep).squaredNorm();
    Matrix u = svd.u.leftCols(keep);
    Matrix carry = s.head(keep).cast<Complex>().asDiagonal() *
                   svd.v.leftCols(keep).adjoint();
    cores[n + 1] = Core::from_right_unfolding(
        carry * cores[n + 1].right_unfolding(), cores[n + 1].mode(),
        cores[n + 1].right());
    cores[n] = Core::from_left_unfolding(u, c.left(), c.mode());
  }
  out.tt = TTVector(std::move(cores), order - 1);
  out.discarded = std::sqrt(tail);
  return out;
}

Rounded<TTOperator> round_checked(const TTOperator& t,
                                  const TruncationPolicy& p) {
  auto r = round_checked(t.as_vector(), p);
  return {TTOperator(std::move(r.tt), t.rows(), t.cols()), r.cap_limited,
          r.discarded};
}

TTVector round(const TTVector& t, const TruncationPolicy& p) {
  return round_checked(t, p).tt;
}

TTOperator round(const TTOperator& t, const TruncationPolicy& p) {
  return round_checked(t, p).tt;
}

// ---------------------------------------------------------------- arithmetic

namespace {

void require_same_modes(const TTVector& a, const TTVector& b,
                        const char* what) {
  if (a.modes() != b.modes()) {
    throw Error(ErrorCode::mode_mismatch,
                std::string(what) + ": mode sizes differ");
  }
}

void require_same_shape(const TTOperator& a, const TTOperator& b,
                        const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error(ErrorCode::mode_mismatch,
                std::string(what) + ": operator mode sizes differ");
  }
}

} // namespace

TTVector add(const TTVector& a, const TTVector& b) {
  require_same_modes(a, b, "add");
  const std::size_t order = a.order();
  if (order == 1) {
    Core c = a.core(0);
    c.data() += b.core(0).data();
    return TTVector({std::move(c)});
  }
  std::vector<Core> cores;
  cores.reserve(order);
  for (std::size_t n = 0; n < order; ++n) {
    const Core& x = a.core(n);
    const Core& y = b.core(n);
    const bool first = n == 0;
    const bool last = n + 1 == order;
    const Index left = first ? 1 : x.left() + y.left();
    const Index right = last ? 1 : x.right() + y.right();
    const Index yl = first ? 0 : x.left();
    const Index yr = last ? 0 : x.right();
    Core c(left, x.mode(), right);
    for (Index r = 0; r < x.right(); ++r)
      for (Index i = 0; i < x.mode(); ++i)
        for (Index l = 0; l < x.left(); ++l) c(l, i, r) = x(l, i, r);
    for (Index r = 0; r < y.right(); ++r)
      for (Index i = 0; i < y.mode(); ++i)
        for (Index l = 0; l < y.left(); ++l) c(yl + l, i, yr + r) = y(l, i, r);
    cores.push_back(std::move(c));
  }
  return TTVector(std::move(cores));
}

TTOperator add(const TTOperator& a, const TTOperator& b) {
  require_same_shape(a, b, "add");
  return TTOperator(add(a.as_vector(), b.as_vector()), a.rows(), a.cols());
}

TTVector scale(const TTVector& a, Complex alpha) {
  std::vector<Core> cores = a.cores();
  const std::size_t target = a.ortho_center().value_or(0);
  cores[target].data() *= alpha;
  return TTVector(std::move(cores), a.ortho_center());
}

TTOperator scale(const TTOperator& a, Complex alpha) {
  return TTOperator(scale(a.as_vector(), alpha), a.rows(), a.cols());
}

TTVector apply(const TTOperator& a, const TTVector& x) {
  if (a.order() != x.order() || a.cols() != x.modes()) {
    throw Error(ErrorCode::mode_mismatch,
                "apply: operator input modes do not match the vector");
  }
  std::vector<Core> cores;
  cores.reserve(x.order());
  for (std::size_t n = 0; n < x.order(); ++n) {
    const Core& ac = a.as_vector().core(n);
    const Core& xc = x.core(n);
    const Index rows = a.rows()[n];
    const Index cols = a.cols()[n];
    const Index ra0 = ac.left(), ra1 = ac.right();
    const Index rx0 = xc.left(), rx1 = xc.right();
    Core y(ra0 * rx0, rows, ra1 * rx1);
    // y[(al,a), o, (be,b)] = sum_p A[al,o,p,be] x[a,p,b]
    for (Index be = 0; be < ra1; ++be) {
      for (Index al = 0; al < ra0; ++al) {
        Matrix blk(rows, cols);
        for (Index p = 0; p < cols; ++p)
          for (Index o = 0; o < rows; ++o) blk(o, p) = ac(al, o + rows * p, be);
        for (Index b = 0; b < rx1; ++b) {
          for (Index aa = 0; aa < rx0; ++aa) {
            Vector xv(cols);
            for (Index p = 0; p < cols; ++p) xv[p] = xc(aa, p, b);
            const Vector yv = blk * xv;
            for (Index o = 0; o < rows; ++o) {
              y(al + ra0 * aa, o, be + ra1 * b) = yv[o];
            }
          }
        }
      }
    }
    cores.push_back(std::move(y));
  }
  return TTVector(std::move(cores));
}

TTOperator compose(const TTOperator& a, const TTOperator& b) {
  if (a.order() != b.order() || a.cols() != b.rows()) {
    throw Error(ErrorCode::mode_mismatch,
                "compose: inner operator modes do not match");
  }
  std::vector<Core> cores;
  for (std::size_t n = 0; n < a.order(); ++n) {
    const Core& ac = a.as_vector().core(n);
    const Core& bc = b.as_vector().core(n);
    const Index rows = a.rows()[n];
    const Index inner_dim = a.cols()[n];
    const Index cols = b.cols()[n];
    const Index ra0 = ac.left(), ra1 = ac.right();
    const Index rb0 = bc.left(), rb1 = bc.right();
    Core c(ra0 * rb0, rows * cols, ra1 * rb1);
    for (Index be = 0; be < ra1; ++be)
      for (Index al = 0; al < ra0; ++al) {
        Matrix ablk(rows, inner_dim);
        for (Index q = 0; q < inner_dim; ++q)
          for (Index o = 0; o < rows; ++o) ablk(o, q) = ac(al, o + rows * q, be);
        for (Index de = 0; de < rb1; ++de)
          for (Index ga = 0; ga < rb0; ++ga) {
            Matrix bblk(inner_dim, cols);
            for (Index p = 0; p < cols; ++p)
              for (Index q = 0; q < inner_dim; ++q)
                bblk(q, p) = bc(ga, q + inner_dim * p, de);
            const Matrix prod = ablk * bblk;
            for (Index p = 0; p < cols; ++p)
              for (Index o = 0; o < rows; ++o)
                c(al + ra0 * ga, o + rows * p, be + ra1 * de) = prod(o, p);
          }
      }
    cores.push_back(std::move(c));
  }
  return TTOperator(TTVector(std::move(cores)), a.rows(), b.cols());
}

TTOperator adjoint(const TTOperator& a) {
  std::vector<Core> cores;
  for (std::size_t n = 0; n < a.order(); ++n) {
    const Core& ac = a.as_vector().core(n);
    const Index rows = a.rows()[n];
    const Index cols = a.cols()[n];
    Core c(ac.left(), ac.mode(), ac.right());
    for (Index b = 0; b < ac.right(); ++b)
      for (Index p = 0; p < cols; ++p)
        for (Index o = 0; o < rows; ++o)
          for (Index l = 0; l < ac.left(); ++l)
            c(l, p + cols * o, b) = std::conj(ac(l, o + rows * p, b));
    cores.push_back(std::move(c));
  }
  return TTOperator(TTVector(std::move(cores)), a.cols(), a.rows());
}

Complex inner(const TTVector& x, const TTVector& y) {
  require_same_modes(x, y, "inner");
  Matrix env = Matrix::Ones(1, 1);
  for (std::size_t n = 0; n < x.order(); ++n) {
    const Core& xc = x.core(n);
    const Core& yc = y.core(n);
    Matrix next = Matrix::Zero(xc.right(), yc.right());
    for (Index i = 0; i < xc.mode(); ++i) {
      next.noalias() += xc.slice(i).adjoint() * (env * yc.slice(i));
    }
    env = std::move(next);
  }
  return env(0, 0);
}

double norm(const TTVector& x) {
  if (auto c = x.ortho_center()) return x.core(*c).data().norm();
  const std::size_t mid = x.order() / 2;
  return orthogonalize(x, mid).core(mid).data().norm();
}

double norm(const TTOperator& a) { return norm(a.as_vector()); }

// ---------------------------------------------------------------- dense

Vector to_dense(const TTVector& t, Index cap) {
  const Index total = t.dense_size();
  if (total > cap) {
    throw Error(ErrorCode::dimension_cap,
                "to_dense: " + std::to_string(total) +
                    " entries exceed the cap of " + std::to_string(cap));
  }
  // partial(J, a): J runs over the modes consumed so far, site 0 slowest.
  Matrix partial = Matrix::Ones(1, 1);
  for (const Core& c : t.cores()) {
    const Index prev = partial.rows();
    Matrix next(prev * c.mode(), c.right());
    for (Index i = 0; i < c.mode(); ++i) {
      const Matrix piece = partial * c.slice(i);
      for (Index j = 0; j < prev; ++j) next.row(j * c.mode() + i) = piece.row(j);
    }
    partial = std::move(next);
  }
  return partial.col(0);
}

Matrix to_dense(const TTOperator& t, Index cap) {
  const Vector flat = to_dense(t.as_vector(), cap);
  Index nrows = 1, ncols = 1;
  for (std::size_t n = 0; n < t.order(); ++n) {
    nrows *= t.rows()[n];
    ncols *= t.cols()[n];
  }
  Matrix m(nrows, ncols);
  const std::size_t order = t.order();
  std::vector<Index> combined(order);
  for (Index k = 0; k < flat.size(); ++k) {
    Index rem = k;
    for (std::size_t n = order; n-- > 0;) {
      combined[n] = rem % t.as_vector().core(n).mode();
      rem /= t.as_vector().core(n).mode();
    }
    Index row = 0, col = 0;
    for (std::size_t n = 0; n < order; ++n) {
      row = row * t.rows()[n] + combined[n] % t.rows()[n];
      col = col * t.cols()[n] + combined[n] / t.rows()[n];
    }
    m(row, col) = flat[k];
  }
  return m;
}

TTVector from_dense(const Vector& a, std::span<const Index> modes,
                    const TruncationPolicy& p) {
  if (modes.empty()) {
    throw Error(ErrorCode::invalid_argument, "from_dense: no modes");
  }
  const Index total = std::accumulate(modes.begin(), modes.end(), Index{1},
                                      std::multiplies<>());
  if (total != a.size()) {
    throw Error(ErrorCode::invalid_argument,
                "from_dense: product of mode sizes " + std::to_string(total) +
                    " does not match array length " +
                    std::to_string(a.size()));
  }
  const std::size_t order = modes.size();
  const double nrm = a.norm();
  if (nrm == 0.0) return TTVector::zeros(modes);
  const double delta = p.site_tolerance(order) * nrm;

  // work: rows = (a, i_n) with a fastest, cols = remaining multi-index.
  Index rest = total / modes[0];
  Matrix work = Eigen::Map<const Matrix>(a.data(), rest, modes[0]).transpose();
  Index left = 1;
  std::vector<Core> cores;
  for (std::size_t n = 0; n + 1 < order; ++n) {
    const detail::ThinSVD svd = detail::thin_svd(work);
    const auto& s = svd.s;
    Index keep = detail::truncation_rank(s, delta);
    if (p.max_rank) keep = std::min(keep, std::max<Index>(*p.max_rank, 1));
    cores.push_back(Core::from_left_unfolding(svd.u.leftCols(keep),
                                              left, modes[n]));
    const Matrix carry = s.head(keep).cast<Complex>().asDiagonal() *
                         svd.v.leftCols(keep).adjoint();
    // carry(a, i*rest' + j) -> work(a + keep*i, j)
    const Index m = modes[n + 1];
    const Index rest_next = rest / m;
    Matrix next(keep * m, rest_next);
    for (Index j = 0; j < rest_next; ++j)
      for (Index i = 0; i < m; ++i)
        for (Index aa = 0; aa < keep; ++aa)
          next(aa + keep * i, j) = carry(aa, i * rest_next + j);
    work = std::move(next);
    rest = rest_next;
    left = keep;
  }
  cores.push_back(Core::from_left_unfolding(work, left, modes[order - 1]));
  return TTVector(std::move(cores), order - 1);
}

TTOperator from_dense(const Matrix& a, std::span<const Index> rows,
                      std::span<const Index> cols, const TruncationPolicy& p) {
  if (rows.size() != cols.size() || rows.empty()) {
    throw Error(ErrorCode::invalid_argument,
                "from_dense: row/col mode lists must match and be non-empty");
  }
  const std::size_t order = rows.size();
  const Index nrows = std::accumulate(rows.begin(), rows.end(), Index{1},
                                      std::multiplies<>());
  const Index ncols = std::accumulate(cols.begin(), cols.end(), Index{1},
                                      std::multiplies<>());
  if (nrows != a.rows() || ncols != a.cols()) {
    throw Error(ErrorCode::invalid_argument,
                "from_dense: matrix shape does not match the mode sizes");
  }
  std::vector<Index> combined(order);
  for (std::size_t n = 0; n < order; ++n) combined[n] = rows[n] * cols[n];
  Vector flat(nrows * ncols);
  std::vector<Index> ri(order), ci(order);
  for (Index c = 0; c < ncols; ++c) {
    Index rem = c;
    for (std::size_t n = order; n-- > 0;) {
      ci[n] = rem % cols[n];
      rem /= cols[n];
    }
    for (Index r = 0; r < nrows; ++r) {
      rem = r;
      for (std::size_t n = order; n-- > 0;) {
        ri[n] = rem % rows[n];
        rem /= rows[n];
      }
      Index k = 0;
      for (std::size_t n = 0; n < order; ++n) {
        k = k * combined[n] + ri[n] + rows[n] * ci[n];
      }
      flat[k] = a(r, c);
    }
  }
  return TTOperator(from_dense(flat, combined, p),
                    std::vector<Index>(rows.begin(), rows.end()),
                    std::vector<Index>(cols.begin(), cols.end()));
}

} // namespace ttspin
