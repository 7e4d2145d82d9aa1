#include "ttspin/amen_solve.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>

#include <Eigen/Cholesky>
#include <nlohmann/json.hpp>

#include "linalg.hpp"

namespace ttspin {

namespace {

using Clock = std::chrono::steady_clock;
using detail::advance_cross;
using detail::clipped_ranks;
using detail::oriented;
using detail::orthonormal_part;
using detail::sandwich;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

/// Contraction of conj(frame) x A x frame over the sites behind a bond: one
/// (conj rank x rank) matrix per operator rank.
using OpEnv = std::vector<Matrix>;

OpEnv unit_env() { return {Matrix::Identity(1, 1)}; }

/// S(:, beta + rb*j) = vec(sum_{alpha,i} A(alpha, j + m*i, beta) env[alpha] x_i)
/// as two dense products.
Matrix contract_blocks(const OpEnv& env, const Core& a, const Core& x) {
  const Index m = x.mode();
  const Index ra = a.left();
  const Index rb = a.right();
  const Index rc = env.front().rows();
  const Index block = rc * x.right();
  Matrix stacked(ra * rc, x.left());
  for (Index al = 0; al < ra; ++al) stacked.middleRows(al * rc, rc) = env[al];
  const Matrix p = stacked * x.right_unfolding();
  // p(al*rc + c, i + m*b) -> w(c + rc*b, al + ra*i)
  Matrix w(block, ra * m);
  for (Index b = 0; b < x.right(); ++b)
    for (Index i = 0; i < m; ++i)
      for (Index al = 0; al < ra; ++al)
        w.col(al + ra * i).segment(rc * b, rc) =
            p.col(i + m * b).segment(al * rc, rc);
  Matrix amat(ra * m, rb * m);
  for (Index j = 0; j < m; ++j)
    for (Index be = 0; be < rb; ++be)
      for (Index i = 0; i < m; ++i)
        for (Index al = 0; al < ra; ++al)
          amat(al + ra * i, be + rb * j) = a(al, j + m * i, be);
  return w * amat;
}

/// Local operator applied to a core: slices sum behind[a] A x ahead[b]^T.
Core apply_local(const OpEnv& behind, const Core& a, const OpEnv& ahead,
                 const Core& x) {
  const Index rb = a.right();
  const Index rc = behind.front().rows();
  const Index rr = x.right();
  const Index out_r = ahead.front().rows();
  const Matrix s = contract_blocks(behind, a, x);
  Matrix ahead_t(rb * rr, out_r);
  for (Index be = 0; be < rb; ++be) {
    ahead_t.middleRows(be * rr, rr) = ahead[be].transpose();
  }
  Core y(rc, x.mode(), out_r);
  for (Index j = 0; j < x.mode(); ++j) {
    const Eigen::Map<const Matrix> sj(s.col(rb * j).data(), rc, rr * rb);
    y.slice(j) = sj * ahead_t;
  }
  return y;
}

OpEnv advance_op(const OpEnv& env, const Core& frame, const Core& a,
                 const Core& x) {
  const Index m = x.mode();
  const Index rb = a.right();
  const Index rc = env.front().rows();
  const Index rr = x.right();
  const Matrix s = contract_blocks(env, a, x);
  const Matrix fh = frame.left_unfolding().adjoint();
  OpEnv out(static_cast<std::size_t>(rb));
  Matrix v(rc * m, rr);
  for (Index be = 0; be < rb; ++be) {
    for (Index j = 0; j < m; ++j) {
      v.middleRows(j * rc, rc) =
          Eigen::Map<const Matrix>(s.col(be + rb * j).data(), rc, rr);
    }
    out[be] = fh * v;
  }
  return out;
}

/// Dense local matrix in the core's own index order a + rl*(i + m*b).
Matrix local_matrix(const OpEnv& behind, const Core& a, const OpEnv& ahead,
                    Index m) {
  const Index rl = behind.front().rows();
  const Index rr = ahead.front().rows();
  const Index inner = m * rl;
  Matrix out = Matrix::Zero(inner * rr, inner * rr);
  Matrix g(inner, inner);
  for (Index be = 0; be < a.right(); ++be) {
    g.setZero();
    bool any = false;
    for (Index al = 0; al < a.left(); ++al) {
      for (Index i = 0; i < m; ++i) {
        for (Index j = 0; j < m; ++j) {
          const Complex c = a(al, j + m * i, be);
          if (c == Complex(0.0, 0.0)) continue;
          g.block(j * rl, i * rl, rl, rl) += c * behind[al];
          any = true;
        }
      }
    }
    if (!any) continue;
    for (Index bc = 0; bc < rr; ++bc) {
      for (Index br = 0; br < rr; ++br) {
        const Complex e = ahead[be](br, bc);
        if (e == Complex(0.0, 0.0)) continue;
        out.block(br * inner, bc * inner, inner, inner) += e * g;
      }
    }
  }
  return out;
}

[[noreturn]] void not_positive(std::size_t site) {
  throw Error(ErrorCode::singular_local_system,
              "local system at site " + std::to_string(site) +
                  " is not positive definite");
}

Vector conjugate_gradient(const std::function<Vector(const Vector&)>& op,
                          const Vector& f, Vector x, double tol,
                          std::size_t site) {
  Vector r = f - op(x);
  Vector p = r;
  double rr = r.squaredNorm();
  const double stop = tol * tol * f.squaredNorm();
  const Index max_iter = std::max<Index>(200, 4 * f.size());
  for (Index k = 0; k < max_iter && rr > stop; ++k) {
    const Vector q = op(p);
    const double curv = p.dot(q).real();
    if (!(curv > 0.0)) not_positive(site);
    const double alpha = rr / curv;
    x += alpha * p;
    r -= alpha * q;
    const double next = r.squaredNorm();
    p = r + (next / rr) * p;
    rr = next;
  }
  return x;
}

struct Problem {
  const SolverConfig& cfg;
  std::vector<Core> a;
  std::vector<Core> b;
  std::vector<Index> modes;
  SolveReport& rep;
};

Core solve_local(Problem& pb, const OpEnv& behind, const Core& a,
                 const OpEnv& ahead, const Core& f, const Core& x0,
                 std::size_t site) {
  const Index m = x0.mode();
  const bool direct =
      pb.cfg.local_solver == LocalSolver::direct ||
      (pb.cfg.local_solver == LocalSolver::automatic &&
       x0.size() <= pb.cfg.direct_threshold);
  Vector sol;
  if (direct) {
    Eigen::LLT<Matrix> llt(local_matrix(behind, a, ahead, m));
    if (llt.info() != Eigen::Success) not_positive(site);
    sol = llt.solve(f.data());
    ++pb.rep.direct_solves;
  } else {
    auto op = [&](const Vector& v) {
      return apply_local(behind, a, ahead,
                         Core(x0.left(), m, x0.right(), v))
          .data();
    };
    sol = conjugate_gradient(op, f.data(), x0.data(),
                             pb.cfg.rel_tolerance / 10.0, site);
    ++pb.rep.iterative_solves;
  }
  return Core(x0.left(), m, x0.right(), std::move(sol));
}

struct Split {
  Matrix u;
  Matrix carry;
};

/// Lowest-rank SVD truncation of the local solution whose local residual
/// stays within target (bisection on the rank).
Split truncate_local(const Core& sol, const Core& f, const OpEnv& behind,
                     const Core& a, const OpEnv& ahead, double tol) {
  const detail::ThinSVD svd = detail::thin_svd(sol.left_unfolding());
  const double fn = f.data().norm();
  auto build = [&](Index k) {
    return Split{svd.u.leftCols(k), svd.s.head(k).cast<Complex>().asDiagonal() *
                                        svd.v.leftCols(k).adjoint()};
  };
  if (fn == 0.0 || svd.s[0] == 0.0) return build(1);
  auto residual = [&](Index k) {
    const Split p = build(k);
    const Core xk = Core::from_left_unfolding(p.u * p.carry, sol.left(),
                                              sol.mode());
    return (apply_local(behind, a, ahead, xk).data() - f.data()).norm() / fn;
  };
  const Index full = svd.s.size();
  const double target = std::max(tol, 2.0 * residual(full));
  Index lo = 1, hi = full;
  while (lo < hi) {
    const Index mid = (lo + hi) / 2;
    if (residual(mid) <= target) {
      hi = mid;
    } else {
      lo = mid + 1;
    }
  }
  return build(hi);
}

void check(const TTOperator& a, const TTVector& b, const SolverConfig& cfg) {
  if (!(cfg.rel_tolerance > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "rel_tolerance must be positive");
  }
  if (cfg.enrichment_rank < 1) {
    throw Error(ErrorCode::invalid_argument, "enrichment_rank must be >= 1");
  }
  if (cfg.max_sweeps < 1) {
    throw Error(ErrorCode::invalid_argument, "max_sweeps must be >= 1");
  }
  if (cfg.direct_threshold < 1) {
    throw Error(ErrorCode::invalid_argument, "direct_threshold must be >= 1");
  }
  if (!a.square()) {
    throw Error(ErrorCode::mode_mismatch, "solver needs a square operator");
  }
  if (a.order() != b.order() || a.cols() != b.modes()) {
    throw Error(ErrorCode::mode_mismatch,
                "operator and right-hand side modes differ");
  }
  if (cfg.initial_guess && cfg.initial_guess->modes() != b.modes()) {
    throw Error(ErrorCode::mode_mismatch,
                "initial guess does not match the right-hand side modes");
  }
}

SolveResult solve(const TTOperator& op, const TTVector& rhs,
                  const SolverConfig& cfg, bool enrich) {
  check(op, rhs, cfg);
  const auto t0 = Clock::now();
  SolveResult res;
  SolveReport& rep = res.report;
  rep.method = enrich ? "amen" : "dmrg";

  const std::size_t N = rhs.order();
  const std::vector<Index> modes = rhs.modes();
  const double bnorm = norm(rhs);
  if (bnorm == 0.0) {
    res.x = TTVector::zeros(modes);
    rep.converged = true;
    rep.total_ms = ms_since(t0);
    return res;
  }

  Problem pb{cfg, op.as_vector().cores(), rhs.cores(), modes, rep};
  const TTVector guess =
      cfg.initial_guess
          ? *cfg.initial_guess
          : TTVector::random(modes, std::vector<Index>(N + 1, 1), cfg.seed);
  std::vector<Core> xs = orthogonalize(guess, 0).cores();

  // Environments indexed by bond: *_l[k] covers sites < k, *_r[k] sites >= k.
  // xax/xb pair the x frame with A and b; zax/zb pair the residual frame z.
  std::vector<OpEnv> xax_l(N + 1), xax_r(N + 1), zax_l(N + 1), zax_r(N + 1);
  std::vector<Matrix> xb_l(N + 1), xb_r(N + 1), zb_l(N + 1), zb_r(N + 1);
  xax_l[0] = xax_r[N] = zax_l[0] = zax_r[N] = unit_env();
  xb_l[0] = xb_r[N] = zb_l[0] = zb_r[N] = Matrix::Identity(1, 1);
  for (std::size_t n = N - 1; n >= 1; --n) {
    const Core xr = xs[n].reversed();
    xax_r[n] = advance_op(xax_r[n + 1], xr, pb.a[n].reversed(), xr);
    xb_r[n] = advance_cross(xb_r[n + 1], xr, pb.b[n].reversed());
  }

  std::vector<Core> zs;
  if (enrich) {
    zs = orthogonalize(TTVector::random(modes,
                                        clipped_ranks(modes, cfg.enrichment_rank),
                                        cfg.seed ^ 0x9e3779b97f4a7c15ull),
                       N - 1)
             .cores();
    for (std::size_t n = 0; n + 1 < N; ++n) {
      zax_l[n + 1] = advance_op(zax_l[n], zs[n], pb.a[n], xs[n]);
      zb_l[n + 1] = advance_cross(zb_l[n], zs[n], pb.b[n]);
    }
    // One ALS half-sweep fits z to the residual, right to left.
    for (std::size_t n = N - 1; n >= 1; --n) {
      const Core xr = xs[n].reversed();
      const Core ar = pb.a[n].reversed();
      const Core br = pb.b[n].reversed();
      Core y = sandwich(zb_r[n + 1], br, zb_l[n]);
      y.data() -= apply_local(zax_r[n + 1], ar, zax_l[n], xr).data();
      const Core zq = orthonormal_part(y);
      zs[n] = zq.reversed();
      zax_r[n] = advance_op(zax_r[n + 1], zq, ar, xr);
      zb_r[n] = advance_cross(zb_r[n + 1], zq, br);
    }
  }

  const double local_tol =
      cfg.rel_tolerance / std::sqrt(static_cast<double>(N));
  std::vector<Core> best;
  double best_res = std::numeric_limits<double>::infinity();
  std::size_t center = 0;

  for (std::size_t sweep = 1; sweep <= cfg.max_sweeps; ++sweep) {
    const auto ts = Clock::now();
    const int dir = sweep % 2 == 1 ? 1 : -1;
    auto& xaxb = dir > 0 ? xax_l : xax_r;
    auto& xaxa = dir > 0 ? xax_r : xax_l;
    auto& xbb = dir > 0 ? xb_l : xb_r;
    auto& xba = dir > 0 ? xb_r : xb_l;
    auto& zaxb = dir > 0 ? zax_l : zax_r;
    auto& zaxa = dir > 0 ? zax_r : zax_l;
    auto& zbb = dir > 0 ? zb_l : zb_r;
    auto& zba = dir > 0 ? zb_r : zb_l;

    for (std::size_t step = 0; step < N; ++step) {
      const std::size_t n = dir > 0 ? step : N - 1 - step;
      const std::size_t bb = dir > 0 ? n : n + 1;
      const std::size_t ab = dir > 0 ? n + 1 : n;
      const Core an = oriented(pb.a[n], dir);
      const Core bn = oriented(pb.b[n], dir);

      const Core f = sandwich(xbb[bb], bn, xba[ab]);
      const Core sol =
          solve_local(pb, xaxb[bb], an, xaxa[ab], f, oriented(xs[n], dir), n);
      if (step + 1 == N) {
        xs[n] = oriented(sol, dir);
        if (cfg.observer) cfg.observer(n, TTVector(xs, n));
        break;
      }

      Matrix u, carry;
      Core zq;
      if (enrich) {
        Split p = truncate_local(sol, f, xaxb[bb], an, xaxa[ab], local_tol);
        const Core xtr = Core::from_left_unfolding(p.u * p.carry, sol.left(),
                                                   sol.mode());
        Core zres = sandwich(zbb[bb], bn, zba[ab]);
        zres.data() -= apply_local(zaxb[bb], an, zaxa[ab], xtr).data();
        zq = orthonormal_part(zres);

        Core e = sandwich(xbb[bb], bn, zba[ab]);
        e.data() -= apply_local(xaxb[bb], an, zaxa[ab], xtr).data();
        Matrix both(p.u.rows(), p.u.cols() + e.right());
        both << p.u, e.left_unfolding();
        detail::ThinQR q = detail::thin_qr(both);
        carry = q.r.leftCols(p.u.cols()) * p.carry;
        u = std::move(q.q);
      } else {
        detail::ThinQR q = detail::thin_qr(sol.left_unfolding());
        u = std::move(q.q);
        carry = std::move(q.r);
      }
      const Core xu = Core::from_left_unfolding(u, sol.left(), sol.mode());

      const std::size_t next = dir > 0 ? n + 1 : n - 1;
      const Core nb = oriented(xs[next], dir);
      xs[next] = oriented(Core::from_right_unfolding(
                              carry * nb.right_unfolding(), nb.mode(),
                              nb.right()),
                          dir);
      xs[n] = oriented(xu, dir);
      xaxb[ab] = advance_op(xaxb[bb], xu, an, xu);
      xbb[ab] = advance_cross(xbb[bb], xu, bn);
      if (enrich) {
        zs[n] = oriented(zq, dir);
        zaxb[ab] = advance_op(zaxb[bb], zq, an, xu);
        zbb[ab] = advance_cross(zbb[bb], zq, bn);
      }
      if (cfg.observer) cfg.observer(n, TTVector(xs, next));
    }
    center = dir > 0 ? N - 1 : 0;

    const TTVector x(xs, center);
    const double r = relative_residual(op, x, rhs);
    rep.sweeps_used = sweep;
    rep.residual_history.push_back(r);
    rep.rank_history.push_back(rank_profile(x));
    rep.sweep_ms.push_back(ms_since(ts));
    if (r < best_res) {
      best_res = r;
      best = xs;
    }
    if (r <= cfg.rel_tolerance) {
      rep.converged = true;
      break;
    }
  }

  if (rep.converged) {
    res.x = TTVector(std::move(xs), center);
    rep.final_residual = rep.residual_history.back();
  } else {
    res.x = TTVector(std::move(best));
    rep.final_residual = best_res;
  }
  rep.total_ms = ms_since(t0);
  return res;
}

} // namespace

double relative_residual(const TTOperator& a, const TTVector& x,
                         const TTVector& b) {
  const double r = norm(add(b, scale(apply(a, x), -1.0)));
  const double bn = norm(b);
  return bn > 0.0 ? r / bn : r;
}

SolveResult amen_solve(const TTOperator& a, const TTVector& b,
                       const SolverConfig& cfg) {
  return solve(a, b, cfg, true);
}

SolveResult dmrg_solve_one_site(const TTOperator& a, const TTVector& b,
                                const SolverConfig& cfg) {
  return solve(a, b, cfg, false);
}

std::string to_json(const SolveReport& report) {
  nlohmann::json j;
  j["method"] = report.method;
  j["sweeps_used"] = report.sweeps_used;
  j["converged"] = report.converged;
  j["final_residual"] = report.final_residual;
  j["residual_history"] = report.residual_history;
  nlohmann::json ranks = nlohmann::json::array();
  for (const RankProfile& p : report.rank_history) {
    ranks.push_back({{"ranks", p.ranks}, {"effective_rank", p.effective_rank}});
  }
  j["rank_history"] = std::move(ranks);
  j["local_solves"] = {{"direct", report.direct_solves},
                       {"iterative", report.iterative_solves}};
  j["timings_ms"] = {{"sweeps", report.sweep_ms}, {"total", report.total_ms}};
  return j.dump(2);
}

} // namespace ttspin
