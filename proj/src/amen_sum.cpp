#include "ttspin/amen_sum.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <nlohmann/json.hpp>

#include "linalg.hpp"

namespace ttspin {

namespace {

using detail::advance_cross;
using detail::clipped_ranks;
using detail::oriented;
using detail::orthonormal_part;
using detail::sandwich;

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

/// A Kronecker-term sum in vector form. Each term picks one local vector per
/// site out of a short per-site table; groups[n][k] lists the terms using
/// table entry k at site n.
struct TermTable {
  std::vector<Index> modes;
  std::vector<std::vector<Vector>> local;
  std::vector<std::vector<std::vector<Index>>> groups;
  Vector coeff;

  std::size_t order() const { return modes.size(); }
  Index terms() const { return coeff.size(); }
};

TermTable tabulate(const CPOperatorSum& sum) {
  validate(sum);
  if (sum.terms.empty()) {
    throw Error(ErrorCode::invalid_argument, "summation needs at least one term");
  }
  const Index d = sum.local_dim();
  const Vector id = Matrix::Identity(d, d).reshaped();
  TermTable tab;
  tab.modes.assign(sum.sites, d * d);
  tab.local.assign(sum.sites, {id});
  tab.groups.assign(sum.sites, std::vector<std::vector<Index>>(1));
  tab.coeff.resize(static_cast<Index>(sum.terms.size()));
  for (std::size_t t = 0; t < sum.terms.size(); ++t) {
    const CPTerm& term = sum.terms[t];
    tab.coeff[static_cast<Index>(t)] = term.coeff;
    for (std::size_t n = 0; n < sum.sites; ++n) {
      auto it = term.factors.find(n);
      const Vector v = it == term.factors.end()
                           ? id
                           : Vector(it->second.matrix.reshaped());
      auto& table = tab.local[n];
      std::size_t k = 0;
      while (k < table.size() && table[k] != v) ++k;
      if (k == table.size()) {
        table.push_back(v);
        tab.groups[n].emplace_back();
      }
      tab.groups[n][k].push_back(static_cast<Index>(t));
    }
  }
  return tab;
}

/// sum_i c[i] * u(:, i, :)
Matrix contract_mode(const Core& u, const Vector& c) {
  Matrix out = Matrix::Zero(u.left(), u.right());
  for (Index i = 0; i < u.mode(); ++i) {
    if (c[i] != Complex(0.0, 0.0)) out += c[i] * u.slice(i);
  }
  return out;
}

/// Moves per-term interfaces across site n through the (oriented) frame
/// core u: column t becomes W_k(t) * env(:, t) with W_k = sum_i v_k[i] u_i^H.
Matrix advance_terms(const Matrix& env, const Core& u, const TermTable& tab,
                     std::size_t n) {
  Matrix out(u.right(), env.cols());
  for (std::size_t k = 0; k < tab.local[n].size(); ++k) {
    const auto& ids = tab.groups[n][k];
    if (ids.empty()) continue;
    const Matrix w = contract_mode(u, tab.local[n][k].conjugate()).adjoint();
    out(Eigen::all, ids) = w * env(Eigen::all, ids);
  }
  return out;
}

/// sum_t coeff_t * behind(:, t) (x) v_t (x) ahead(:, t) as an oriented core.
Core project_terms(const Matrix& behind, const Matrix& ahead,
                   const TermTable& tab, std::size_t n) {
  Core out(behind.rows(), tab.modes[n], ahead.rows());
  for (std::size_t k = 0; k < tab.local[n].size(); ++k) {
    const auto& ids = tab.groups[n][k];
    if (ids.empty()) continue;
    const Vector c = tab.coeff(ids);
    const Matrix g = (behind(Eigen::all, ids) * c.asDiagonal()) *
                     ahead(Eigen::all, ids).transpose();
    const Vector& v = tab.local[n][k];
    for (Index i = 0; i < v.size(); ++i) {
      if (v[i] != Complex(0.0, 0.0)) out.slice(i) += v[i] * g;
    }
  }
  return out;
}

TTOperator as_operator(TTVector v, Index d) {
  const std::vector<Index> dims(v.order(), d);
  return TTOperator(std::move(v), dims, dims);
}

void check(const SummationConfig& cfg) {
  if (!(cfg.rel_tolerance > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "rel_tolerance must be positive");
  }
  if (cfg.enrichment_rank < 1) {
    throw Error(ErrorCode::invalid_argument, "enrichment_rank must be >= 1");
  }
  if (cfg.max_sweeps < 1) {
    throw Error(ErrorCode::invalid_argument, "max_sweeps must be >= 1");
  }
}

} // namespace

SummationResult amen_sum(const CPOperatorSum& terms,
                         const SummationConfig& cfg) {
  check(cfg);
  const auto t0 = Clock::now();
  const TermTable tab = tabulate(terms);
  const std::size_t N = tab.order();
  const Index d = terms.local_dim();

  SummationResult res;
  SummationReport& rep = res.report;
  rep.method = "amen";
  rep.terms = terms.terms.size();

  const TTVector guess = cfg.initial_guess ? cfg.initial_guess->as_vector()
                                           : term_to_tt(terms, 0).as_vector();
  if (guess.modes() != tab.modes) {
    throw Error(ErrorCode::mode_mismatch,
                "initial guess does not match the modes of the sum");
  }

  const Matrix ones = Matrix::Ones(1, tab.terms());
  if (N == 1) {
    std::vector<Core> single{project_terms(ones, ones, tab, 0)};
    res.tt = as_operator(TTVector(std::move(single), 0), d);
    rep.sweeps_used = 1;
    rep.converged = true;
    rep.rank_history.push_back(rank_profile(res.tt));
    rep.error_history.push_back(0.0);
    rep.update_history.push_back(0.0);
    rep.sweep_ms.push_back(0.0);
    rep.total_ms = rep.setup_ms = ms_since(t0);
    return res;
  }

  std::vector<Core> xs = orthogonalize(guess, 0).cores();
  std::vector<Core> zs =
      orthogonalize(TTVector::random(tab.modes,
                                     clipped_ranks(tab.modes, cfg.enrichment_rank),
                                     cfg.seed),
                    N - 1)
          .cores();

  // Interfaces indexed by bond 0..N: *_l[b] covers sites < b, *_r[b] sites
  // >= b. tx/tz hold per-term contractions with the x and z frames, zx the
  // z-x overlap.
  std::vector<Matrix> tx_l(N + 1), tx_r(N + 1), tz_l(N + 1), tz_r(N + 1),
      zx_l(N + 1), zx_r(N + 1);
  tx_l[0] = tz_l[0] = ones;
  tx_r[N] = tz_r[N] = ones;
  zx_l[0] = zx_r[N] = Matrix::Identity(1, 1);
  for (std::size_t n = 0; n + 1 < N; ++n) {
    tz_l[n + 1] = advance_terms(tz_l[n], zs[n], tab, n);
    zx_l[n + 1] = advance_cross(zx_l[n], zs[n], xs[n]);
  }
  // ALS half-sweep for the residual approximation, right to left.
  for (std::size_t n = N - 1; n >= 1; --n) {
    const Core xr = xs[n].reversed();
    Core y = project_terms(tz_r[n + 1], tz_l[n], tab, n);
    y.data() -= sandwich(zx_r[n + 1], xr, zx_l[n]).data();
    const Core zq = orthonormal_part(y);
    zs[n] = zq.reversed();
    tz_r[n] = advance_terms(tz_r[n + 1], zq, tab, n);
    zx_r[n] = advance_cross(zx_r[n + 1], zq, xr);
    tx_r[n] = advance_terms(tx_r[n + 1], xr, tab, n);
  }
  rep.setup_ms = ms_since(t0);

  const double site_tol = 
      TruncationPolicy{cfg.rel_tolerance, std::nullopt}.site_tolerance(N);
  std::size_t center = 0;
  bool last = false;
  for (std::size_t sweep = 1;; ++sweep) {
    last = last || sweep >= cfg.max_sweeps;
    const auto ts = Clock::now();
    const int dir = sweep % 2 == 1 ? 1 : -1;
    auto& txb = dir > 0 ? tx_l : tx_r;
    auto& txa = dir > 0 ? tx_r : tx_l;
    auto& tzb = dir > 0 ? tz_l : tz_r;
    auto& tza = dir > 0 ? tz_r : tz_l;
    auto& zxb = dir > 0 ? zx_l : zx_r;
    auto& zxa = dir > 0 ? zx_r : zx_l;
    double max_dx = 0.0;
    double max_res = 0.0;
    bool capped = false;

    for (std::size_t step = 0; step < N; ++step) {
      const std::size_t n = dir > 0 ? step : N - 1 - step;
      const std::size_t bb = dir > 0 ? n : n + 1;
      const std::size_t ab = dir > 0 ? n + 1 : n;

      const Core x_old = oriented(xs[n], dir);
      const Core x_new = project_terms(txb[bb], txa[ab], tab, n);
      const double nrm = x_new.data().norm();
      const double scale = std::max(nrm, x_old.data().norm());
      if (scale > 0.0) {
        max_dx = std::max(max_dx, (x_new.data() - x_old.data()).norm() / scale);
      }
      if (step + 1 == N) {
        xs[n] = oriented(x_new, dir);
        break;
      }

      const detail::ThinSVD svd = detail::thin_svd(x_new.left_unfolding());
      const auto& s = svd.s;
      Index keep = detail::truncation_rank(s, site_tol * nrm);
      if (cfg.max_rank && keep > *cfg.max_rank) {
        keep = std::max<Index>(*cfg.max_rank, 1);
        capped = true;
      }
      Matrix u = svd.u.leftCols(keep);
      Matrix carry = s.head(keep).cast<Complex>().asDiagonal() *
                     svd.v.leftCols(keep).adjoint();
      const Core xtr =
          Core::from_left_unfolding(u * carry, x_new.left(), x_new.mode());

      Core zres = project_terms(tzb[bb], tza[ab], tab, n);
      zres.data() -= sandwich(zxb[bb], xtr, zxa[ab]).data();
      const double rnorm = zres.data().norm();
      max_res = std::max(max_res, nrm > 0.0 ? rnorm / nrm : rnorm);
      const Core zq = orthonormal_part(zres);

      if (!last) {
        Core e = project_terms(txb[bb], tza[ab], tab, n);
        e.data() -= sandwich(Matrix::Identity(xtr.left(), xtr.left()), xtr,
                             zxa[ab])
                        .data();
        Matrix both(u.rows(), keep + e.right());
        both << u, e.left_unfolding();
        detail::ThinQR f = detail::thin_qr(both);
        carry = f.r.leftCols(keep) * carry;
        u = std::move(f.q);
      }
      const Core xu = Core::from_left_unfolding(u, x_new.left(), x_new.mode());

      const std::size_t m = dir > 0 ? n + 1 : n - 1;
      const Core nb = oriented(xs[m], dir);
      xs[m] = oriented(Core::from_right_unfolding(carry * nb.right_unfolding(),
                                                  nb.mode(), nb.right()),
                       dir);
      xs[n] = oriented(xu, dir);
      zs[n] = oriented(zq, dir);
      txb[ab] = advance_terms(txb[bb], xu, tab, n);
      tzb[ab] = advance_terms(tzb[bb], zq, tab, n);
      zxb[ab] = advance_cross(zxb[bb], zq, xu);
    }
    center = dir > 0 ? N - 1 : 0;

    rep.sweeps_used = sweep;
    rep.update_history.push_back(max_dx);
    rep.error_history.push_back(max_res);
    rep.rank_history.push_back(rank_profile(TTVector(xs, center)));
    rep.sweep_ms.push_back(ms_since(ts));
    // The closing pass has no enrichment, so a small update there says
    // nothing unless convergence was already reached.
    if (!last && max_dx <= cfg.rel_tolerance) rep.converged = true;
    if (last) {
      rep.cap_limited = capped;
      break;
    }
    if (rep.converged) last = true;
  }

  // Each entry is a z-projected residual, a lower bound on the error of the
  // iterate entering that sweep. Those errors never grow, so a later bound
  // also bounds every earlier iterate; keep the tightest one.
  auto& hist = rep.error_history;
  for (std::size_t k = hist.size() - 1; k-- > 0;) {
    hist[k] = std::max(hist[k], hist[k + 1]);
  }
  rep.final_rel_error_estimate = hist.back();
  res.tt = as_operator(TTVector(std::move(xs), center), d);
  rep.total_ms = ms_since(t0);
  return res;
}

SummationResult binary_sum(const CPOperatorSum& terms,
                           const TruncationPolicy& policy) {
  const auto t0 = Clock::now();
  validate(terms);
  if (terms.terms.empty()) {
    throw Error(ErrorCode::invalid_argument, "summation needs at least one term");
  }
  SummationResult res;
  SummationReport& rep = res.report;
  rep.method = "binary";
  rep.terms = terms.terms.size();

  std::vector<TTOperator> level;
  level.reserve(terms.terms.size());
  for (std::size_t t = 0; t < terms.terms.size(); ++t) {
    level.push_back(term_to_tt(terms, t));
  }
  rep.setup_ms = ms_since(t0);

  RankProfile best = rank_profile(level.front());
  RankProfile best_raw = best;
  double discarded = 0.0;
  while (level.size() > 1) {
    const auto ts = Clock::now();
    std::vector<TTOperator> next;
    next.reserve((level.size() + 1) / 2);
    RankProfile level_max;
    for (std::size_t i = 0; i + 1 < level.size(); i += 2) {
      const TTOperator s = add(level[i], level[i + 1]);
      const RankProfile raw = rank_profile(s);
      if (raw.effective_rank > best_raw.effective_rank) best_raw = raw;
      auto r = round_checked(s, policy);
      discarded += r.discarded;
      rep.cap_limited = rep.cap_limited || r.cap_limited;
      const RankProfile p = rank_profile(r.tt);
      if (p.effective_rank > best.effective_rank) best = p;
      if (p.effective_rank > level_max.effective_rank) level_max = p;
      next.push_back(std::move(r.tt));
    }
    if (level.size() % 2 == 1) next.push_back(std::move(level.back()));
    level = std::move(next);
    ++rep.sweeps_used;
    rep.rank_history.push_back(level_max);
    rep.sweep_ms.push_back(ms_since(ts));
  }
  res.tt = std::move(level.front());
  if (rep.rank_history.empty()) {
    rep.rank_history.push_back(rank_profile(res.tt));
    rep.sweep_ms.push_back(0.0);
  }
  const double total = norm(res.tt);
  rep.final_rel_error_estimate = total > 0.0 ? discarded / total : discarded;
  rep.error_history.assign(rep.rank_history.size(), 0.0);
  rep.error_history.back() = rep.final_rel_error_estimate;
  rep.converged = true;
  rep.max_intermediate = best;
  rep.max_intermediate_unrounded = best_raw;
  rep.total_ms = ms_since(t0);
  return res;
}

namespace {

nlohmann::json profile_json(const RankProfile& p) {
  return {{"ranks", p.ranks}, {"effective_rank", p.effective_rank}};
}

} // namespace

std::string to_json(const SummationReport& report) {
  nlohmann::json doc;
  doc["method"] = report.method;
  doc["terms"] = report.terms;
  doc["sweeps_used"] = report.sweeps_used;
  doc["converged"] = report.converged;
  doc["cap_limited"] = report.cap_limited;
  doc["final_rel_error_estimate"] = report.final_rel_error_estimate;
  doc["rank_history"] = nlohmann::json::array();
  for (const auto& p : report.rank_history) {
    doc["rank_history"].push_back(profile_json(p));
  }
  doc["error_history"] = report.error_history;
  doc["update_history"] = report.update_history;
  if (report.max_intermediate) {
    doc["max_intermediate"] = profile_json(*report.max_intermediate);
  }
  if (report.max_intermediate_unrounded) {
    doc["max_intermediate_unrounded"] =
        profile_json(*report.max_intermediate_unrounded);
  }
  doc["timings_ms"] = {{"setup", report.setup_ms},
                       {"sweeps", report.sweep_ms},
                       {"total", report.total_ms}};
  return doc.dump(2);
}

} // namespace ttspin
