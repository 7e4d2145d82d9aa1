#include "ttspin/ttspin.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <new>
#include <string>

#include "ttspin/amen_sum.hpp"
#include "ttspin/dense_oracle.hpp"
#include "ttspin/spectrum.hpp"
#include "ttspin/spin_model.hpp"
#include "ttspin/tt_io.hpp"
#include "ttspin/validate.hpp"

struct ttspin_system {
  ttspin::SpinSystem sys;
};

struct ttspin_operator {
  ttspin::TTOperator op;
};

struct ttspin_spectrum {
  ttspin::SpectrumResult result;
};

namespace {

thread_local std::string g_last_error;

ttspin_status map(ttspin::ErrorCode c) {
  using ttspin::ErrorCode;
  switch (c) {
  case ErrorCode::invalid_argument: return TTSPIN_ERR_INVALID_ARGUMENT;
  case ErrorCode::invalid_structure: return TTSPIN_ERR_INVALID_STRUCTURE;
  case ErrorCode::mode_mismatch: return TTSPIN_ERR_MODE_MISMATCH;
  case ErrorCode::dimension_cap: return TTSPIN_ERR_DIMENSION_CAP;
  case ErrorCode::schema: return TTSPIN_ERR_SCHEMA;
  case ErrorCode::singular_local_system: return TTSPIN_ERR_SINGULAR_LOCAL_SYSTEM;
  case ErrorCode::io: return TTSPIN_ERR_IO;
  }
  return TTSPIN_ERR_INTERNAL;
}

ttspin_status fail(ttspin_status s, std::string msg) {
  g_last_error = std::move(msg);
  return s;
}

/// Runs `f`, translating exceptions into status codes.
template <class F>
ttspin_status guarded(F&& f) noexcept {
  try {
    g_last_error.clear();
    f();
    return TTSPIN_OK;
  } catch (const ttspin::Error& e) {
    return fail(map(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(TTSPIN_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(TTSPIN_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(TTSPIN_ERR_INTERNAL, "unknown error");
  }
}

char* dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

void need(const void* p, const char* what) {
  if (!p) {
    throw ttspin::Error(ttspin::ErrorCode::invalid_argument,
                        std::string(what) + " must not be null");
  }
}

} // namespace

extern "C" {

const char* ttspin_version(void) { return "0.1.0"; }

const char* ttspin_status_name(ttspin_status s) {
  switch (s) {
  case TTSPIN_OK: return "ok";
  case TTSPIN_ERR_INVALID_ARGUMENT: return "invalid_argument";
  case TTSPIN_ERR_INVALID_STRUCTURE: return "invalid_structure";
  case TTSPIN_ERR_MODE_MISMATCH: return "mode_mismatch";
  case TTSPIN_ERR_DIMENSION_CAP: return "dimension_cap";
  case TTSPIN_ERR_SCHEMA: return "schema";
  case TTSPIN_ERR_SINGULAR_LOCAL_SYSTEM: return "singular_local_system";
  case TTSPIN_ERR_IO: return "io";
  case TTSPIN_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* ttspin_last_error(void) { return g_last_error.c_str(); }

void ttspin_string_free(char* s) { std::free(s); }

ttspin_status ttspin_system_load(const char* path, ttspin_system** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    *out = new ttspin_system{ttspin::load_spin_system(path)};
  });
}

ttspin_status ttspin_system_parse(const char* json, ttspin_system** out) {
  return guarded([&] {
    need(json, "json");
    need(out, "out");
    *out = new ttspin_system{ttspin::parse_spin_system(json)};
  });
}

ttspin_status ttspin_system_synthetic(size_t spins, uint64_t seed, ttspin_system** out) {
  return guarded([&] {
    need(out, "out");
    *out = new ttspin_system{ttspin::synthetic_backbone(spins, seed)};
  });
}

ttspin_status ttspin_system_to_json(const ttspin_system* sys, char** out) {
  return guarded([&] {
    need(sys, "system");
    need(out, "out");
    *out = dup(ttspin::to_json(sys->sys));
  });
}

size_t ttspin_system_size(const ttspin_system* sys) { return sys ? sys->sys.size() : 0; }

double ttspin_system_damping(const ttspin_system* sys) {
  return sys ? sys->sys.damping_mu : 0.0;
}

void ttspin_system_free(ttspin_system* sys) { delete sys; }

void ttspin_build_options_default(ttspin_build_options* opts) {
  if (!opts) return;
  const ttspin::SummationConfig d;
  opts->eps = d.rel_tolerance;
  opts->method = TTSPIN_SUM_AMEN;
  opts->max_sweeps = d.max_sweeps;
  opts->enrichment_rank = static_cast<size_t>(d.enrichment_rank);
  opts->max_rank = 0;
}

ttspin_status ttspin_build_liouvillian(const ttspin_system* sys,
                                       const ttspin_build_options* opts,
                                       ttspin_operator** out, char** report_json,
                                       int* converged) {
  return guarded([&] {
    need(sys, "system");
    need(opts, "options");
    need(out, "out");
    std::optional<ttspin::Index> cap;
    if (opts->max_rank > 0) cap = static_cast<ttspin::Index>(opts->max_rank);
    const auto terms = ttspin::commutation_superoperator(ttspin::hamiltonian_terms(sys->sys));
    ttspin::SummationResult r;
    switch (opts->method) {
    case TTSPIN_SUM_AMEN: {
      ttspin::SummationConfig cfg;
      cfg.rel_tolerance = opts->eps;
      cfg.max_sweeps = opts->max_sweeps;
      cfg.enrichment_rank = static_cast<ttspin::Index>(opts->enrichment_rank);
      cfg.max_rank = cap;
      r = ttspin::amen_sum(terms, cfg);
      break;
    }
    case TTSPIN_SUM_BINARY:
      r = ttspin::binary_sum(terms, ttspin::TruncationPolicy{opts->eps, cap});
      break;
    default:
      throw ttspin::Error(ttspin::ErrorCode::invalid_argument, "unknown summation method");
    }
    char* report = report_json ? dup(ttspin::to_json(r.report)) : nullptr;
    *out = new ttspin_operator{std::move(r.tt)};
    if (report_json) *report_json = report;
    if (converged) *converged = r.report.converged ? 1 : 0;
  });
}

size_t ttspin_operator_order(const ttspin_operator* op) { return op ? op->op.order() : 0; }

size_t ttspin_operator_ranks(const ttspin_operator* op, size_t* ranks, size_t capacity) {
  if (!op) return 0;
  const auto r = op->op.ranks();
  if (ranks && capacity >= r.size()) {
    for (std::size_t k = 0; k < r.size(); ++k) ranks[k] = static_cast<size_t>(r[k]);
  }
  return r.size();
}

double ttspin_operator_effective_rank(const ttspin_operator* op) {
  return op ? ttspin::rank_profile(op->op).effective_rank : 0.0;
}

ttspin_status ttspin_operator_save(const ttspin_operator* op, const char* path) {
  return guarded([&] {
    need(op, "operator");
    need(path, "path");
    ttspin::save_tt(path, op->op);
  });
}

ttspin_status ttspin_operator_load(const char* path, ttspin_operator** out) {
  return guarded([&] {
    need(path, "path");
    need(out, "out");
    ttspin::AnyTrain t = ttspin::load_tt(path);
    if (!std::holds_alternative<ttspin::TTOperator>(t)) {
      throw ttspin::Error(ttspin::ErrorCode::io,
                          std::string(path) + " holds a vector, not an operator");
    }
    *out = new ttspin_operator{std::get<ttspin::TTOperator>(std::move(t))};
  });
}

void ttspin_operator_dense_shape(const ttspin_operator* op, size_t* rows, size_t* cols) {
  size_t r = 0, c = 0;
  if (op) {
    r = c = 1;
    for (auto m : op->op.rows()) r *= static_cast<size_t>(m);
    for (auto m : op->op.cols()) c *= static_cast<size_t>(m);
  }
  if (rows) *rows = r;
  if (cols) *cols = c;
}

ttspin_status ttspin_operator_to_dense(const ttspin_operator* op, double* out) {
  return guarded([&] {
    need(op, "operator");
    need(out, "out");
    const ttspin::Matrix m = ttspin::to_dense(op->op);
    for (ttspin::Index i = 0; i < m.rows(); ++i) {
      for (ttspin::Index j = 0; j < m.cols(); ++j) {
        const auto k = 2 * (i * m.cols() + j);
        out[k] = m(i, j).real();
        out[k + 1] = m(i, j).imag();
      }
    }
  });
}

void ttspin_operator_free(ttspin_operator* op) { delete op; }

void ttspin_spectrum_options_default(ttspin_spectrum_options* opts) {
  if (!opts) return;
  const ttspin::SpectrumRequest req;
  opts->isotope = nullptr;
  opts->from_hz = -1000.0;
  opts->to_hz = 1000.0;
  opts->points = 200;
  opts->eps = req.solver.rel_tolerance;
  opts->solver = TTSPIN_SOLVER_AMEN;
  opts->max_sweeps = req.solver.max_sweeps;
  opts->enrichment_rank = static_cast<size_t>(req.solver.enrichment_rank);
  opts->warm_start = req.warm_start ? 1 : 0;
  opts->threads = req.threads;
  opts->chunk = req.chunk;
  opts->op_round_tol = 0.0;
  opts->seed = req.solver.seed;
}

ttspin_status ttspin_spectrum_run(const ttspin_system* sys,
                                  const ttspin_spectrum_options* opts,
                                  ttspin_spectrum** out) {
  return guarded([&] {
    need(sys, "system");
    need(opts, "options");
    need(opts->isotope, "isotope");
    need(out, "out");
    if (opts->points < 1) {
      throw ttspin::Error(ttspin::ErrorCode::invalid_argument, "points must be >= 1");
    }
    if (!std::isfinite(opts->from_hz) || !std::isfinite(opts->to_hz) ||
        (opts->points > 1 && !(opts->from_hz < opts->to_hz))) {
      throw ttspin::Error(ttspin::ErrorCode::invalid_argument,
                          "need finite from_hz < to_hz");
    }
    ttspin::SpectrumRequest req;
    req.system = sys->sys;
    req.isotope = opts->isotope;
    const std::size_t n = opts->points;
    req.omega_grid.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      const double t = n == 1 ? 1.0 : double(k) / double(n - 1);
      const double hz = opts->to_hz - (opts->to_hz - opts->from_hz) * t;
      req.omega_grid[k] = -ttspin::kTwoPi * hz;
    }
    req.solver.rel_tolerance = opts->eps;
    req.solver.max_sweeps = opts->max_sweeps;
    req.solver.enrichment_rank = static_cast<ttspin::Index>(opts->enrichment_rank);
    req.solver.seed = opts->seed;
    switch (opts->solver) {
    case TTSPIN_SOLVER_AMEN: req.method = ttspin::SolverKind::amen; break;
    case TTSPIN_SOLVER_DMRG: req.method = ttspin::SolverKind::dmrg; break;
    default:
      throw ttspin::Error(ttspin::ErrorCode::invalid_argument, "unknown solver");
    }
    req.warm_start = opts->warm_start != 0;
    req.threads = opts->threads;
    req.chunk = opts->chunk;
    if (opts->op_round_tol != 0.0) req.op_round_tol = opts->op_round_tol;
    *out = new ttspin_spectrum{ttspin::spectrum(req)};
  });
}

size_t ttspin_spectrum_points(const ttspin_spectrum* s) {
  return s ? s->result.points.size() : 0;
}

size_t ttspin_spectrum_converged(const ttspin_spectrum* s) {
  return s ? s->result.converged_points() : 0;
}

ttspin_status ttspin_spectrum_point(const ttspin_spectrum* s, size_t k, double* omega,
                                    double* amplitude, ttspin_point_status* status) {
  return guarded([&] {
    need(s, "spectrum");
    if (k >= s->result.points.size()) {
      throw ttspin::Error(ttspin::ErrorCode::invalid_argument, "point index out of range");
    }
    const auto& p = s->result.points[k];
    if (omega) *omega = p.omega;
    if (amplitude) *amplitude = p.amplitude;
    if (status) *status = static_cast<ttspin_point_status>(p.status);
  });
}

ttspin_status ttspin_spectrum_csv(const ttspin_spectrum* s, char** out) {
  return guarded([&] {
    need(s, "spectrum");
    need(out, "out");
    *out = dup(ttspin::to_csv(s->result));
  });
}

ttspin_status ttspin_spectrum_json(const ttspin_spectrum* s, char** out) {
  return guarded([&] {
    need(s, "spectrum");
    need(out, "out");
    *out = dup(ttspin::to_json(s->result));
  });
}

void ttspin_spectrum_free(ttspin_spectrum* s) { delete s; }

ttspin_status ttspin_dense_spectrum(const ttspin_system* sys, const char* isotope,
                                    const double* omega, size_t n, double* amplitude) {
  return guarded([&] {
    need(sys, "system");
    need(isotope, "isotope");
    if (n == 0) return;
    need(omega, "omega");
    need(amplitude, "amplitude");
    const std::vector<double> grid(omega, omega + n);
    const auto a = ttspin::oracle::dense_spectrum(sys->sys, grid, sys->sys.damping_mu,
                                                  isotope);
    std::copy(a.begin(), a.end(), amplitude);
  });
}

ttspin_status ttspin_validate(const ttspin_system* sys, double eps, char** report_json,
                              int* passed) {
  return guarded([&] {
    need(sys, "system");
    ttspin::ValidationConfig cfg;
    cfg.spectrum_eps = eps;
    const auto rep = ttspin::validate_against_oracle(sys->sys, cfg);
    if (report_json) *report_json = dup(ttspin::to_json(rep));
    if (passed) *passed = rep.passed ? 1 : 0;
  });
}

} // extern "C"
