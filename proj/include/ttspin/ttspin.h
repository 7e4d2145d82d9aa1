#ifndef TTSPIN_TTSPIN_H
#define TTSPIN_TTSPIN_H

/* C interface to the ttspin library.
 *
 * Every fallible call returns a ttspin_status; on failure the message is
 * available from ttspin_last_error() on the same thread until the next
 * call. Objects are opaque and owned by the caller once returned; release
 * them with the matching *_free. Strings handed out by the library are
 * NUL-terminated and released with ttspin_string_free. */

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define TTSPIN_API __declspec(dllexport)
#else
#define TTSPIN_API __attribute__((visibility("default")))
#endif

typedef enum ttspin_status {
  TTSPIN_OK = 0,
  TTSPIN_ERR_INVALID_ARGUMENT = 1,
  TTSPIN_ERR_INVALID_STRUCTURE = 2,
  TTSPIN_ERR_MODE_MISMATCH = 3,
  TTSPIN_ERR_DIMENSION_CAP = 4,
  TTSPIN_ERR_SCHEMA = 5,
  TTSPIN_ERR_SINGULAR_LOCAL_SYSTEM = 6,
  TTSPIN_ERR_IO = 7,
  TTSPIN_ERR_INTERNAL = 8
} ttspin_status;

typedef struct ttspin_system ttspin_system;
typedef struct ttspin_operator ttspin_operator;
typedef struct ttspin_spectrum ttspin_spectrum;

TTSPIN_API const char* ttspin_version(void);
TTSPIN_API const char* ttspin_status_name(ttspin_status s);
TTSPIN_API const char* ttspin_last_error(void);
TTSPIN_API void ttspin_string_free(char* s);

/* ---- spin systems ---- */

TTSPIN_API ttspin_status ttspin_system_load(const char* path, ttspin_system** out);
TTSPIN_API ttspin_status ttspin_system_parse(const char* json, ttspin_system** out);
/* Backbone-like synthetic chain with `spins` nuclei. */
TTSPIN_API ttspin_status ttspin_system_synthetic(size_t spins, uint64_t seed,
                                                 ttspin_system** out);
TTSPIN_API ttspin_status ttspin_system_to_json(const ttspin_system* sys, char** out);
TTSPIN_API size_t ttspin_system_size(const ttspin_system* sys);
TTSPIN_API double ttspin_system_damping(const ttspin_system* sys);
TTSPIN_API void ttspin_system_free(ttspin_system* sys);

/* ---- Liouvillian compression ---- */

typedef enum ttspin_sum_method { TTSPIN_SUM_AMEN = 0, TTSPIN_SUM_BINARY = 1 } ttspin_sum_method;

typedef struct ttspin_build_options {
  double eps;               /* relative Frobenius tolerance */
  ttspin_sum_method method;
  size_t max_sweeps;        /* AMEn only */
  size_t enrichment_rank;   /* AMEn only */
  size_t max_rank;          /* 0: uncapped */
} ttspin_build_options;

TTSPIN_API void ttspin_build_options_default(ttspin_build_options* opts);

/* Sums the commutation superoperator rho -> [H, rho] into a train.
 * `report_json` (optional) receives the summation report; `converged`
 * (optional) is 0 when the sweep budget ran out, the train is still
 * returned in that case. */
TTSPIN_API ttspin_status ttspin_build_liouvillian(const ttspin_system* sys,
                                                  const ttspin_build_options* opts,
                                                  ttspin_operator** out,
                                                  char** report_json,
                                                  int* converged);

TTSPIN_API size_t ttspin_operator_order(const ttspin_operator* op);
/* Writes order + 1 bond ranks into `ranks` when capacity allows; returns the
 * number of bonds either way. */
TTSPIN_API size_t ttspin_operator_ranks(const ttspin_operator* op, size_t* ranks,
                                        size_t capacity);
TTSPIN_API double ttspin_operator_effective_rank(const ttspin_operator* op);
TTSPIN_API ttspin_status ttspin_operator_save(const ttspin_operator* op, const char* path);
TTSPIN_API ttspin_status ttspin_operator_load(const char* path, ttspin_operator** out);
/* Dense row-major matrix, interleaved (re, im); `out` holds 2 * rows * cols
 * doubles. Refused above 2^24 entries. */
TTSPIN_API void ttspin_operator_dense_shape(const ttspin_operator* op, size_t* rows,
                                            size_t* cols);
TTSPIN_API ttspin_status ttspin_operator_to_dense(const ttspin_operator* op, double* out);
TTSPIN_API void ttspin_operator_free(ttspin_operator* op);

/* ---- spectra ---- */

typedef enum ttspin_solver { TTSPIN_SOLVER_AMEN = 0, TTSPIN_SOLVER_DMRG = 1 } ttspin_solver;

typedef enum ttspin_point_status {
  TTSPIN_POINT_OK = 0,
  TTSPIN_POINT_NOT_CONVERGED = 1,
  TTSPIN_POINT_FAILED = 2
} ttspin_point_status;

typedef struct ttspin_spectrum_options {
  const char* isotope;
  /* Hz window; lines of a spin at offset nu appear at +nu. */
  double from_hz;
  double to_hz;
  size_t points;
  double eps;
  ttspin_solver solver;
  size_t max_sweeps;
  size_t enrichment_rank;
  int warm_start;
  unsigned threads;         /* 0: hardware concurrency */
  size_t chunk;             /* grid points per warm-started chain */
  double op_round_tol;      /* 0: library default */
  uint64_t seed;
} ttspin_spectrum_options;

TTSPIN_API void ttspin_spectrum_options_default(ttspin_spectrum_options* opts);

/* Frequencies run in increasing angular frequency omega = -2 pi f, so the
 * Hz column descends from to_hz to from_hz. */
TTSPIN_API ttspin_status ttspin_spectrum_run(const ttspin_system* sys,
                                             const ttspin_spectrum_options* opts,
                                             ttspin_spectrum** out);
TTSPIN_API size_t ttspin_spectrum_points(const ttspin_spectrum* s);
TTSPIN_API size_t ttspin_spectrum_converged(const ttspin_spectrum* s);
TTSPIN_API ttspin_status ttspin_spectrum_point(const ttspin_spectrum* s, size_t k,
                                               double* omega, double* amplitude,
                                               ttspin_point_status* status);
TTSPIN_API ttspin_status ttspin_spectrum_csv(const ttspin_spectrum* s, char** out);
TTSPIN_API ttspin_status ttspin_spectrum_json(const ttspin_spectrum* s, char** out);
TTSPIN_API void ttspin_spectrum_free(ttspin_spectrum* s);

/* Dense reference spectrum on explicit angular frequencies. */
TTSPIN_API ttspin_status ttspin_dense_spectrum(const ttspin_system* sys, const char* isotope,
                                               const double* omega, size_t n,
                                               double* amplitude);

/* ---- oracle cross-check ---- */

/* Runs the dense comparison suite. `passed` is 1 when every check is within
 * tolerance. Systems beyond the dense limits give TTSPIN_ERR_DIMENSION_CAP. */
TTSPIN_API ttspin_status ttspin_validate(const ttspin_system* sys, double eps,
                                         char** report_json, int* passed);

#ifdef __cplusplus
}
#endif

#endif
