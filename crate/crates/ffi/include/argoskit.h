#ifndef ARGOSKIT_H
#define ARGOSKIT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ArgosStatus {
  ARGOS_STATUS_OK = 0,
  ARGOS_STATUS_NULL_POINTER = 1,
  ARGOS_STATUS_INVALID_ARGUMENT = 2,
  ARGOS_STATUS_UNKNOWN_SYSTEM = 3,
  ARGOS_STATUS_DIMENSION_MISMATCH = 4,
  ARGOS_STATUS_INTEGRATION_FAILURE = 5,
  ARGOS_STATUS_NUMERICAL = 6,
  ARGOS_STATUS_IO = 7,
  ARGOS_STATUS_PARSE = 8,
  ARGOS_STATUS_OUT_OF_RANGE = 9,
  ARGOS_STATUS_PANIC = 10,
} ArgosStatus;

// Opaque identified-model handle.
typedef struct ArgosModel ArgosModel;

// Opaque trajectory handle.
typedef struct ArgosTrajectory ArgosTrajectory;

// Options for [`argos_discover`]; start from [`argos_discover_options_default`].
typedef struct ArgosDiscoverOptions {
  uint32_t degree;
  bool trig;
  size_t chains;
  size_t iters;
  size_t warmup;
  double ci_level;
  uint64_t seed;
} ArgosDiscoverOptions;

// Posterior summary of one retained term.
typedef struct ArgosTerm {
  double mean;
  double ci_lo;
  double ci_hi;
} ArgosTerm;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failure on this thread, or null. Free with
// [`argos_string_free`].
char *argos_last_error(void);

// # Safety
// `s` must be null or a string returned by this library, not yet freed.
void argos_string_free(char *s);

struct ArgosDiscoverOptions argos_discover_options_default(void);

// Simulates a built-in system. `dt <= 0` selects the system default and a
// non-finite `snr_db` (e.g. `INFINITY`) means no noise.
//
// # Safety
// `system` must be a NUL-terminated string; `out` must be writable.
enum ArgosStatus argos_simulate(const char *system,
                                double dt,
                                size_t n,
                                double snr_db,
                                uint64_t seed,
                                struct ArgosTrajectory **out);

// Wraps caller data: `states` is `n x dim`, row-major, sampled every `dt`
// from time 0.
//
// # Safety
// `states` must point to `n * dim` readable doubles; `out` must be writable.
enum ArgosStatus argos_trajectory_from_data(const double *states,
                                            size_t n,
                                            size_t dim,
                                            double dt,
                                            struct ArgosTrajectory **out);

// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum ArgosStatus argos_trajectory_load_csv(const char *path, struct ArgosTrajectory **out);

// # Safety
// `traj` must be a live handle; `path` a NUL-terminated string.
enum ArgosStatus argos_trajectory_save_csv(const struct ArgosTrajectory *traj, const char *path);

// # Safety
// `traj` must be a live handle; `n` and `dim` must be writable.
enum ArgosStatus argos_trajectory_shape(const struct ArgosTrajectory *traj, size_t *n, size_t *dim);

// Copies the states, row-major, into `buf` of length `len >= n * dim`.
//
// # Safety
// `traj` must be a live handle; `buf` must hold `len` writable doubles.
enum ArgosStatus argos_trajectory_copy_states(const struct ArgosTrajectory *traj,
                                              double *buf,
                                              size_t len);

// # Safety
// `traj` must be null or a handle not yet freed.
void argos_trajectory_free(struct ArgosTrajectory *traj);

// Identifies governing equations. `options` may be null for defaults.
//
// # Safety
// `traj` must be a live handle; `options` null or readable; `out` writable.
enum ArgosStatus argos_discover(const struct ArgosTrajectory *traj,
                                const struct ArgosDiscoverOptions *options,
                                struct ArgosModel **out);

// # Safety
// `model` must be a live handle; `count` writable.
enum ArgosStatus argos_model_n_equations(const struct ArgosModel *model, size_t *count);

// Number of retained terms in equation `eq` (zero-based).
//
// # Safety
// `model` must be a live handle; `count` writable.
enum ArgosStatus argos_model_n_terms(const struct ArgosModel *model, size_t eq, size_t *count);

// Term `k` of equation `eq`. When `name` is non-null it receives the term
// name, to be freed with [`argos_string_free`].
//
// # Safety
// `model` must be a live handle; `term` writable; `name` null or writable.
enum ArgosStatus argos_model_term(const struct ArgosModel *model,
                                  size_t eq,
                                  size_t k,
                                  struct ArgosTerm *term,
                                  char **name);

// JSON form of the model; free with [`argos_string_free`].
//
// # Safety
// `model` must be a live handle; `out` writable.
enum ArgosStatus argos_model_to_json(const struct ArgosModel *model, char **out);

// Equations as text, one per line; free with [`argos_string_free`].
//
// # Safety
// `model` must be a live handle; `out` writable.
enum ArgosStatus argos_model_to_text(const struct ArgosModel *model, char **out);

// Sets `*matches` to whether every equation has exactly the true terms of
// the named built-in system.
//
// # Safety
// `model` must be a live handle; `system` NUL-terminated; `matches` writable.
enum ArgosStatus argos_model_matches_truth(const struct ArgosModel *model,
                                           const char *system,
                                           bool *matches);

// # Safety
// `model` must be null or a handle not yet freed.
void argos_model_free(struct ArgosModel *model);

// Modal analysis of `dz/dt = A z + b` (`a` row-major, `m x m`), as JSON.
//
// # Safety
// `a` must hold `m * m` doubles, `b` `m` doubles; `out` writable.
enum ArgosStatus argos_modal_analysis_json(const double *a, const double *b, size_t m, char **out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ARGOSKIT_H */
