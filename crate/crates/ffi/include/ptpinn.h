#ifndef PTPINN_H
#define PTPINN_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PtStatus {
  PT_STATUS_OK = 0,
  PT_STATUS_NULL_POINTER = 1,
  PT_STATUS_INVALID_ARGUMENT = 2,
  PT_STATUS_IO = 3,
  PT_STATUS_FORMAT = 4,
  PT_STATUS_NUMERICAL = 5,
  /**
   * More replicates failed than the config allows; results were written.
   */
  PT_STATUS_TOO_MANY_FAILURES = 6,
  PT_STATUS_PANIC = 7,
} PtStatus;

/**
 * A network with its parameters.
 */
typedef struct PtNetwork PtNetwork;

/**
 * A benchmark problem.
 */
typedef struct PtProblem PtProblem;

typedef struct PtScores {
  double l2_rel;
  double l1_abs;
  double linf_abs;
} PtScores;

typedef struct PtRunSummary {
  uint32_t replicates;
  uint32_t failures;
  struct PtScores mean;
  struct PtScores std;
} PtRunSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread; empty after a success.
 * Valid until the next call on the same thread.
 */
const char *ptpinn_last_error(void);

/**
 * `"f64"` or `"f32"`: the precision the library computes in.
 */
const char *ptpinn_precision(void);

/**
 * Builds a benchmark by name: `heat3d`, `reaction` (parameter = rho),
 * `heat2d_hf`, `heat1d_nl` (parameter = l), `allen_cahn` (needs
 * `reference_path`) or `convection` (parameter = beta).
 *
 * # Safety
 * `name` must be a NUL-terminated string; `reference_path` may be null
 * unless the benchmark is `allen_cahn`; `out` must be writable.
 */
enum PtStatus ptpinn_problem_new(const char *name,
                                 double parameter,
                                 const char *reference_path,
                                 struct PtProblem **out);

/**
 * # Safety
 * `problem` must come from [`ptpinn_problem_new`] or be null.
 */
void ptpinn_problem_free(struct PtProblem *problem);

/**
 * Number of network inputs the problem expects (spatial dimension + 1).
 *
 * # Safety
 * `problem` must be a live handle or null (returns 0).
 */
uint32_t ptpinn_problem_input_dim(const struct PtProblem *problem);

/**
 * Xavier-initialized tanh MLP with one output.
 *
 * # Safety
 * `out` must be writable.
 */
enum PtStatus ptpinn_network_new_mlp(uint32_t input_dim,
                                     uint32_t hidden_layers,
                                     uint32_t width,
                                     uint64_t seed,
                                     struct PtNetwork **out);

/**
 * Xavier-initialized residual network with one output.
 *
 * # Safety
 * `out` must be writable.
 */
enum PtStatus ptpinn_network_new_resnet(uint32_t input_dim,
                                        uint32_t blocks,
                                        uint32_t width,
                                        uint64_t seed,
                                        struct PtNetwork **out);

/**
 * Loads a checkpoint written by training or [`ptpinn_network_save`].
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum PtStatus ptpinn_network_load(const char *path, struct PtNetwork **out);

/**
 * # Safety
 * `network` must be a live handle; `path` a NUL-terminated string.
 */
enum PtStatus ptpinn_network_save(const struct PtNetwork *network, const char *path);

/**
 * # Safety
 * `network` must come from a `ptpinn_network_*` constructor or be null.
 */
void ptpinn_network_free(struct PtNetwork *network);

/**
 * # Safety
 * `network` must be a live handle or null (returns 0).
 */
uint32_t ptpinn_network_input_dim(const struct PtNetwork *network);

/**
 * # Safety
 * `network` must be a live handle or null (returns 0).
 */
uint64_t ptpinn_network_param_count(const struct PtNetwork *network);

/**
 * Evaluates the network at `n` points stored row-major in `points`
 * (`n × input_dim` values) and writes `n` outputs.
 *
 * # Safety
 * `points` must hold `n * input_dim` doubles and `out` room for `n`.
 */
enum PtStatus ptpinn_network_predict(const struct PtNetwork *network,
                                     const double *points,
                                     size_t n,
                                     double *out);

/**
 * Scores the network on `n_test` uniform points of the problem's domain
 * drawn with `seed`.
 *
 * # Safety
 * Both handles must be live; `out` writable.
 */
enum PtStatus ptpinn_score(const struct PtNetwork *network,
                           const struct PtProblem *problem,
                           size_t n_test,
                           uint64_t seed,
                           struct PtScores *out);

/**
 * Solves Allen-Cahn with the spectral oracle on an `nx × nt` grid and
 * writes it to `path`. Zero `nx` or `nt` selects the default grid size and
 * `max_dt <= 0` the default step bound.
 *
 * # Safety
 * `path` must be a NUL-terminated string.
 */
enum PtStatus ptpinn_ac_reference(uint32_t nx, uint32_t nt, double max_dt, const char *path);

/**
 * Runs the experiment described by a config file, as `ptpinn run` does.
 * `output_root` may be null. The summary is filled even when
 * [`PtStatus::TooManyFailures`] is returned.
 *
 * # Safety
 * `config_path` must be a NUL-terminated string; `out` writable.
 */
enum PtStatus ptpinn_run_experiment(const char *config_path,
                                    const char *output_root,
                                    struct PtRunSummary *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PTPINN_H */
