#ifndef STOCHSYNC_H
#define STOCHSYNC_H

/* Generated by cbindgen from stochsync-capi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status code returned by every fallible entry point.
 */
typedef enum {
  /**
   * Success.
   */
  SS_OK = 0,
  /**
   * A pointer argument was null or UTF-8 conversion failed.
   */
  SS_BAD_ARGUMENT = 1,
  /**
   * The config or problem data was rejected; see `ss_last_error`.
   */
  SS_INVALID_INPUT = 2,
  /**
   * Numerical analysis failed; see `ss_last_error`.
   */
  SS_ANALYSIS_ERROR = 3,
  /**
   * Filesystem I/O failed.
   */
  SS_IO_ERROR = 4,
} SsStatus;

/**
 * Opaque parsed analysis configuration.
 */
typedef struct SsConfig SsConfig;

/**
 * Spectral summary of the configured network.
 */
typedef struct {
  double lambda2;
  double lambda_n;
  double lambda2_d;
  double lambda_n_u;
  double tau;
  double gamma_bar;
} SsSpectra;

/**
 * Feasibility verdict of one synchronization check.
 */
typedef struct {
  /**
   * 1 when feasible, 0 otherwise.
   */
  int32_t feasible;
  /**
   * Fixed-point residual of the reported Riccati solution.
   */
  double residual;
  /**
   * Total solver iterations across all instances.
   */
  uint64_t iterations;
  /**
   * Laplacian eigenvalue of the binding instance; NaN when not
   * applicable.
   */
  double binding_eigenvalue;
} SsCertificate;

/**
 * Closed-form scalar torus margin.
 */
typedef struct {
  double lambda_sup;
  double alpha_sq_2;
  double alpha_sq_n;
  /**
   * NaN when the deterministic part alone is infeasible.
   */
  double rho_sm;
  /**
   * 1 when the deterministic part is feasible.
   */
  int32_t deterministic_feasible;
} SsTorusMargin;

/**
 * Monte Carlo outcome summary.
 */
typedef struct {
  /**
   * 0 sync, 1 desync, 2 inconclusive.
   */
  int32_t verdict;
  double k_hat;
  double beta_hat;
  double r_squared;
  uint64_t diverged_trials;
} SsSimSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Most recent error message for this thread; the pointer stays valid
 * until the next failing call on the same thread.
 */
const char *ss_last_error(void);

/**
 * Parse a TOML config file into an opaque handle; null on failure.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string.
 */
SsConfig *ss_config_from_file(const char *path);

/**
 * Parse a TOML config from memory; null on failure.
 *
 * # Safety
 * `text` must be a valid NUL-terminated string.
 */
SsConfig *ss_config_parse(const char *text);

/**
 * Release a config handle. Null is ignored.
 *
 * # Safety
 * `cfg` must come from `ss_config_from_file`/`ss_config_parse` and must
 * not be used afterwards.
 */
void ss_config_free(SsConfig *cfg);

/**
 * Spectral summary (λ₂, λ_N, split eigenvalues, τ, γ̄) of the configured
 * network.
 *
 * # Safety
 * `cfg` and `out` must be valid pointers.
 */
SsStatus ss_spectra(const SsConfig *cfg, SsSpectra *out);

/**
 * Reduced (network-size-independent) synchronization check.
 *
 * # Safety
 * `cfg` and `out` must be valid pointers.
 */
SsStatus ss_check_reduced(const SsConfig *cfg, SsCertificate *out);

/**
 * Full transverse-dynamics synchronization check.
 *
 * # Safety
 * `cfg` and `out` must be valid pointers.
 */
SsStatus ss_check_full(const SsConfig *cfg, SsCertificate *out);

/**
 * Per-eigenvalue torus synchronization check.
 *
 * # Safety
 * `cfg` and `out` must be valid pointers.
 */
SsStatus ss_check_torus(const SsConfig *cfg, SsCertificate *out);

/**
 * Critical coefficient of dispersion by bisection; `+inf` when no finite
 * bracket exists. Fails with `SsAnalysisError` when the deterministic
 * check already fails at zero dispersion.
 *
 * # Safety
 * `cfg` and `out` must be valid pointers.
 */
SsStatus ss_critical_cod(const SsConfig *cfg, double *out);

/**
 * Closed-form scalar torus margin for one lattice.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
SsStatus ss_scalar_torus_margin(double a,
                                double delta,
                                double g,
                                double mu,
                                double sigma_sq,
                                uint64_t n,
                                uint64_t k,
                                uint64_t d,
                                SsTorusMargin *out);

/**
 * Run the configured `[sweep]` block and write the CSV table.
 *
 * # Safety
 * `cfg` and `csv_path` must be valid pointers.
 */
SsStatus ss_torus_sweep_csv(const SsConfig *cfg, const char *csv_path);

/**
 * Monte Carlo simulation of the configured network. `csv_path` may be
 * null; `seed_override < 0` keeps the config seed.
 *
 * # Safety
 * `cfg` and `out` must be valid pointers; `csv_path` may be null.
 */
SsStatus ss_simulate(const SsConfig *cfg,
                     const char *csv_path,
                     int64_t seed_override,
                     SsSimSummary *out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* STOCHSYNC_H */
