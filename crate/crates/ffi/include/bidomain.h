#ifndef BIDOMAIN_H
#define BIDOMAIN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every exported function.
typedef enum BidomainStatus {
  BIDOMAIN_STATUS_OK = 0,
  BIDOMAIN_STATUS_NULL_POINTER = 1,
  BIDOMAIN_STATUS_INVALID_UTF8 = 2,
  // Malformed or out-of-range configuration.
  BIDOMAIN_STATUS_CONFIG = 3,
  // Rejected grid, conductivity or model parameters.
  BIDOMAIN_STATUS_INVALID_INPUT = 4,
  // Factorization, eigen solve, integration or fixed-point failure.
  BIDOMAIN_STATUS_NUMERICAL = 5,
  // No dissipativity certificate exists for the model.
  BIDOMAIN_STATUS_CERTIFICATE = 6,
  BIDOMAIN_STATUS_IO = 7,
  // Output buffer shorter than required; the required length is reported.
  BIDOMAIN_STATUS_BUFFER_TOO_SMALL = 8,
  // Fixed point requested before a successful periodic solve.
  BIDOMAIN_STATUS_NOT_SOLVED = 9,
  BIDOMAIN_STATUS_PANIC = 10,
} BidomainStatus;

// Assembled problem plus the most recent periodic solution.
typedef struct BidomainProblem BidomainProblem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message describing the last failed call on this thread, or an empty
// string. Valid until the next call on the same thread.
const char *bidomain_last_error(void);

// Library version as a static NUL-terminated string.
const char *bidomain_version(void);

// Parses INI configuration text and assembles the problem: operator,
// eigenbasis, certificate, forcing and absorbing-ball radius. Relative paths
// in the configuration resolve against `base_dir`, which may be null.
//
// # Safety
// `config_text` and a non-null `base_dir` must be NUL-terminated strings;
// `out` must be a valid pointer. Release the handle with
// [`bidomain_problem_free`].
enum BidomainStatus bidomain_problem_new(const char *config_text,
                                         const char *base_dir,
                                         uint64_t seed,
                                         struct BidomainProblem **out);

// Releases a handle. Null is ignored.
//
// # Safety
// `problem` must come from [`bidomain_problem_new`] and not be used again.
void bidomain_problem_free(struct BidomainProblem *problem);

// Number of Galerkin modes, including the constant mode.
//
// # Safety
// Pointers must be valid.
enum BidomainStatus bidomain_problem_modes(const struct BidomainProblem *problem, size_t *modes);

// Number of grid nodes.
//
// # Safety
// Pointers must be valid.
enum BidomainStatus bidomain_problem_nodes(const struct BidomainProblem *problem, size_t *nodes);

// Writes the eigenvalues `λ_0 ≤ … ≤ λ_k` into `values`, which must hold at
// least `bidomain_problem_modes` entries.
//
// # Safety
// `values` must be writable for `len` doubles.
enum BidomainStatus bidomain_problem_eigenvalues(const struct BidomainProblem *problem,
                                                 double *values,
                                                 size_t len);

// Radius `R` of the absorbing ball in the energy norm.
//
// # Safety
// Pointers must be valid.
enum BidomainStatus bidomain_problem_radius(const struct BidomainProblem *problem, double *radius);

// One-sided Lipschitz constant `λ_f` of the cubic reaction. Only defined
// for FitzHugh–Nagumo; other models give [`BidomainStatus::InvalidInput`].
//
// # Safety
// Pointers must be valid.
enum BidomainStatus bidomain_problem_lipschitz(const struct BidomainProblem *problem,
                                               double *lambda_f);

// Solves for the time-periodic orbit from the configured initial state.
// `residual` and `iterations` receive the final Poincaré residual and the
// iteration count; failure to reach the tolerance is [`BidomainStatus::Numerical`].
//
// # Safety
// Pointers must be valid; `problem` must not be shared with another thread.
enum BidomainStatus bidomain_problem_solve_periodic(struct BidomainProblem *problem,
                                                    double *residual,
                                                    size_t *iterations);

// Modal coefficients of the periodic orbit at `t = 0`: `alpha` for the
// potential, `beta` for the recovery variable, each of length `modes`.
//
// # Safety
// `alpha` and `beta` must be writable for `len` doubles.
enum BidomainStatus bidomain_problem_fixed_point(const struct BidomainProblem *problem,
                                                 double *alpha,
                                                 double *beta,
                                                 size_t len);

// Runs a CLI subcommand (`assemble`, `eigens`, `solve-periodic`, ...) on a
// configuration file, writing artifacts under `out_dir` (null for the
// configured directory). `passed` receives 1 when every asserted check held.
//
// # Safety
// Strings must be NUL-terminated; `passed` must be valid.
enum BidomainStatus bidomain_run(const char *subcommand,
                                 const char *config_path,
                                 const char *out_dir,
                                 uint64_t seed,
                                 int32_t *passed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BIDOMAIN_H */
