#ifndef DARCY_BDDC_H
#define DARCY_BDDC_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DbConstraints {
  DB_CONSTRAINTS_INITIAL = 0,
  DB_CONSTRAINTS_ADAPTIVE = 1,
  DB_CONSTRAINTS_MULTISCALE = 2,
} DbConstraints;

typedef enum DbScaling {
  DB_SCALING_MULTIPLICITY = 0,
  DB_SCALING_STIFFNESS = 1,
} DbScaling;

typedef enum DbStatus {
  DB_STATUS_OK = 0,
  DB_STATUS_INVALID_ARGUMENT = 1,
  DB_STATUS_FORMAT = 2,
  DB_STATUS_NUMERICAL = 3,
  /**
   * The solve stopped at the iteration limit; the solution handle is
   * still produced.
   */
  DB_STATUS_NOT_CONVERGED = 4,
  DB_STATUS_IO = 5,
  DB_STATUS_TOO_LARGE = 6,
  DB_STATUS_INTERNAL = 7,
  DB_STATUS_NULL_POINTER = 8,
  DB_STATUS_PANIC = 9,
} DbStatus;

/**
 * Assembled system with its decomposition.
 */
typedef struct DbProblem DbProblem;

/**
 * Result of [`db_solve`].
 */
typedef struct DbSolution DbSolution;

/**
 * Solver settings. `tau` may be `INFINITY`.
 */
typedef struct DbConfig {
  double tau;
  enum DbScaling scaling;
  double tol;
  size_t maxit;
  enum DbConstraints constraints;
} DbConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread (empty if none). The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *db_last_error(void);

/**
 * Default settings: no adaptivity, multiplicity scaling, tolerance 1e-6.
 */
struct DbConfig db_config_default(void);

/**
 * Assembles a problem on a `dim`-dimensional grid (2 or 3).
 *
 * `counts`, `sizes` and `splits` hold `dim` entries; `perm` holds
 * `dim * n_cells` values (kx, ky[, kz] per cell, x fastest). Wells are one
 * injector and one producer of equal `strength`.
 *
 * # Safety
 * All pointers must be valid for the stated lengths; `out` must be writable.
 */
enum DbStatus db_problem_new(size_t dim,
                             const size_t *counts,
                             const double *sizes,
                             const double *perm,
                             size_t perm_len,
                             const size_t *splits,
                             size_t source_cell,
                             size_t sink_cell,
                             double strength,
                             struct DbProblem **out);

/**
 * # Safety
 * `problem` must come from [`db_problem_new`] and not be used afterwards.
 */
void db_problem_free(struct DbProblem *problem);

/**
 * Number of flux unknowns (interior faces).
 *
 * # Safety
 * `problem` must be a valid handle.
 */
size_t db_problem_n_flux(const struct DbProblem *problem);

/**
 * # Safety
 * `problem` must be a valid handle.
 */
size_t db_problem_n_cells(const struct DbProblem *problem);

/**
 * Solves `problem`. On `DB_STATUS_OK` and `DB_STATUS_NOT_CONVERGED` a
 * solution handle is written to `out`.
 *
 * # Safety
 * `problem` and `config` must be valid; `out` must be writable.
 */
enum DbStatus db_solve(const struct DbProblem *problem,
                       const struct DbConfig *config,
                       struct DbSolution **out);

/**
 * # Safety
 * `solution` must come from [`db_solve`] and not be used afterwards.
 */
void db_solution_free(struct DbSolution *solution);

/**
 * Copies the fluxes (length [`db_problem_n_flux`]) into `dst`.
 *
 * # Safety
 * `dst` must be valid for `len` writes.
 */
enum DbStatus db_solution_flux(const struct DbSolution *solution, double *dst, size_t len);

/**
 * Copies the pressures (length [`db_problem_n_cells`], zero mean) into `dst`.
 *
 * # Safety
 * `dst` must be valid for `len` writes.
 */
enum DbStatus db_solution_pressure(const struct DbSolution *solution, double *dst, size_t len);

/**
 * # Safety
 * `solution` must be a valid handle.
 */
size_t db_solution_iterations(const struct DbSolution *solution);

/**
 * Lanczos condition number estimate.
 *
 * # Safety
 * `solution` must be a valid handle.
 */
double db_solution_kappa(const struct DbSolution *solution);

/**
 * Coarse space size.
 *
 * # Safety
 * `solution` must be a valid handle.
 */
size_t db_solution_n_coarse(const struct DbSolution *solution);

/**
 * Condition number indicator of the adaptive constraints, NaN otherwise.
 *
 * # Safety
 * `solution` must be a valid handle.
 */
double db_solution_omega_tilde(const struct DbSolution *solution);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DARCY_BDDC_H */
