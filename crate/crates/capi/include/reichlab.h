/* C interface to the reichlab numerical laboratory. */

#ifndef REICHLAB_H
#define REICHLAB_H

/* Generated by the reichlab-capi build script (cbindgen); do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Success.
 */
#define REICHLAB_OK 0

/**
 * Input outside the mathematical domain (point outside the disk, window
 * too small, parameter out of range).
 */
#define REICHLAB_ERR_DOMAIN 1

/**
 * A certified computation gave up before reaching its tolerance
 * (quadrature budget, word depth, decay envelope, boundary deviation).
 */
#define REICHLAB_ERR_CONVERGENCE 2

/**
 * NULL pointer, non-finite double, unknown cell index, or otherwise
 * malformed argument.
 */
#define REICHLAB_ERR_INVALID_ARG 3

/**
 * Unexpected internal failure.
 */
#define REICHLAB_ERR_INTERNAL 4

/**
 * Opaque handle to a set of partition atoms built on a model's window.
 */
typedef struct ReichlabAtomSet ReichlabAtomSet;

/**
 * Opaque handle to a group of disk automorphisms.
 */
typedef struct ReichlabGroup ReichlabGroup;

/**
 * Opaque handle to a finite-window surface model.
 */
typedef struct ReichlabModel ReichlabModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string; never NULL, never
 * freed by the caller.
 */
const char *reichlab_version(void);

/**
 * Short static name for a status code ("ok", "domain", "convergence",
 * "invalid-argument", "internal", or "unknown"); never NULL, never freed
 * by the caller.
 */
const char *reichlab_error_name(int32_t code);

/**
 * Weight-4 kernel of the unit disk, K(z, w) = (1 - z conj(w))^-4, for
 * |z| < 1 and |w| < 1.
 *
 * # Safety
 * `out_re` and `out_im` must be valid writable pointers.
 */
int32_t reichlab_disk_kernel(double z_re,
                             double z_im,
                             double w_re,
                             double w_im,
                             double *out_re,
                             double *out_im);

/**
 * Hyperbolic distance between two points of the unit disk (density
 * 1/(1 - |z|^2)).
 *
 * # Safety
 * `out` must be a valid writable pointer.
 */
int32_t reichlab_disk_distance(double z_re, double z_im, double w_re, double w_im, double *out);

/**
 * Sequence weight alpha_{k,l}(n) = (|z_{k,l}| / n + 1)^-4 at the integer
 * lattice point (k, l); n must be >= 1.
 *
 * # Safety
 * `out` must be a valid writable pointer.
 */
int32_t reichlab_alpha(int64_t k, int64_t l, uint32_t n, double *out);

/**
 * The gap |lambda| - Re(lambda); total, returns NaN on non-finite input.
 */
double reichlab_lambda_gap(double lambda_re, double lambda_im);

/**
 * Reference decay constant of partition atoms for a metric density
 * floor s0 > 0.
 *
 * # Safety
 * `out` must be a valid writable pointer.
 */
int32_t reichlab_pestimate_constant(double s0, double *out);

/**
 * The trivial (rank-0) group; never NULL.
 */
struct ReichlabGroup *reichlab_group_trivial(void);

/**
 * Cyclic hyperbolic group of the given translation length (> 0);
 * NULL on invalid input.
 */
struct ReichlabGroup *reichlab_group_cyclic(double length);

/**
 * Free rank-2 group generated by the level-2 congruence translations,
 * conjugated to the disk; never NULL.
 */
struct ReichlabGroup *reichlab_group_gamma2(void);

/**
 * Frees a group handle; NULL is a no-op.
 *
 * # Safety
 * `group` must be NULL or a pointer returned by a `reichlab_group_*`
 * constructor that has not been freed yet.
 */
void reichlab_group_free(struct ReichlabGroup *group);

/**
 * Truncated orbit sum of kernel pullbacks at word depth `depth`:
 * value and the certificate bound on the omitted terms.
 *
 * # Safety
 * `group` must be a live group handle; `out_re`, `out_im`, and
 * `out_tail` must be valid writable pointers.
 */
int32_t reichlab_poincare_kernel(const struct ReichlabGroup *group,
                                 double z_re,
                                 double z_im,
                                 double w_re,
                                 double w_im,
                                 size_t depth,
                                 double *out_re,
                                 double *out_im,
                                 double *out_tail);

/**
 * Plain-disk surrogate model on a centered `side x side` window with the
 * given embedding margin (> 1); NULL on invalid input.
 */
struct ReichlabModel *reichlab_model_disk(int64_t window_side, double margin);

/**
 * Punctured-window model: a seeded quasilattice (offset bound `delta`
 * <= 1/8) on a centered `side x side` window, punctures regularized at
 * radius `eps_punct`, density floor from covering radius `r0`; NULL on
 * invalid input.
 */
struct ReichlabModel *reichlab_model_punctured(int64_t window_side,
                                               double margin,
                                               uint64_t seed,
                                               double delta,
                                               double eps_punct,
                                               double r0);

/**
 * Frees a model handle; NULL is a no-op.
 *
 * # Safety
 * `model` must be NULL or a pointer returned by a `reichlab_model_*`
 * constructor that has not been freed yet.
 */
void reichlab_model_free(struct ReichlabModel *model);

/**
 * Number of window cells of a model; 0 for NULL.
 *
 * # Safety
 * `model` must be NULL or a live model handle.
 */
size_t reichlab_model_cell_count(const struct ReichlabModel *model);

/**
 * Builds one partition atom per window cell, each with an exact moment
 * table and a fitted decay certificate; `tol` caps the certified series
 * truncation error of later evaluations. On success writes a new atom-set
 * handle to `out`.
 *
 * # Safety
 * `model` must be a live model handle; `out` must be a valid writable
 * pointer.
 */
int32_t reichlab_atoms_build(const struct ReichlabModel *model,
                             double tol,
                             struct ReichlabAtomSet **out);

/**
 * Frees an atom-set handle; NULL is a no-op.
 *
 * # Safety
 * `atoms` must be NULL or a pointer returned by `reichlab_atoms_build`
 * that has not been freed yet.
 */
void reichlab_atoms_free(struct ReichlabAtomSet *atoms);

/**
 * Number of atoms in a set; 0 for NULL.
 *
 * # Safety
 * `atoms` must be NULL or a live atom-set handle.
 */
size_t reichlab_atoms_len(const struct ReichlabAtomSet *atoms);

/**
 * Fitted decay constant of the atom of cell (k, l):
 * |P_{k,l}(z)| <= C e^(-|z - z_{k,l}| / C) at audited sample points.
 *
 * # Safety
 * `atoms` must be a live atom-set handle; `out` must be a valid writable
 * pointer.
 */
int32_t reichlab_atom_decay_constant(const struct ReichlabAtomSet *atoms,
                                     int64_t k,
                                     int64_t l,
                                     double *out);

/**
 * Evaluates the atom of cell (k, l) at z.
 *
 * # Safety
 * `model` and `atoms` must be live handles built from the same model;
 * `out_re` and `out_im` must be valid writable pointers.
 */
int32_t reichlab_atom_eval(const struct ReichlabModel *model,
                           const struct ReichlabAtomSet *atoms,
                           int64_t k,
                           int64_t l,
                           double z_re,
                           double z_im,
                           double *out_re,
                           double *out_im);

/**
 * Sums the atoms of all cells within `radius` of z (z in the region at
 * distance >= 1/4 from the integer lattice); writes the value and the
 * certificate bound on the truncation error.
 *
 * # Safety
 * `model` and `atoms` must be live handles built from the same model;
 * `out_re`, `out_im`, and `out_tail` must be valid writable pointers.
 */
int32_t reichlab_partition_sum(const struct ReichlabModel *model,
                               const struct ReichlabAtomSet *atoms,
                               double z_re,
                               double z_im,
                               double radius,
                               double *out_re,
                               double *out_im,
                               double *out_tail);

/**
 * Evaluates the weighted atom sum phi_n (weights alpha_{k,l}(n) over the
 * whole window) at z; writes the value and the series evaluation slack.
 *
 * # Safety
 * `model` and `atoms` must be live handles built from the same model;
 * `out_re`, `out_im`, and `out_slack` must be valid writable pointers.
 */
int32_t reichlab_phi_eval(const struct ReichlabModel *model,
                          const struct ReichlabAtomSet *atoms,
                          uint32_t n,
                          double z_re,
                          double z_im,
                          double *out_re,
                          double *out_im,
                          double *out_slack);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REICHLAB_H */
