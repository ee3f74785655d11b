#ifndef NSGEOM_H
#define NSGEOM_H

#include <stddef.h>

typedef enum NsgFluxIntegrand {
  // `|omega_3|`
  NSG_FLUX_INTEGRAND_ABS_OMEGA3 = 0,
  // `sgn(omega_3) omega_3`
  NSG_FLUX_INTEGRAND_OMEGA3_TILDE = 1,
  // `sqrt(omega_3^2 + 1)`
  NSG_FLUX_INTEGRAND_F_OMEGA3 = 2,
} NsgFluxIntegrand;

// Result of every call.
typedef enum NsgStatus {
  NSG_STATUS_OK = 0,
  NSG_STATUS_NULL_POINTER = 1,
  NSG_STATUS_INVALID_ARGUMENT = 2,
  NSG_STATUS_IO = 3,
  NSG_STATUS_FORMAT = 4,
  NSG_STATUS_COMPUTATION = 5,
  NSG_STATUS_PANIC = 6,
} NsgStatus;

typedef enum NsgStretchMethod {
  NSG_STRETCH_METHOD_QUADRATURE = 0,
  NSG_STRETCH_METHOD_SPECTRAL = 1,
} NsgStretchMethod;

// Opaque velocity or vorticity field on a periodic grid.
typedef struct NsgField NsgField;

// Opaque time-ordered snapshot series.
typedef struct NsgSeries NsgSeries;

// Double-cone fit of the vorticity directions above a threshold.
typedef struct NsgCone {
  double axis[3];
  double s;
  double delta;
  // Infinite when no cone exists.
  double constant;
  size_t n_samples;
} NsgCone;

typedef struct NsgStretching {
  double direction[3];
  double pv;
  double pv_at_cut;
  double pv_at_double_cut;
  double direct;
} NsgStretching;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *nsg_version(void);

// Message of the last failed call on this thread, or NULL. Valid until the
// next call on the same thread.
const char *nsg_last_error(void);

// Builds a field from three component arrays of `n[0] n[1] n[2]` values each,
// first index fastest.
//
// # Safety
// `n`, `len` point to 3 values; each component pointer to `n[0] n[1] n[2]` doubles.
enum NsgStatus nsg_field_new(const size_t *n,
                             const double *len,
                             double time,
                             const double *v1,
                             const double *v2,
                             const double *v3,
                             struct NsgField **out);

// Reads a velocity snapshot file.
//
// # Safety
// `path` is a NUL-terminated string; `out` is writable.
enum NsgStatus nsg_field_read(const char *path, struct NsgField **out);

// # Safety
// `field` is a live handle; `path` is a NUL-terminated string.
enum NsgStatus nsg_field_write(const struct NsgField *field, const char *path);

// # Safety
// `field` is NULL or a handle not yet freed.
void nsg_field_free(struct NsgField *field);

// Grid counts, box lengths and time of a field. Any output may be NULL.
//
// # Safety
// `field` is a live handle; non-NULL `n`, `len` hold 3 values.
enum NsgStatus nsg_field_shape(const struct NsgField *field, size_t *n, double *len, double *time);

// Copies component `c` (0, 1 or 2) into `buf`, which holds `cap` doubles.
//
// # Safety
// `field` is a live handle; `buf` holds `cap` doubles.
enum NsgStatus nsg_field_component(const struct NsgField *field, size_t c, double *buf, size_t cap);

// Spectral curl; returns a new handle.
//
// # Safety
// `field` is a live handle; `out` is writable.
enum NsgStatus nsg_field_curl(const struct NsgField *field, struct NsgField **out);

// Cone fit of the directions of `omega` where `|omega| > fraction max |omega|`.
//
// # Safety
// `omega` is a live handle; `out` is writable.
enum NsgStatus nsg_cone_fit(const struct NsgField *omega, double fraction, struct NsgCone *out);

// Stretching factor at `x` with cut radius `rho_cut`.
//
// # Safety
// `omega` is a live handle; `x` holds 3 values; `out` is writable.
enum NsgStatus nsg_stretching(const struct NsgField *omega,
                              const double *x,
                              double rho_cut,
                              enum NsgStretchMethod method,
                              struct NsgStretching *out);

// Integral of a function of `omega_3` over the horizontal disc of radius `r`
// at height `z` centered on `center`.
//
// # Safety
// `omega` is a live handle; `center` holds 2 values; `out` is writable.
enum NsgStatus nsg_disc_flux(const struct NsgField *omega,
                             const double *center,
                             double z,
                             double r,
                             enum NsgFluxIntegrand integrand,
                             double *out);

// Loads every snapshot in a directory, ordered by time.
//
// # Safety
// `dir` is a NUL-terminated string; `out` is writable.
enum NsgStatus nsg_series_load(const char *dir, struct NsgSeries **out);

// # Safety
// `series` is NULL or a handle not yet freed.
void nsg_series_free(struct NsgSeries *series);

// Number of snapshots and their first and last times. Any output may be NULL.
//
// # Safety
// `series` is a live handle.
enum NsgStatus nsg_series_info(const struct NsgSeries *series,
                               size_t *len,
                               double *t_first,
                               double *t_last);

// `sup Gamma` over the cylinders of radius `r0 2^-m` ending at `(x0, t0)`,
// `m = 0..levels`, written to `out[m]`.
//
// # Safety
// `series` is a live handle; `x0` holds 3 values; `out` holds `levels` doubles.
enum NsgStatus nsg_gamma_decay(const struct NsgSeries *series,
                               const double *x0,
                               double t0,
                               double r0,
                               size_t levels,
                               double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NSGEOM_H */
