/* C interface for the bykov-lab toolkit.
 *
 * Maintained by hand to match crates/capi/src/lib.rs; keep the two files in
 * sync when adding entry points. All functions returning int use the
 * BYKOV_* status codes below; on failure, bykov_last_error_message() gives
 * a thread-local description valid until the next failing call.
 */

#ifndef BYKOV_LAB_H
#define BYKOV_LAB_H

#ifdef __cplusplus
extern "C" {
#endif

#define BYKOV_OK 0
#define BYKOV_ERR_NULL_POINTER 1
#define BYKOV_ERR_INVALID_PARAMS 2
#define BYKOV_ERR_DOMAIN 3
#define BYKOV_ERR_INTEGRATION 4
#define BYKOV_ERR_LYAPUNOV 5

/* Opaque, heap-allocated parameter set. */
typedef struct BykovParams BykovParams;

/* Linearization rates and twisting numbers near the polar equilibria. */
typedef struct BykovConstants {
    double c1;
    double c2;
    double e1;
    double e2;
    double delta1;
    double delta2;
    double delta;
    double k;
    double komega;
} BykovConstants;

/* Lyapunov spectrum summary of one parameter point. */
typedef struct BykovSpectrum {
    double lambda[3]; /* tangent exponents, descending */
    double radial;    /* transverse exponent; near -2 on the sphere */
    int nonneg;       /* exponents within or above the zero band */
    int converged;    /* 1 when the running estimates settled */
} BykovSpectrum;

const char *bykov_last_error_message(void);

/* Validates (alpha, beta, omega, tau1, tau2, kappa) and allocates a handle
 * into *out. Free with bykov_params_free. */
int bykov_params_new(double alpha, double beta, double omega, double tau1,
                     double tau2, double kappa, BykovParams **out);
void bykov_params_free(BykovParams *p);

/* x and out point at 4 doubles. */
int bykov_eval_field_4d(const BykovParams *p, const double *x, double *out);
/* z and out point at 2 doubles (planar reduced system). */
int bykov_eval_field_2d(const BykovParams *p, const double *z, double *out);

int bykov_derived_constants(const BykovParams *p, BykovConstants *out);

/* Regime curves over the twisting number; komega must be positive. */
int bykov_h1_curve(double komega, double *out);
int bykov_h2_curve(double komega, double *out);

/* Integrates from x0 (4 doubles) to t_end with default tolerances and
 * writes the final state to out (4 doubles). project_to_sphere != 0
 * renormalizes every accepted step onto the unit sphere. */
int bykov_integrate_final(const BykovParams *p, const double *x0, double t_end,
                          int project_to_sphere, double *out);

/* Computes the spectrum from x0 (4 doubles) with default settings;
 * t_total <= 0 keeps the default run length. */
int bykov_lyapunov_spectrum(const BykovParams *p, const double *x0,
                            double t_total, BykovSpectrum *out);

#ifdef __cplusplus
}
#endif

#endif /* BYKOV_LAB_H */
