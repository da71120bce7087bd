#ifndef CHIRALPOINT_H
#define CHIRALPOINT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

#define CP_OK 0

#define CP_ERR_IO 1

// Invalid configuration, parameters or input data.
#define CP_ERR_INPUT 2

// The model could not produce a result (singular, defective, non-convergent…).
#define CP_ERR_NUMERICAL 3

// Null pointer, bad UTF-8 or an out-of-range enum argument.
#define CP_ERR_ARGUMENT 4

#define CP_ERR_BUFFER_TOO_SMALL 5

#define CP_ERR_PANIC 6

#define CP_METHOD_SPECTRAL_FT 0

#define CP_METHOD_DIRECT_ODE 1

#define CP_DRIVE_EMITTER 0

#define CP_DRIVE_PLASMON 1

#define CP_ROUTE_EIGEN 0

#define CP_ROUTE_DIRECT 1

#define CP_MECHANISM_SUPERSCATTERING 0

#define CP_MECHANISM_EIT_INTERMEDIATE 1

#define CP_MECHANISM_OTHER 2

#define CP_QUANTITY_PURCELL 0

#define CP_QUANTITY_DENSITY 1

#define CP_FREE_G1 1

#define CP_FREE_GC 2

#define CP_FREE_PHI 4

// Opaque parameter set.
typedef struct CpParams CpParams;

typedef struct CpEnhancement {
  double fp_ratio;
  double width_ratio;
  double omega_peak;
  double fwhm;
} CpEnhancement;

typedef struct CpYieldOptions {
  // Nonzero counts γ_nr as absorption.
  int include_gamma_nr;
  // 1 on, 0 off, −1 when κ_i > 0.
  int include_kappa_i;
  int target;
} CpYieldOptions;

typedef struct CpYield {
  double eta;
  double eta0;
  double eta_r;
  double eta_d;
  double delta_at_max;
  double phi_r_gain_at_max;
} CpYield;

typedef struct CpScatterSummary {
  double sigma0;
  double sigma_sup;
  double sigma_so;
  int mechanism;
  double condition;
} CpScatterSummary;

typedef struct CpFit {
  double g1;
  double gc;
  double phi;
  // Standard errors; NaN for parameters held fixed.
  double g1_err;
  double gc_err;
  double phi_err;
  double condition;
  double normalized_residual;
} CpFit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version, a static NUL-terminated string.
const char *cp_version(void);

// Copies the last error message of this thread into `buf` (truncated to
// `cap` − 1 bytes) and returns its full length; 0 when the last call succeeded.
size_t cp_last_error_message(char *buf, size_t cap);

// Short identifier of the last error of this thread, e.g. "defective_matrix";
// NULL when the last call succeeded. Valid until the next call on this thread.
const char *cp_last_error_code(void);

// Parses a JSON config (same schema as the CLI; a "preset" key is honoured).
int cp_params_from_json(const char *json, struct CpParams **out);

int cp_params_from_preset(const char *name, struct CpParams **out);

int cp_params_clone(const struct CpParams *p, struct CpParams **out);

// Copy of `p` with the mirror removed.
int cp_params_baseline(const struct CpParams *p, struct CpParams **out);

// Releases a handle; NULL is ignored.
void cp_params_free(struct CpParams *p);

// Sets a dotted parameter path such as "couplings.g1" or "photon.q_c". The
// handle is unchanged when the result would be invalid.
int cp_params_set(struct CpParams *p, const char *path, double value);

int cp_params_get(const struct CpParams *p, const char *path, double *out);

// Writes the resolved parameters as JSON. Needs `*needed` + 1 bytes; returns
// CP_ERR_BUFFER_TOO_SMALL (with `*needed` set) when `cap` is short.
int cp_params_to_json(const struct CpParams *p, char *buf, size_t cap, size_t *needed);

// J(ω) in eV on `n` frequencies (eV, strictly increasing).
int cp_spectral_density(const struct CpParams *p, const double *omega, size_t n, double *out);

// Purcell factor J(ω)/J₀(ω); needs the emitter dipole moment.
int cp_purcell(const struct CpParams *p, const double *omega, size_t n, double *out);

// F_p/F_p⁰ and Γ/Γ⁰ of the cavity peak against the mirror-free cavity.
int cp_enhancement(const struct CpParams *p, struct CpEnhancement *out);

// g₁ᵒᵖᵗ = −√(3 Δ_ac κ_c)/2 in eV.
int cp_optimal_g1(double delta_ac, double kappa_c, double *out);

// Emission spectrum S(ω) (eV⁻¹), Γ(ω) and Δ(ω) (eV). Any output may be NULL.
int cp_emission(const struct CpParams *p,
                const double *omega,
                size_t n,
                double *spectrum,
                double *gamma,
                double *shift);

// Emitter population on a uniform time grid starting at 0 (fs).
int cp_dynamics(const struct CpParams *p, const double *t_fs, size_t n, int method, double *out);

// Maximum quantum yield with and without the mirror. `opts` may be NULL for
// the defaults (γ_nr counted, κ_i counted when nonzero, emitter drive).
int cp_yield(const struct CpParams *p, const struct CpYieldOptions *opts, struct CpYield *out);

// η, Φ_r and Φ_d (unit drive) at detunings Δ_L = ω_c − ω_L. Any output may be NULL.
int cp_yield_spectrum(const struct CpParams *p,
                      const struct CpYieldOptions *opts,
                      const double *detuning,
                      size_t n,
                      double *eta,
                      double *phi_r,
                      double *phi_d);

// Scattering σ(Δ) under plasmon drive, by eigenmode expansion or direct solve.
int cp_scatter(const struct CpParams *p, const double *delta, size_t n, int route, double *out);

// σ(0) split into the superradiant self term and the rest, with the mechanism label.
int cp_scatter_decompose(const struct CpParams *p, struct CpScatterSummary *out);

// Least-squares fit of the parameters selected by `free` (CP_FREE_* bits) to
// `n` samples; the handle supplies everything else. Weights may be NULL (relative residuals).
int cp_fit(const struct CpParams *p,
           const double *omega,
           const double *data,
           const double *weights,
           size_t n,
           uint32_t free,
           int quantity,
           struct CpFit *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHIRALPOINT_H */
