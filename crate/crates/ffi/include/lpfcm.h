#ifndef LPFCM_H
#define LPFCM_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LpfcmStatus {
  LPFCM_STATUS_OK = 0,
  LPFCM_STATUS_NULL_POINTER = 1,
  LPFCM_STATUS_INVALID_ARGUMENT = 2,
  LPFCM_STATUS_PARSE = 3,
  LPFCM_STATUS_IO = 4,
  LPFCM_STATUS_DOMAIN = 5,
  LPFCM_STATUS_NO_CROSSING = 6,
  LPFCM_STATUS_INFEASIBLE = 7,
  LPFCM_STATUS_NON_MONOTONE = 8,
  LPFCM_STATUS_UNSUPPORTED = 9,
  LPFCM_STATUS_PANIC = 10,
} LpfcmStatus;

typedef enum LpfcmPhaseMode {
  LPFCM_PHASE_MODE_LOCKED = 0,
  LPFCM_PHASE_MODE_FREERUN = 1,
} LpfcmPhaseMode;

typedef enum LpfcmClassification {
  LPFCM_CLASSIFICATION_UNSTABLE = 0,
  LPFCM_CLASSIFICATION_INCONCLUSIVE = 1,
  LPFCM_CLASSIFICATION_STABLE = 2,
} LpfcmClassification;

/**
 * Divergence reason of an unstable verdict; `None` otherwise.
 */
typedef enum LpfcmReason {
  LPFCM_REASON_NONE = 0,
  LPFCM_REASON_NO_CROSSING = 1,
  LPFCM_REASON_BOUND_EXIT = 2,
  LPFCM_REASON_OSCILLATION = 3,
} LpfcmReason;

/**
 * Opaque loop handle.
 */
typedef struct LpfcmLoop LpfcmLoop;

/**
 * Converter constants in SI units.
 */
typedef struct LpfcmConverter {
  double m1;
  double m2;
  double t_off;
  double t_on_min;
  double i_max;
  double i_c;
} LpfcmConverter;

typedef struct LpfcmReport {
  double thm1_lhs;
  bool thm1_pass;
  double thm2_lhs_a;
  double thm2_lhs_b;
  bool thm2_pass;
  double k0;
  double k1;
  double k2;
  double k3;
  double psi1_max;
  double psi2_min;
  double psi2_max;
  double b_xi;
  double gain_g;
  double gain_f;
  double small_gain_product;
} LpfcmReport;

typedef struct LpfcmOperatingPoint {
  double i_c;
  double i_p;
  double i_v;
  double t_on;
  double t_period;
} LpfcmOperatingPoint;

typedef struct LpfcmLinearModel {
  double c1;
  double c2;
  double b_pole;
  double k_gain;
  double lambda_cl;
} LpfcmLinearModel;

typedef struct LpfcmVerdict {
  enum LpfcmClassification classification;
  enum LpfcmReason reason;
  /**
   * `-1` unless the verdict is stable.
   */
  int64_t cycles_to_converge;
  double residual;
  bool multiple_crossings;
} LpfcmVerdict;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the calling thread's last error message into `buf` (NUL terminated,
 * truncated to `len`). Returns the full message length excluding the NUL.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t lpfcm_last_error_message(char *buf, size_t len);

/**
 * Creates a loop without interference.
 *
 * # Safety
 * `converter` and `out` must be valid pointers.
 */
enum LpfcmStatus lpfcm_loop_new(const struct LpfcmConverter *converter,
                                double tau,
                                struct LpfcmLoop **out);

/**
 * Creates a loop from a TOML configuration file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum LpfcmStatus lpfcm_loop_from_config(const char *path, struct LpfcmLoop **out);

/**
 * Releases a handle. Null is ignored.
 *
 * # Safety
 * `h` must come from this library and not be used afterwards.
 */
void lpfcm_loop_free(struct LpfcmLoop *h);

/**
 * Adds the tone `amp sin(omega t + phase)` to the interference.
 *
 * # Safety
 * `h` must be a valid handle.
 */
enum LpfcmStatus lpfcm_loop_add_interference(struct LpfcmLoop *h,
                                             double amp,
                                             double omega,
                                             double phase);

/**
 * # Safety
 * `h` must be a valid handle.
 */
enum LpfcmStatus lpfcm_loop_set_phase_mode(struct LpfcmLoop *h, enum LpfcmPhaseMode mode);

/**
 * Evaluates both criteria and the small-gain quantities.
 *
 * # Safety
 * `h` must be a valid handle and `out` a valid pointer.
 */
enum LpfcmStatus lpfcm_loop_check(const struct LpfcmLoop *h, struct LpfcmReport *out);

/**
 * Worst-case continuity check: whether the filtered sense stays increasing,
 * and its smallest slope.
 *
 * # Safety
 * `h` must be a valid handle; `monotone` and `min_slope` valid pointers.
 */
enum LpfcmStatus lpfcm_loop_continuity(const struct LpfcmLoop *h,
                                       bool *monotone,
                                       double *min_slope);

/**
 * Periodic steady state at the configured command.
 *
 * # Safety
 * `h` must be a valid handle and `out` a valid pointer.
 */
enum LpfcmStatus lpfcm_loop_equilibrium(const struct LpfcmLoop *h, struct LpfcmOperatingPoint *out);

/**
 * Small-signal model at the equilibrium.
 *
 * # Safety
 * `h` must be a valid handle and `out` a valid pointer.
 */
enum LpfcmStatus lpfcm_loop_linearize(const struct LpfcmLoop *h, struct LpfcmLinearModel *out);

/**
 * Simulates `n_cycles` from previous peak `ip0` (filter state at the
 * command), writing the peak current and on time of each cycle.
 * `peaks` and `t_on` may be null; otherwise they must hold `n_cycles` values.
 *
 * # Safety
 * `h` must be a valid handle; non-null buffers must hold `n_cycles` doubles.
 */
enum LpfcmStatus lpfcm_loop_simulate(const struct LpfcmLoop *h,
                                     double ip0,
                                     size_t n_cycles,
                                     double *peaks,
                                     double *t_on);

/**
 * Empirical stability verdict from `n_inits` initial peaks spread over
 * `[0.1 I_c, 1.5 I_c]`, or drawn uniformly when `use_seed` is set.
 *
 * # Safety
 * `h` must be a valid handle and `out` a valid pointer.
 */
enum LpfcmStatus lpfcm_loop_classify(const struct LpfcmLoop *h,
                                     size_t n_inits,
                                     size_t n_cycles,
                                     double eps,
                                     bool use_seed,
                                     uint64_t seed,
                                     struct LpfcmVerdict *out);

/**
 * Continuity criterion from normalized values. Pass `INFINITY` for
 * `omega_l_hat` when there is no interference.
 *
 * # Safety
 * `lhs` and `pass` must be valid pointers.
 */
enum LpfcmStatus lpfcm_theorem1(double tau_hat,
                                double a_ub_hat,
                                double i_max_hat,
                                double omega_l_hat,
                                double t_on_min_hat,
                                double *lhs,
                                bool *pass);

/**
 * Stability criterion from normalized values.
 *
 * # Safety
 * `lhs_a`, `lhs_b` and `pass` must be valid pointers.
 */
enum LpfcmStatus lpfcm_theorem2(double tau_hat,
                                double a_ub_hat,
                                double i_max_hat,
                                double omega_l_hat,
                                double t_on_min_hat,
                                double *lhs_a,
                                double *lhs_b,
                                bool *pass);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LPFCM_H */
