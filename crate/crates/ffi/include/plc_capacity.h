#ifndef PLC_CAPACITY_H
#define PLC_CAPACITY_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PlcStatus {
  PLC_STATUS_OK = 0,
  PLC_STATUS_NULL_POINTER = 1,
  PLC_STATUS_INVALID_ARGUMENT = 2,
  /**
   * Noise covariance or spectrum not positive definite, or nothing to
   * waterfill.
   */
  PLC_STATUS_DEGENERATE = 3,
  PLC_STATUS_IO = 4,
  PLC_STATUS_PANIC = 5,
} PlcStatus;

/**
 * Opaque channel handle.
 */
typedef struct PlcChannel PlcChannel;

typedef struct PlcChannelInfo {
  size_t channel_period;
  size_t noise_period;
  size_t lcm;
  size_t memory;
  size_t k_min;
  size_t block;
} PlcChannelInfo;

typedef struct PlcCapacity {
  double rate;
  double raw_rate;
  double waterlevel;
  /**
   * Block count K or grid size J.
   */
  size_t block;
  bool converged;
} PlcCapacity;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *plc_version(void);

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next call into the library on the same thread.
 */
const char *plc_last_error(void);

/**
 * Creates a channel from a `period x memory` tap table and a
 * `noise_period x noise_support` autocorrelation table.
 */
enum PlcStatus plc_channel_new(const double *taps,
                               size_t period,
                               size_t memory,
                               const double *noise,
                               size_t noise_period,
                               size_t noise_support,
                               struct PlcChannel **out);

/**
 * Like `plc_channel_new` with the taps read from a channel CSV file.
 */
enum PlcStatus plc_channel_load(const char *path,
                                const double *noise,
                                size_t noise_period,
                                size_t noise_support,
                                struct PlcChannel **out);

/**
 * Releases a handle; NULL is ignored.
 */
void plc_channel_free(struct PlcChannel *ch);

enum PlcStatus plc_channel_info(const struct PlcChannel *ch, struct PlcChannelInfo *out);

/**
 * Rate of the block of `k > K_min` joint periods.
 */
enum PlcStatus plc_capacity_thm1(const struct PlcChannel *ch,
                                 double rho,
                                 size_t k,
                                 struct PlcCapacity *out);

/**
 * Limit over doubling block sizes up to `k_max`.
 */
enum PlcStatus plc_capacity_thm1_converged(const struct PlcChannel *ch,
                                           double rho,
                                           double tol,
                                           size_t k_max,
                                           struct PlcCapacity *out);

/**
 * Spectral capacity on a uniform grid of `grid` frequencies.
 */
enum PlcStatus plc_capacity_thm2(const struct PlcChannel *ch,
                                 double rho,
                                 size_t grid,
                                 struct PlcCapacity *out);

/**
 * TF-OFDM baseline rate with `time_cells` cells and prefix `cyclic_prefix`.
 */
enum PlcStatus plc_tf_ofdm_rate(const struct PlcChannel *ch,
                                double rho,
                                size_t time_cells,
                                size_t cyclic_prefix,
                                double *rate);

/**
 * Waterfills `budget` over `n` eigenvalues; writes `n` powers and the level.
 */
enum PlcStatus plc_waterfill(const double *lambdas,
                             size_t n,
                             double budget,
                             double *powers,
                             double *waterlevel);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PLC_CAPACITY_H */
