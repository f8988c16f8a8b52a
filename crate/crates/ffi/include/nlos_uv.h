#ifndef NLOS_UV_H
#define NLOS_UV_H

/* Generated by cbindgen from crates/ffi/src. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum NlosCorrelationEnd {
  NLOS_CORRELATION_END_WINDOW_START = 0,
  NLOS_CORRELATION_END_WINDOW_END = 1,
} NlosCorrelationEnd;

typedef enum NlosEstimator {
  NLOS_ESTIMATOR_LOCAL_ESTIMATE = 0,
  NLOS_ESTIMATOR_ANALOG_APERTURE = 1,
} NlosEstimator;

// Result codes.
typedef enum NlosStatus {
  NLOS_STATUS_OK = 0,
  NLOS_STATUS_NULL_POINTER = 1,
  NLOS_STATUS_INVALID_PARAMETER = 2,
  NLOS_STATUS_DOMAIN = 3,
  NLOS_STATUS_BIN_WIDTH_MISMATCH = 4,
  NLOS_STATUS_NO_SIGNAL = 5,
  NLOS_STATUS_FRAME_TOO_SHORT = 6,
  NLOS_STATUS_TRACE_TOO_SHORT = 7,
  NLOS_STATUS_EMPTY = 8,
  // The localizer found no pulse. Not an error in the usual sense.
  NLOS_STATUS_NOT_FOUND = 9,
  NLOS_STATUS_BUFFER_TOO_SMALL = 10,
  NLOS_STATUS_PANIC = 11,
} NlosStatus;

// Opaque channel impulse response.
typedef struct NlosImpulseResponse NlosImpulseResponse;

// Opaque correlation template.
typedef struct NlosTemplate NlosTemplate;

// Opaque photoelectron trace.
typedef struct NlosTrace NlosTrace;

typedef struct NlosGeometry {
  // m
  double baseline_distance;
  // rad
  double tx_elevation;
  // rad
  double rx_elevation;
  // Half-angle, rad.
  double rx_fov;
  // m²
  double aperture_area;
  // Half-angle, rad.
  double tx_divergence;
} NlosGeometry;

typedef struct NlosAtmosphere {
  // 1/m
  double k_a;
  // 1/m
  double k_s_rayleigh;
  // 1/m
  double k_s_mie;
  double g;
  double f;
  double gamma;
  // m
  double wavelength;
} NlosAtmosphere;

typedef struct NlosTransport {
  uint64_t photons;
  // s
  double bin_width;
  uint32_t max_scatters;
  enum NlosEstimator estimator;
} NlosTransport;

typedef struct NlosSource {
  // J
  double pulse_energy;
  double quantum_efficiency;
  // m
  double wavelength;
  // 1/s
  double background_rate;
} NlosSource;

typedef struct NlosFrame {
  // s
  double frame_length;
  // s
  double pulse_offset;
  // s
  double chip_duration;
  double boundary_fraction;
} NlosFrame;

typedef struct NlosBroadening {
  // s
  double left_boundary;
  // s
  double right_boundary;
  // s
  double broadening;
} NlosBroadening;

typedef struct NlosWindow {
  // s
  double start;
  // s
  double end;
  // Nonzero when the end criterion never fired and `end` is the frame end.
  uint8_t end_clamped;
} NlosWindow;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failed call on this thread, or an empty
// string. Valid until the next failing call on the same thread.
const char *nlos_last_error_message(void);

// Library version as a NUL-terminated string with static lifetime.
const char *nlos_version(void);

struct NlosGeometry nlos_geometry_default(void);

struct NlosAtmosphere nlos_atmosphere_default(void);

struct NlosTransport nlos_transport_default(void);

struct NlosSource nlos_source_default(void);

struct NlosFrame nlos_frame_default(void);

// Combined Rayleigh + Mie phase function at scattering cosine `mu`, per sr.
//
// # Safety
// `atm` and `out_value` must be valid pointers or NULL.
enum NlosStatus nlos_combined_phase(double mu, const struct NlosAtmosphere *atm, double *out_value);

// Monte Carlo impulse response. The result depends only on the inputs and
// `seed`, not on the number of worker threads.
//
// # Safety
// All pointers must be valid or NULL.
enum NlosStatus nlos_simulate_impulse_response(const struct NlosGeometry *geometry,
                                               const struct NlosAtmosphere *atm,
                                               const struct NlosTransport *transport,
                                               uint64_t seed,
                                               struct NlosImpulseResponse **out_ir);

// Wrap caller-supplied arrival probabilities (per launched photon, bins
// starting at emission) as an impulse response.
//
// # Safety
// `bins` must point to `len` readable doubles; `out_ir` must be valid or NULL.
enum NlosStatus nlos_impulse_response_from_bins(const double *bins,
                                                size_t len,
                                                double bin_width,
                                                struct NlosImpulseResponse **out_ir);

// # Safety
// `ir` must come from this library and not have been freed, or be NULL.
void nlos_impulse_response_free(struct NlosImpulseResponse *ir);

// Number of bins; 0 for NULL.
//
// # Safety
// `ir` must be a live handle or NULL.
size_t nlos_impulse_response_len(const struct NlosImpulseResponse *ir);

// Bin width in seconds; NaN for NULL.
//
// # Safety
// `ir` must be a live handle or NULL.
double nlos_impulse_response_bin_width(const struct NlosImpulseResponse *ir);

// Total arrival probability per launched photon; NaN for NULL.
//
// # Safety
// `ir` must be a live handle or NULL.
double nlos_impulse_response_total(const struct NlosImpulseResponse *ir);

// Copy the bins into `buffer`, which must hold at least
// `nlos_impulse_response_len` values.
//
// # Safety
// `buffer` must point to `capacity` writable doubles.
enum NlosStatus nlos_impulse_response_copy_bins(const struct NlosImpulseResponse *ir,
                                                double *buffer,
                                                size_t capacity);

// Copy the per-bin squared standard errors.
//
// # Safety
// `buffer` must point to `capacity` writable doubles.
enum NlosStatus nlos_impulse_response_copy_variance(const struct NlosImpulseResponse *ir,
                                                    double *buffer,
                                                    size_t capacity);

// Boundaries of the response support at `threshold_fraction` of its peak.
//
// # Safety
// Pointers must be valid or NULL.
enum NlosStatus nlos_pulse_broadening(const struct NlosImpulseResponse *ir,
                                      double threshold_fraction,
                                      struct NlosBroadening *out_result);

// Analytic OOK bit error rate under the ML counting threshold. The
// threshold itself is written to `out_threshold` when that is not NULL.
//
// # Safety
// `out_ber` must be valid or NULL; `out_threshold` may be NULL.
enum NlosStatus nlos_ook_ber(double lambda_s,
                             double background_rate,
                             double window_length,
                             double *out_ber,
                             uint64_t *out_threshold);

// Pulse energy, J, giving `target_lambda_s` expected signal photoelectrons
// through `ir` with the other parameters of `source`.
//
// # Safety
// Pointers must be valid or NULL.
enum NlosStatus nlos_calibrate_pulse_energy(const struct NlosImpulseResponse *ir,
                                            const struct NlosSource *source,
                                            double target_lambda_s,
                                            double *out_energy);

// Draw one chip-binned photoelectron trace.
//
// # Safety
// Pointers must be valid or NULL.
enum NlosStatus nlos_generate_trace(const struct NlosImpulseResponse *ir,
                                    const struct NlosSource *source,
                                    const struct NlosFrame *frame,
                                    uint64_t seed,
                                    struct NlosTrace **out_trace);

// Wrap measured per-chip counts as a trace with no known truth window.
//
// # Safety
// `counts` must point to `len` readable values; `out_trace` valid or NULL.
enum NlosStatus nlos_trace_from_counts(const uint32_t *counts,
                                       size_t len,
                                       double chip_duration,
                                       struct NlosTrace **out_trace);

// # Safety
// `trace` must come from this library and not have been freed, or be NULL.
void nlos_trace_free(struct NlosTrace *trace);

// Number of chips; 0 for NULL.
//
// # Safety
// `trace` must be a live handle or NULL.
size_t nlos_trace_len(const struct NlosTrace *trace);

// # Safety
// `buffer` must point to `capacity` writable values.
enum NlosStatus nlos_trace_copy_counts(const struct NlosTrace *trace,
                                       uint32_t *buffer,
                                       size_t capacity);

// True pulse window of a synthesized trace. Returns `NLOS_STATUS_NO_SIGNAL`
// when the trace carries no pulse or was built from raw counts.
//
// # Safety
// Pointers must be valid or NULL.
enum NlosStatus nlos_trace_truth(const struct NlosTrace *trace, double *out_start, double *out_end);

// Correlation template from the mean of `count` impulse responses.
//
// # Safety
// `responses` must point to `count` live handles.
enum NlosStatus nlos_build_template(const struct NlosImpulseResponse *const *responses,
                                    size_t count,
                                    double chip_duration,
                                    double boundary_fraction,
                                    struct NlosTemplate **out_template);

// Template from explicit chip values; normalized to unit sum.
//
// # Safety
// `values` must point to `len` readable doubles.
enum NlosStatus nlos_template_from_values(const double *values,
                                          size_t len,
                                          double chip_duration,
                                          struct NlosTemplate **out_template);

// # Safety
// `template` must come from this library and not have been freed, or be NULL.
void nlos_template_free(struct NlosTemplate *template_);

// Number of template chips; 0 for NULL.
//
// # Safety
// `template` must be a live handle or NULL.
size_t nlos_template_len(const struct NlosTemplate *template_);

// # Safety
// `buffer` must point to `capacity` writable doubles.
enum NlosStatus nlos_template_copy_values(const struct NlosTemplate *template_,
                                          double *buffer,
                                          size_t capacity);

// Smallest window count threshold whose background-only exceedance
// probability is at most `false_alarm_probability`.
//
// # Safety
// `out_threshold` must be valid or NULL.
enum NlosStatus nlos_neyman_pearson_threshold(double background_rate,
                                              double window_duration,
                                              double false_alarm_probability,
                                              uint64_t *out_threshold);

// Default correlation threshold for `template` under `background_rate`.
//
// # Safety
// Pointers must be valid or NULL.
enum NlosStatus nlos_default_correlation_threshold(const struct NlosTemplate *template_,
                                                   double background_rate,
                                                   double *out_threshold);

// Sliding-window counting localizer. Returns `NLOS_STATUS_NOT_FOUND` when
// no window exceeds `threshold`.
//
// # Safety
// Pointers must be valid or NULL.
enum NlosStatus nlos_localize_counting(const struct NlosTrace *trace,
                                       size_t window_chips,
                                       uint64_t threshold,
                                       struct NlosWindow *out_window);

// Template-matching localizer. Returns `NLOS_STATUS_NOT_FOUND` when the
// correlation never exceeds `threshold`.
//
// # Safety
// Pointers must be valid or NULL.
enum NlosStatus nlos_localize_correlation(const struct NlosTrace *trace,
                                          const struct NlosTemplate *template_,
                                          double threshold,
                                          enum NlosCorrelationEnd end_rule,
                                          struct NlosWindow *out_window);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NLOS_UV_H */
