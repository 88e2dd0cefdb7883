#ifndef TRLINK_H
#define TRLINK_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum TrlinkStatus {
  TRLINK_STATUS_OK = 0,
  TRLINK_STATUS_NULL_POINTER = 1,
  TRLINK_STATUS_INVALID_ARGUMENT = 2,
  TRLINK_STATUS_PARSE = 3,
  TRLINK_STATUS_NUMERICAL = 4,
  TRLINK_STATUS_BUFFER_TOO_SMALL = 5,
  TRLINK_STATUS_EMPTY_CHANNEL = 6,
  TRLINK_STATUS_ZERO_ENERGY = 7,
  TRLINK_STATUS_INTERNAL = 8,
} TrlinkStatus;

// Multipath channel: a list of taps with amplitude, phase and delay.
typedef struct TrlinkCir TrlinkCir;

// Time-reversal precoding filter.
typedef struct TrlinkFilter TrlinkFilter;

// Uniformly sampled complex baseband waveform.
typedef struct TrlinkWaveform TrlinkWaveform;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread; empty after a
// success. Valid until the next call on the same thread.
const char *trlink_last_error(void);

// Library version, e.g. `"0.1.0"`. Static storage.
const char *trlink_version(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void trlink_string_free(char *s);

// Builds a CIR from `n` taps. Delays are in seconds, phases in radians,
// amplitudes non-negative.
//
// # Safety
// The three arrays must hold `n` elements; `out` must be writable.
enum TrlinkStatus trlink_cir_new(const double *amplitudes,
                                 const double *phases,
                                 const double *delays,
                                 size_t n,
                                 struct TrlinkCir **out);

// Draws a reverberant CIR, normalized to unit energy. Rates in taps per
// second, times in seconds.
//
// # Safety
// `out` must be writable.
enum TrlinkStatus trlink_cir_synth(double tap_arrival_rate,
                                   double decay_time_constant,
                                   double span,
                                   double los_gain,
                                   double first_arrival_delay,
                                   uint64_t seed,
                                   struct TrlinkCir **out);

// Parses the `cir v1` text format.
//
// # Safety
// `text` must be a NUL-terminated string; `out` must be writable.
enum TrlinkStatus trlink_cir_import(const char *text, struct TrlinkCir **out);

// Serializes to the `cir v1` text format. Free the result with
// `trlink_string_free`.
//
// # Safety
// `cir` must be a live handle; `out` must be writable.
enum TrlinkStatus trlink_cir_export(const struct TrlinkCir *cir, char **out);

// Number of taps; 0 for a null handle.
//
// # Safety
// `cir` must be null or a live handle.
size_t trlink_cir_len(const struct TrlinkCir *cir);

// Copies tap `index` out.
//
// # Safety
// `cir` must be a live handle; the out-pointers must be writable.
enum TrlinkStatus trlink_cir_tap(const struct TrlinkCir *cir,
                                 size_t index,
                                 double *amplitude,
                                 double *phase,
                                 double *delay);

// Total tap energy `sum A^2`.
//
// # Safety
// `cir` must be a live handle; `out` must be writable.
enum TrlinkStatus trlink_cir_energy(const struct TrlinkCir *cir, double *out);

// Power-weighted RMS delay spread in seconds.
//
// # Safety
// `cir` must be a live handle; `out` must be writable.
enum TrlinkStatus trlink_cir_rms_delay_spread(const struct TrlinkCir *cir, double *out);

// Places the taps on a grid of spacing `dt` covering `[0, max delay + pad]`.
// `merged_taps` (may be null) receives the number of taps that shared a bin.
//
// # Safety
// `cir` must be a live handle; `out` must be writable.
enum TrlinkStatus trlink_cir_to_sampled(const struct TrlinkCir *cir,
                                        double dt,
                                        double pad,
                                        struct TrlinkWaveform **out,
                                        size_t *merged_taps);

// # Safety
// `cir` must be null or a live handle, freed at most once.
void trlink_cir_free(struct TrlinkCir *cir);

// Builds a waveform from `n` complex samples split into real and
// imaginary arrays. `imag` may be null for a real waveform.
//
// # Safety
// `real` (and `imag` if non-null) must hold `n` elements; `out` must be writable.
enum TrlinkStatus trlink_waveform_new(const double *real,
                                      const double *imag,
                                      size_t n,
                                      double dt,
                                      double t0,
                                      struct TrlinkWaveform **out);

// Sample count; 0 for a null handle.
//
// # Safety
// `w` must be null or a live handle.
size_t trlink_waveform_len(const struct TrlinkWaveform *w);

// Grid spacing and start time in seconds.
//
// # Safety
// `w` must be a live handle; the out-pointers must be writable.
enum TrlinkStatus trlink_waveform_grid(const struct TrlinkWaveform *w, double *dt, double *t0);

// `sum |x|^2 * dt`.
//
// # Safety
// `w` must be a live handle; `out` must be writable.
enum TrlinkStatus trlink_waveform_energy(const struct TrlinkWaveform *w, double *out);

// Copies the samples into caller buffers of capacity `cap`. Returns
// `BufferTooSmall` when `cap` is below `trlink_waveform_len`. `imag` may
// be null to skip the imaginary parts.
//
// # Safety
// `real` (and `imag` if non-null) must be writable for `cap` elements.
enum TrlinkStatus trlink_waveform_copy(const struct TrlinkWaveform *w,
                                       double *real,
                                       double *imag,
                                       size_t cap);

// Linear convolution `dt * sum a[i] b[k-i]` on the shared grid; the result
// starts at `t0_a + t0_b`.
//
// # Safety
// `a` and `b` must be live handles; `out` must be writable.
enum TrlinkStatus trlink_convolve(const struct TrlinkWaveform *a,
                                  const struct TrlinkWaveform *b,
                                  struct TrlinkWaveform **out);

// # Safety
// `w` must be null or a live handle, freed at most once.
void trlink_waveform_free(struct TrlinkWaveform *w);

// Ideal TR filter of a sampled CIR: conjugated, time-reversed, unit energy.
//
// # Safety
// `cir_sampled` must be a live handle; `out` must be writable.
enum TrlinkStatus trlink_filter_ideal(const struct TrlinkWaveform *cir_sampled,
                                      struct TrlinkFilter **out);

// Builds a filter from recipe text such as `"tr+zoh@100GHz+quant@6"`.
// The non-precoded recipe `"none"` is rejected.
//
// # Safety
// `cir_sampled` must be a live handle; `recipe` NUL-terminated; `out` writable.
enum TrlinkStatus trlink_filter_from_recipe(const struct TrlinkWaveform *cir_sampled,
                                            const char *recipe,
                                            struct TrlinkFilter **out);

// Zero-order hold at `sampling_rate` Hz, renormalized to unit energy.
//
// # Safety
// `f` must be a live handle; `out` must be writable.
enum TrlinkStatus trlink_filter_zoh(const struct TrlinkFilter *f,
                                    double sampling_rate,
                                    struct TrlinkFilter **out);

// Shifts a held filter by `offset_fraction` of its hold period.
//
// # Safety
// `f` must be a live handle; `out` must be writable.
enum TrlinkStatus trlink_filter_jitter(const struct TrlinkFilter *f,
                                       double offset_fraction,
                                       struct TrlinkFilter **out);

// Uniform `bits`-bit quantization of the real and imaginary parts.
//
// # Safety
// `f` must be a live handle; `out` must be writable.
enum TrlinkStatus trlink_filter_quantize(const struct TrlinkFilter *f,
                                         uint32_t bits,
                                         struct TrlinkFilter **out);

// Time of the focused peak of `cir * filter`, seconds.
//
// # Safety
// `f` must be a live handle; `out` must be writable.
enum TrlinkStatus trlink_filter_causal_delay(const struct TrlinkFilter *f, double *out);

// Copy of the filter taps as a new waveform handle.
//
// # Safety
// `f` must be a live handle; `out` must be writable.
enum TrlinkStatus trlink_filter_waveform(const struct TrlinkFilter *f, struct TrlinkWaveform **out);

// # Safety
// `f` must be null or a live handle, freed at most once.
void trlink_filter_free(struct TrlinkFilter *f);

// Bit error rate of OOK with an energy detector: `mean_energy_one` is the
// signal energy collected for a 1, `noise_energy` the mean noise energy in
// the window and `window_samples` the number of complex noise samples in
// it.
//
// # Safety
// `out` must be writable.
enum TrlinkStatus trlink_ber_theoretical_ook(double mean_energy_one,
                                             double noise_energy,
                                             double window_samples,
                                             double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TRLINK_H */
