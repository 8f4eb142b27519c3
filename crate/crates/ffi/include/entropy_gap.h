#ifndef ENTROPY_GAP_H
#define ENTROPY_GAP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum EgapStatus {
  EGAP_STATUS_OK = 0,
  EGAP_STATUS_NULL_ARGUMENT = 1,
  EGAP_STATUS_IO = 2,
  EGAP_STATUS_FORMAT = 3,
  EGAP_STATUS_INVALID_ARGUMENT = 4,
  EGAP_STATUS_MISMATCH = 5,
  EGAP_STATUS_CORRUPT = 6,
  EGAP_STATUS_PANIC = 7,
} EgapStatus;

/**
 * An owned byte buffer.
 */
typedef struct EgapBuffer EgapBuffer;

/**
 * A latent tensor with optional side information.
 */
typedef struct EgapLatents EgapLatents;

/**
 * Learned factorized tables.
 */
typedef struct EgapTables EgapTables;

/**
 * Method settings for one entropy model. `method`: 0 none, 1 gmm,
 * 2 zero-mean Gaussian, 3 center-bin.
 */
typedef struct EgapMethodConfig {
  uint8_t method;
  uint8_t components;
  uint8_t bits;
  uint32_t targets;
} EgapMethodConfig;

typedef struct EgapEncodeOptions {
  struct EgapMethodConfig factorized;
  struct EgapMethodConfig hyperprior;
  uint32_t precision;
  /**
   * Hyperprior scale table: count, smallest and largest scale.
   */
  uint16_t scale_count;
  double scale_min;
  double scale_max;
} EgapEncodeOptions;

/**
 * Per-model and total percentages. Absent models report NaN.
 */
typedef struct EgapReport {
  double factorized_ratio;
  double factorized_gap;
  double factorized_gain;
  double hyperprior_ratio;
  double hyperprior_gap;
  double hyperprior_gain;
  double total_gap;
  double total_gain;
  double total_bits;
} EgapReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until
 * the next failing call.
 */
const char *egap_last_error(void);

/**
 * Defaults for factorized-only (`hyperprior == false`) or hyperprior
 * instances.
 */
struct EgapEncodeOptions egap_default_options(bool hyperprior);

/**
 * # Safety
 * `path` must be a nul-terminated string; `out` must be writable.
 */
enum EgapStatus egap_latents_load(const char *path, struct EgapLatents **out);

/**
 * # Safety
 * `data` must point to `len` readable bytes; `out` must be writable.
 */
enum EgapStatus egap_latents_from_bytes(const uint8_t *data,
                                        uintptr_t len,
                                        struct EgapLatents **out);

/**
 * Writes the tensor (and its side information, if any) as LATB.
 *
 * # Safety
 * `latents` must be a live handle and `path` a nul-terminated string.
 */
enum EgapStatus egap_latents_save(const struct EgapLatents *latents, const char *path);

/**
 * Number of symbols; 0 for a null handle.
 *
 * # Safety
 * `latents` must be null or a live handle.
 */
uintptr_t egap_latents_len(const struct EgapLatents *latents);

/**
 * Symbols in height, width, channel order; null for a null handle.
 *
 * # Safety
 * `latents` must be null or a live handle. The pointer lives as long as
 * the handle.
 */
const int32_t *egap_latents_symbols(const struct EgapLatents *latents);

/**
 * # Safety
 * `latents` must be a live handle; the output pointers must be writable.
 */
enum EgapStatus egap_latents_shape(const struct EgapLatents *latents,
                                   uint32_t *height,
                                   uint32_t *width,
                                   uint32_t *channels);

/**
 * # Safety
 * `latents` must be null or a live handle.
 */
bool egap_latents_has_side_info(const struct EgapLatents *latents);

/**
 * # Safety
 * `latents` must be null or a handle not freed before.
 */
void egap_latents_free(struct EgapLatents *latents);

/**
 * # Safety
 * `path` must be a nul-terminated string; `out` must be writable.
 */
enum EgapStatus egap_tables_load(const char *path, struct EgapTables **out);

/**
 * # Safety
 * `data` must point to `len` readable bytes; `out` must be writable.
 */
enum EgapStatus egap_tables_from_bytes(const uint8_t *data, uintptr_t len, struct EgapTables **out);

/**
 * # Safety
 * `tables` must be null or a live handle.
 */
uintptr_t egap_tables_count(const struct EgapTables *tables);

/**
 * # Safety
 * `tables` must be null or a handle not freed before.
 */
void egap_tables_free(struct EgapTables *tables);

/**
 * Encodes an instance into an EGAP container. `side` is null for
 * factorized-only instances; otherwise `main` must carry side
 * information. `options` may be null for the defaults.
 *
 * # Safety
 * Handles must be live or null where allowed; `out` must be writable.
 */
enum EgapStatus egap_encode(const struct EgapLatents *main,
                            const struct EgapLatents *side,
                            const struct EgapTables *tables,
                            const struct EgapEncodeOptions *options,
                            struct EgapBuffer **out);

/**
 * Ideal-bit gap and gain report without coding.
 *
 * # Safety
 * As for [`egap_encode`]; `out` must be writable.
 */
enum EgapStatus egap_report(const struct EgapLatents *main,
                            const struct EgapLatents *side,
                            const struct EgapTables *tables,
                            const struct EgapEncodeOptions *options,
                            struct EgapReport *out);

/**
 * Decodes a container. `side_info` supplies the side information of
 * hyperprior containers and may be null otherwise; `out_side` may be
 * null when the side latent is not wanted.
 *
 * # Safety
 * `data` must point to `len` readable bytes; handles must be live or
 * null where allowed; output pointers must be writable.
 */
enum EgapStatus egap_decode(const uint8_t *data,
                            uintptr_t len,
                            const struct EgapTables *tables,
                            const struct EgapLatents *side_info,
                            struct EgapLatents **out_main,
                            struct EgapLatents **out_side);

/**
 * # Safety
 * `buffer` must be null or a live handle.
 */
const uint8_t *egap_buffer_data(const struct EgapBuffer *buffer);

/**
 * # Safety
 * `buffer` must be null or a live handle.
 */
uintptr_t egap_buffer_len(const struct EgapBuffer *buffer);

/**
 * # Safety
 * `buffer` must be null or a handle not freed before.
 */
void egap_buffer_free(struct EgapBuffer *buffer);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ENTROPY_GAP_H */
