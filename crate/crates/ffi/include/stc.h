#ifndef STC_H
#define STC_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum StcStatus {
  STC_STATUS_OK = 0,
  STC_STATUS_NULL_POINTER = 1,
  STC_STATUS_INVALID_ARGUMENT = 2,
  STC_STATUS_FORMAT = 3,
  STC_STATUS_IO = 4,
  STC_STATUS_CONFIG = 5,
  STC_STATUS_DATA = 6,
  STC_STATUS_TRAINING = 7,
  STC_STATUS_UNSUPPORTED = 8,
  STC_STATUS_UTF8 = 9,
  STC_STATUS_PANIC = 10,
} StcStatus;

/**
 * Technique codes accepted wherever a `technique` argument appears.
 */
typedef enum StcTechnique {
  STC_TECHNIQUE_CHEST = 0,
  STC_TECHNIQUE_FALSETTO = 1,
  STC_TECHNIQUE_WHISTLE = 2,
  STC_TECHNIQUE_RASPY = 3,
} StcTechnique;

/**
 * Mono audio clip.
 */
typedef struct StcAudio StcAudio;

/**
 * A loaded conversion model.
 */
typedef struct StcConverter StcConverter;

/**
 * Vocoder parameters on the 5 ms frame grid.
 */
typedef struct StcFrames StcFrames;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length without the NUL, or
 * 0 when there is no error.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t stc_last_error(char *buf, size_t len);

/**
 * Static NUL-terminated version string.
 */
const char *stc_version(void);

/**
 * Parses a technique name such as `"whistle"` into its code.
 *
 * # Safety
 * `name` must be a NUL-terminated string; `code` must be writable.
 */
enum StcStatus stc_technique_parse(const char *name, uint32_t *code);

/**
 * Copies `len` samples into a new clip.
 *
 * # Safety
 * `samples` must point to `len` readable floats; `clip` must be writable.
 */
enum StcStatus stc_audio_new(const double *samples,
                             size_t len,
                             uint32_t sample_rate,
                             struct StcAudio **clip);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `clip` must be writable.
 */
enum StcStatus stc_audio_read_wav(const char *file, struct StcAudio **clip);

/**
 * # Safety
 * `clip` must be a live handle; `path` a NUL-terminated string.
 */
enum StcStatus stc_audio_write_wav(const struct StcAudio *clip, const char *file);

/**
 * Number of samples; 0 for a null handle.
 *
 * # Safety
 * `clip` must be null or a live handle.
 */
size_t stc_audio_len(const struct StcAudio *clip);

/**
 * Sample rate in Hz; 0 for a null handle.
 *
 * # Safety
 * `clip` must be null or a live handle.
 */
uint32_t stc_audio_sample_rate(const struct StcAudio *clip);

/**
 * Borrowed pointer to the samples, valid until the clip is freed.
 *
 * # Safety
 * `clip` must be null or a live handle.
 */
const double *stc_audio_samples(const struct StcAudio *clip);

/**
 * # Safety
 * `clip` must be null or a handle not yet freed.
 */
void stc_audio_free(struct StcAudio *clip);

/**
 * Vocoder analysis; the clip is resampled to the analysis rate first.
 *
 * # Safety
 * `clip` must be a live handle; `frames` must be writable.
 */
enum StcStatus stc_analyze(const struct StcAudio *clip, struct StcFrames **frames);

/**
 * # Safety
 * `frames` must be a live handle; `clip` must be writable.
 */
enum StcStatus stc_synthesize(const struct StcFrames *frames, struct StcAudio **clip);

/**
 * New frames with every voiced F0 multiplied by `2^(semitones / 12)`.
 *
 * # Safety
 * `frames` must be a live handle; `shifted` must be writable.
 */
enum StcStatus stc_frames_pitch_shift(const struct StcFrames *frames,
                                      double semitones,
                                      struct StcFrames **shifted);

/**
 * Frame count; 0 for a null handle.
 *
 * # Safety
 * `frames` must be null or a live handle.
 */
size_t stc_frames_len(const struct StcFrames *frames);

/**
 * Borrowed F0 track in Hz (0 = unvoiced), `stc_frames_len` values.
 *
 * # Safety
 * `frames` must be null or a live handle.
 */
const double *stc_frames_f0(const struct StcFrames *frames);

/**
 * Writes an STCF file including the 60-dimensional network features.
 *
 * # Safety
 * `frames` must be a live handle; `path` a NUL-terminated string.
 */
enum StcStatus stc_frames_write(const struct StcFrames *frames, const char *file);

/**
 * # Safety
 * `path` must be a NUL-terminated string; `frames` must be writable.
 */
enum StcStatus stc_frames_read(const char *file, struct StcFrames **frames);

/**
 * # Safety
 * `frames` must be null or a handle not yet freed.
 */
void stc_frames_free(struct StcFrames *frames);

/**
 * Loads a trained checkpoint.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `converter` must be writable.
 */
enum StcStatus stc_converter_load(const char *file, struct StcConverter **converter);

/**
 * Converts `clip` toward `technique` (an [`StcTechnique`] code) and shifts
 * F0 by `semitones`.
 *
 * # Safety
 * `converter` and `clip` must be live handles; `result` must be writable.
 */
enum StcStatus stc_converter_convert(const struct StcConverter *converter,
                                     const struct StcAudio *clip,
                                     uint32_t technique_code,
                                     double semitones,
                                     struct StcAudio **result);

/**
 * # Safety
 * `converter` must be null or a handle not yet freed.
 */
void stc_converter_free(struct StcConverter *converter);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STC_H */
