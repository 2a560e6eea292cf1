/* C interface for the multiscale sparse unmixing library. */

#pragma once

/* Generated with cbindgen:0.29.4 */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status code returned by every fallible entry point.
typedef enum HmuaStatus {
  HMUA_STATUS_OK = 0,
  HMUA_STATUS_NULL_POINTER = 1,
  HMUA_STATUS_INVALID_UTF8 = 2,
  HMUA_STATUS_INVALID_ARGUMENT = 3,
  HMUA_STATUS_IO_ERROR = 4,
  HMUA_STATUS_PARSE_ERROR = 5,
  HMUA_STATUS_DIMENSION_MISMATCH = 6,
  HMUA_STATUS_NUMERIC_ERROR = 7,
  HMUA_STATUS_PANIC = 8,
} HmuaStatus;

// Cube handle. Create with [`hmua_cube_read`], release with
// [`hmua_cube_free`].
typedef struct HmuaCube HmuaCube;

// Library handle. Create with [`hmua_library_read_csv`], release with
// [`hmua_library_free`].
typedef struct HmuaLibrary HmuaLibrary;

// Result handle produced by [`hmua_unmix_run`].
typedef struct HmuaResult HmuaResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *hmua_version(void);

// Copy the last error message of this thread into `buf` (truncating to
// `cap - 1` bytes, always NUL-terminated). Returns the full message length.
size_t hmua_last_error_message(char *buf, size_t cap);

// Load a cube from a JSON header and a raw band-sequential data file.
//
// # Safety
// `header_path` and `data_path` must be NUL-terminated strings; `out` must
// be a valid pointer. On success `*out` owns the cube.
enum HmuaStatus hmua_cube_read(const char *header_path,
                               const char *data_path,
                               struct HmuaCube **out);

// Spatial and spectral dimensions of a cube.
//
// # Safety
// All pointers must be valid.
enum HmuaStatus hmua_cube_dims(const struct HmuaCube *cube,
                               size_t *rows,
                               size_t *cols,
                               size_t *bands);

// Release a cube handle. Accepts NULL.
//
// # Safety
// `cube` must come from [`hmua_cube_read`] and not be freed twice.
void hmua_cube_free(struct HmuaCube *cube);

// Load a spectral library from CSV (name row, then one row per band).
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be valid.
enum HmuaStatus hmua_library_read_csv(const char *path, struct HmuaLibrary **out);

// Band and signature counts of a library.
//
// # Safety
// All pointers must be valid.
enum HmuaStatus hmua_library_dims(const struct HmuaLibrary *lib, size_t *bands, size_t *count);

// Release a library handle. Accepts NULL.
//
// # Safety
// `lib` must come from [`hmua_library_read_csv`] and not be freed twice.
void hmua_library_free(struct HmuaLibrary *lib);

// Run the unmixing pipeline described by a JSON config (the same schema the
// CLI consumes) and hand back a result handle.
//
// # Safety
// `cube` and `lib` must be live handles; `config_json` must be a
// NUL-terminated string; `out` must be valid.
enum HmuaStatus hmua_unmix_run(const struct HmuaCube *cube,
                               const struct HmuaLibrary *lib,
                               const char *config_json,
                               struct HmuaResult **out);

// Shape of the estimated abundance matrix.
//
// # Safety
// All pointers must be valid.
enum HmuaStatus hmua_result_abundance_dims(const struct HmuaResult *result,
                                           size_t *endmembers,
                                           size_t *pixels);

// Copy the abundance matrix into `buf` in row-major order. `len` must be
// exactly `endmembers * pixels`.
//
// # Safety
// `buf` must point to at least `len` doubles.
enum HmuaStatus hmua_result_abundance_copy(const struct HmuaResult *result,
                                           double *buf,
                                           size_t len);

// Run diagnostics as a JSON string owned by the result handle. Valid until
// [`hmua_result_free`].
//
// # Safety
// `result` must be a live handle.
const char *hmua_result_diagnostics_json(const struct HmuaResult *result);

// Number of superpixels in the final segmentation.
//
// # Safety
// All pointers must be valid.
enum HmuaStatus hmua_result_superpixel_count(const struct HmuaResult *result, size_t *count);

// Release a result handle. Accepts NULL.
//
// # Safety
// `result` must come from [`hmua_unmix_run`] and not be freed twice.
void hmua_result_free(struct HmuaResult *result);

// Signal-to-reconstruction error in dB between two row-major
// `endmembers x pixels` abundance buffers. Writes +inf for an exact match.
//
// # Safety
// `truth` and `estimate` must point to `endmembers * pixels` doubles each.
enum HmuaStatus hmua_sre(size_t endmembers,
                         size_t pixels,
                         const double *truth,
                         const double *estimate,
                         double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus
