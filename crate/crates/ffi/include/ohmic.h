/* C interface to the ohmic driven-lattice-fermion experiment runner. */

#ifndef OHMIC_H
#define OHMIC_H

/* Generated by cbindgen from crates/ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes returned by every fallible entry point.
typedef enum OhmicStatus {
  OHMIC_STATUS_OK = 0,
  OHMIC_STATUS_NULL_ARGUMENT = 1,
  OHMIC_STATUS_CONFIG_ERROR = 2,
  OHMIC_STATUS_NUMERICAL_ERROR = 3,
  OHMIC_STATUS_IO_ERROR = 4,
  OHMIC_STATUS_UTF8_ERROR = 5,
  OHMIC_STATUS_NOT_FOUND = 6,
} OhmicStatus;

// Opaque parsed configuration.
typedef struct OhmicConfig OhmicConfig;

// Opaque run record with aggregates and output writers.
typedef struct OhmicRunRecord OhmicRunRecord;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Version string of the underlying library; static, do not free.
const char *ohmic_version(void);

// Parses a flat key-value configuration. Returns a handle through
// `config_out` on success; on failure writes a message listing every
// problem.
//
// # Safety
// `text` must be a valid NUL-terminated string; `config_out` must be a
// valid pointer; `message_out` may be null.
enum OhmicStatus ohmic_config_parse(const char *text,
                                    struct OhmicConfig **config_out,
                                    char **message_out);

// Reads a configuration file and parses it.
//
// # Safety
// `path` must be a valid NUL-terminated string; `config_out` must be a
// valid pointer; `message_out` may be null.
enum OhmicStatus ohmic_config_load(const char *path,
                                   struct OhmicConfig **config_out,
                                   char **message_out);

// Hash of the canonicalized config, hex, caller-freed.
//
// # Safety
// `config` must be a live handle from `ohmic_config_parse`/`_load`.
char *ohmic_config_hash(const struct OhmicConfig *config);

// Replaces the config's base seed, mirroring the CLI --seed-override.
//
// # Safety
// `config` must be a live handle.
void ohmic_config_set_seed(struct OhmicConfig *config, uint64_t seed);

// Runs the configured experiment; `workers = 0` keeps the default pool.
//
// # Safety
// `config` must be a live handle; `record_out` must be a valid pointer;
// `message_out` may be null.
enum OhmicStatus ohmic_run(const struct OhmicConfig *config,
                           uintptr_t workers,
                           struct OhmicRunRecord **record_out,
                           char **message_out);

// Number of named aggregate scalars on the record.
//
// # Safety
// `record` must be a live handle from `ohmic_run`.
uintptr_t ohmic_record_aggregate_count(const struct OhmicRunRecord *record);

// Name of aggregate `index`, caller-freed; null when out of range.
//
// # Safety
// `record` must be a live handle.
char *ohmic_record_aggregate_name(const struct OhmicRunRecord *record, uintptr_t index);

// Looks up an aggregate scalar by name; writes mean and standard error.
//
// # Safety
// `record` and `name` must be valid; out pointers may be null when the
// caller does not need that component.
enum OhmicStatus ohmic_record_scalar(const struct OhmicRunRecord *record,
                                     const char *name,
                                     double *mean_out,
                                     double *stderr_out);

// Config hash the record was produced from, hex, caller-freed.
//
// # Safety
// `record` must be a live handle.
char *ohmic_record_hash(const struct OhmicRunRecord *record);

// Writes summary, histograms and series files into `dir`.
//
// # Safety
// `record` must be a live handle, `dir` a valid NUL-terminated path;
// `message_out` may be null.
enum OhmicStatus ohmic_record_export(const struct OhmicRunRecord *record,
                                     const char *dir,
                                     char **message_out);

// Releases a config handle.
//
// # Safety
// `config` must be a handle from this library, not yet freed; null is a
// no-op.
void ohmic_config_free(struct OhmicConfig *config);

// Releases a run record.
//
// # Safety
// `record` must be a handle from this library, not yet freed; null is a
// no-op.
void ohmic_record_free(struct OhmicRunRecord *record);

// Releases any string returned by this library.
//
// # Safety
// `s` must originate from this library and not have been freed; null is
// a no-op.
void ohmic_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OHMIC_H */
