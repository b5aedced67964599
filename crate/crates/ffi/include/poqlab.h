#ifndef POQLAB_H
#define POQLAB_H

#pragma once

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum PoqStatus {
  POQ_STATUS_OK = 0,
  POQ_STATUS_NULL_POINTER = 1,
  POQ_STATUS_INVALID_UTF8 = 2,
  POQ_STATUS_UNKNOWN_EXPERIMENT = 3,
  POQ_STATUS_CONFIG = 4,
  POQ_STATUS_CAP_VIOLATION = 5,
  POQ_STATUS_IO = 6,
  POQ_STATUS_FAILED = 7,
  POQ_STATUS_PANIC = 8,
} PoqStatus;

/**
 * Experiment parameter overrides.
 */
typedef struct PoqConfig PoqConfig;

/**
 * Result table of one experiment run.
 */
typedef struct PoqTable PoqTable;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or null. Valid until the
 * next failing call on the same thread.
 */
const char *poq_last_error(void);

/**
 * Empty configuration (all defaults).
 */
struct PoqConfig *poq_config_new(void);

/**
 * Parses a flat `key = value` file into `*out`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum PoqStatus poq_config_load(const char *path, struct PoqConfig **out);

/**
 * Sets one override.
 *
 * # Safety
 * `config` must come from this library; `key` and `value` must be NUL-terminated.
 */
enum PoqStatus poq_config_set(struct PoqConfig *config, const char *key, const char *value);

/**
 * # Safety
 * `config` must be null or come from this library, and not be used afterwards.
 */
void poq_config_free(struct PoqConfig *config);

/**
 * Number of catalog entries.
 */
size_t poq_experiment_count(void);

/**
 * Name of catalog entry `i` (static storage), or null past the end.
 */
const char *poq_experiment_name(size_t i);

/**
 * Runs `name` with `config` (null for defaults) and stores the table in `*out`.
 *
 * # Safety
 * `name` must be NUL-terminated, `config` null or from this library, `out` valid.
 */
enum PoqStatus poq_run(const char *name,
                       const struct PoqConfig *config,
                       uint64_t seed,
                       struct PoqTable **out);

/**
 * # Safety
 * `table` must be null or come from this library, and not be used afterwards.
 */
void poq_table_free(struct PoqTable *table);

/**
 * Row count; 0 for null.
 *
 * # Safety
 * `table` must be null or come from this library.
 */
size_t poq_table_rows(const struct PoqTable *table);

/**
 * Rows failing an exact check.
 *
 * # Safety
 * `table` must be null or come from this library.
 */
size_t poq_table_hard_failures(const struct PoqTable *table);

/**
 * Rows outside their 3σ band.
 *
 * # Safety
 * `table` must be null or come from this library.
 */
size_t poq_table_statistical_failures(const struct PoqTable *table);

/**
 * The table as CSV; release with [`poq_string_free`]. Null on a null table.
 *
 * # Safety
 * `table` must be null or come from this library.
 */
char *poq_table_csv(const struct PoqTable *table);

/**
 * Writes the CSV to `path` and its metadata to `path.meta`.
 *
 * # Safety
 * `table` must come from this library and `path` be NUL-terminated.
 */
enum PoqStatus poq_table_write(const struct PoqTable *table, const char *path);

/**
 * # Safety
 * `s` must be null or come from [`poq_table_csv`], and not be used afterwards.
 */
void poq_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* POQLAB_H */
