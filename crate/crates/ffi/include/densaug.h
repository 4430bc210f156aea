#ifndef DENSAUG_H
#define DENSAUG_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call.
 */
typedef enum DaStatus {
  DA_STATUS_OK = 0,
  DA_STATUS_NULL_POINTER = 1,
  DA_STATUS_INVALID_ARGUMENT = 2,
  DA_STATUS_VALIDATION = 3,
  DA_STATUS_IO = 4,
  DA_STATUS_CORRUPT_INDEX = 5,
  DA_STATUS_MISSING_ARTIFACT = 6,
  DA_STATUS_BACKEND = 7,
  /**
   * A caller-provided buffer is too small; the needed size was reported.
   */
  DA_STATUS_BUFFER_TOO_SMALL = 8,
  DA_STATUS_INTERNAL = 9,
} DaStatus;

/**
 * The deterministic feature-hashing embedder.
 */
typedef struct DaEmbedder DaEmbedder;

/**
 * A flat exact-search vector store.
 */
typedef struct DaStore DaStore;

/**
 * One search result: position of the entry in insertion order, and score.
 */
typedef struct DaHit {
  uint64_t entry;
  double score;
} DaHit;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *da_version(void);

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *da_last_error_message(void);

/**
 * `<q, v1 - v2> / (|q| |v1 - v2|)` over `dim`-element arrays.
 *
 * # Safety
 * `q`, `v1` and `v2` must point to `dim` doubles; `out` to one double.
 */
enum DaStatus da_normalized_margin(const double *q,
                                   const double *v1,
                                   const double *v2,
                                   size_t dim,
                                   double *out);

/**
 * # Safety
 * `out` must be a valid pointer; the handle it receives must be freed with
 * [`da_embedder_free`].
 */
enum DaStatus da_hash_embedder_new(size_t dim, uint64_t seed, struct DaEmbedder **out);

/**
 * # Safety
 * `embedder` must come from [`da_hash_embedder_new`] and not be used again.
 */
void da_embedder_free(struct DaEmbedder *embedder);

/**
 * Writes the unit-length embedding of `text` into `out[0..dim]`.
 *
 * # Safety
 * `text` must be NUL-terminated; `out` must have room for `dim` floats.
 */
enum DaStatus da_embedder_embed(const struct DaEmbedder *embedder,
                                const char *text,
                                float *out,
                                size_t dim);

/**
 * # Safety
 * `out` must be valid; free the handle with [`da_store_free`].
 */
enum DaStatus da_store_new(size_t dim, struct DaStore **out);

/**
 * Loads a store written by [`da_store_persist`] (or the CLI's index stage).
 *
 * # Safety
 * `dir` must be NUL-terminated; `out` must be valid.
 */
enum DaStatus da_store_load(const char *dir, struct DaStore **out);

/**
 * # Safety
 * `store` must be a live handle; `dir` NUL-terminated.
 */
enum DaStatus da_store_persist(const struct DaStore *store, const char *dir);

/**
 * # Safety
 * `store` must come from a `da_store_*` constructor and not be used again.
 */
void da_store_free(struct DaStore *store);

/**
 * Number of entries; 0 for a null handle.
 *
 * # Safety
 * `store` must be null or a live handle.
 */
size_t da_store_len(const struct DaStore *store);

/**
 * Adds an original-document vector. Values are stored as given; search
 * scores are cosines, so they need not be normalized.
 *
 * # Safety
 * `doc_id` must be NUL-terminated and `values` must hold `dim` floats.
 */
enum DaStatus da_store_add_document(struct DaStore *store,
                                    const char *doc_id,
                                    const float *values,
                                    size_t dim);

/**
 * Exact top-`k` search. Writes up to `k` hits, best first, and their number
 * to `out_len`. `hits` must have room for `k` entries.
 *
 * # Safety
 * `query` must hold `dim` floats, `hits` room for `k` [`DaHit`]s.
 */
enum DaStatus da_store_search(const struct DaStore *store,
                              const float *query,
                              size_t dim,
                              size_t k,
                              struct DaHit *hits,
                              size_t *out_len);

/**
 * Copies the document id of entry `entry` into `buf` with a trailing NUL.
 * `needed` always receives the required buffer size; a short buffer gives
 * [`DaStatus::BufferTooSmall`].
 *
 * # Safety
 * `buf` must have room for `cap` bytes (or be null with `cap == 0`).
 */
enum DaStatus da_store_doc_id(const struct DaStore *store,
                              uint64_t entry,
                              char *buf,
                              size_t cap,
                              size_t *needed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DENSAUG_H */
