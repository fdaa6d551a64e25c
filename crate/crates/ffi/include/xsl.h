#ifndef XSL_H
#define XSL_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum XslStatus {
  XSL_STATUS_OK = 0,
  XSL_STATUS_NULL_POINTER = 1,
  XSL_STATUS_INVALID_INPUT = 2,
  XSL_STATUS_BAD_CONFIG = 3,
  XSL_STATUS_IO = 4,
  XSL_STATUS_FORMAT = 5,
  XSL_STATUS_NUMERIC = 6,
  XSL_STATUS_INSUFFICIENT = 7,
  XSL_STATUS_PANIC = 8,
} XslStatus;

typedef enum XslCondition {
  XSL_CONDITION_NATURAL = 0,
  XSL_CONDITION_UNIFORM = 1,
} XslCondition;

/**
 * Category statistics table.
 */
typedef struct XslInventory XslInventory;

/**
 * Learner parameters.
 */
typedef struct XslLearner XslLearner;

typedef struct XslRecall {
  double speech_to_image;
  double image_to_speech;
  double mean;
} XslRecall;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Length in bytes of the last error message on this thread, including the
 * terminating NUL; 0 when the last call succeeded.
 */
size_t xsl_last_error_length(void);

/**
 * Copy the last error message into `buf`, truncating to `len - 1` bytes
 * and always NUL terminating. Returns the number of bytes written,
 * excluding the NUL.
 *
 * # Safety
 * `buf` must be valid for `len` bytes of writes.
 */
size_t xsl_last_error_message(char *buf, size_t len);

/**
 * The shipped 80-category table.
 *
 * # Safety
 * `out` must be a valid pointer to write a handle into.
 */
enum XslStatus xsl_inventory_coco80(struct XslInventory **out);

/**
 * Synthetic inventory with daily rates `base_rate / rank^exponent`.
 *
 * # Safety
 * `out` must be a valid pointer to write a handle into.
 */
enum XslStatus xsl_inventory_synthetic_zipf(size_t n_categories,
                                            double exponent,
                                            double base_rate,
                                            uint64_t seed,
                                            struct XslInventory **out);

/**
 * Load an inventory from a JSON-lines table.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` a valid pointer.
 */
enum XslStatus xsl_inventory_load(const char *path, struct XslInventory **out);

/**
 * Number of categories; 0 for a null handle.
 *
 * # Safety
 * `inventory` must be null or a live handle.
 */
size_t xsl_inventory_len(const struct XslInventory *inventory);

/**
 * # Safety
 * `inventory` must be null or a live handle; `out` a valid pointer.
 */
enum XslStatus xsl_inventory_daily_rate(const struct XslInventory *inventory,
                                        size_t category,
                                        double *out);

/**
 * Per-category target counts for an age bin. `out_len` must equal the
 * number of categories.
 *
 * # Safety
 * `inventory` must be null or a live handle; `out` valid for `out_len` writes.
 */
enum XslStatus xsl_target_counts(const struct XslInventory *inventory,
                                 uint32_t duration_days,
                                 enum XslCondition condition,
                                 uint64_t *out,
                                 size_t out_len);

/**
 * # Safety
 * `inventory` must be null or a handle not yet freed.
 */
void xsl_inventory_free(struct XslInventory *inventory);

/**
 * Randomly initialized learner. A null `config_path` uses the default
 * model dimensions; otherwise the `[model]` table of an experiment config.
 *
 * # Safety
 * `config_path` must be null or NUL-terminated; `out` a valid pointer.
 */
enum XslStatus xsl_learner_new(const char *config_path, uint64_t seed, struct XslLearner **out);

/**
 * Load a checkpoint written by the `train` command.
 *
 * # Safety
 * Strings must be NUL-terminated (`config_path` may be null); `out` a valid pointer.
 */
enum XslStatus xsl_learner_load(const char *config_path,
                                const char *checkpoint_path,
                                struct XslLearner **out);

/**
 * # Safety
 * `learner` must be a live handle; `path` NUL-terminated.
 */
enum XslStatus xsl_learner_save(const struct XslLearner *learner, const char *path);

/**
 * Shared embedding dimension; 0 for a null handle.
 *
 * # Safety
 * `learner` must be null or a live handle.
 */
size_t xsl_learner_embed_dim(const struct XslLearner *learner);

/**
 * Per-frame input dimension; 0 for a null handle.
 *
 * # Safety
 * `learner` must be null or a live handle.
 */
size_t xsl_learner_phone_dim(const struct XslLearner *learner);

/**
 * Per-object input dimension; 0 for a null handle.
 *
 * # Safety
 * `learner` must be null or a live handle.
 */
size_t xsl_learner_visual_dim(const struct XslLearner *learner);

/**
 * Utterance embedding of `n_frames × phone_dim` frames.
 *
 * # Safety
 * `frames` must hold `n_frames * phone_dim` values; `out` `out_len` slots.
 */
enum XslStatus xsl_learner_embed_audio(const struct XslLearner *learner,
                                       const double *frames,
                                       size_t n_frames,
                                       double *out,
                                       size_t out_len);

/**
 * Scene embedding of `n_objects × visual_dim` features.
 *
 * # Safety
 * `features` must hold `n_objects * visual_dim` values; `out` `out_len` slots.
 */
enum XslStatus xsl_learner_embed_scene(const struct XslLearner *learner,
                                       const double *features,
                                       size_t n_objects,
                                       double *out,
                                       size_t out_len);

/**
 * # Safety
 * `learner` must be null or a handle not yet freed.
 */
void xsl_learner_free(struct XslLearner *learner);

/**
 * Dot-product similarity of two `dim`-vectors.
 *
 * # Safety
 * `a` and `b` must hold `dim` values; `out` a valid pointer.
 */
enum XslStatus xsl_similarity(const double *a, const double *b, size_t dim, double *out);

/**
 * Bidirectional InfoNCE over an `n × n` similarity matrix whose diagonal
 * holds the true pairs.
 *
 * # Safety
 * `similarities` must hold `n * n` values; `out` a valid pointer.
 */
enum XslStatus xsl_infonce(const double *similarities, size_t n, double temperature, double *out);

/**
 * Recall@k in both retrieval directions over an `n × n` matrix
 * (rows: utterances, columns: scenes).
 *
 * # Safety
 * `similarities` must hold `n * n` values; `out` a valid pointer.
 */
enum XslStatus xsl_recall_at_k(const double *similarities,
                               size_t n,
                               size_t k,
                               struct XslRecall *out);

/**
 * Spearman correlation with a two-sided permutation p-value.
 *
 * # Safety
 * `x` and `y` must hold `n` values; `rho` and `p` valid pointers.
 */
enum XslStatus xsl_spearman(const double *x,
                            const double *y,
                            size_t n,
                            size_t n_permutations,
                            uint64_t seed,
                            double *rho,
                            double *p);

/**
 * Mean two-alternative forced-choice score in percent, from an
 * `n_words × n_objects` score matrix.
 *
 * # Safety
 * Label arrays must hold `n_words` and `n_objects` values, `scores`
 * `n_words * n_objects`; `out` a valid pointer.
 */
enum XslStatus xsl_semtest(const uint32_t *word_labels,
                           size_t n_words,
                           const uint32_t *object_labels,
                           size_t n_objects,
                           const double *scores,
                           double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* XSL_H */
