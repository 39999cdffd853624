#ifndef VERIFORGE_H
#define VERIFORGE_H

/* Generated by cbindgen from src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum VfStatus {
  VF_STATUS_OK = 0,
  VF_STATUS_NULL_ARGUMENT = 1,
  VF_STATUS_INVALID_ARGUMENT = 2,
  VF_STATUS_PARSE = 3,
  VF_STATUS_IO = 4,
  VF_STATUS_INTEGRITY = 5,
  VF_STATUS_CONFIG = 6,
  VF_STATUS_BACKEND = 7,
  VF_STATUS_TRANSPORT = 8,
  VF_STATUS_PANIC = 9,
} VfStatus;

typedef enum VfBackend {
  VF_BACKEND_MOCK = 0,
  VF_BACKEND_IVERILOG = 1,
} VfBackend;

typedef enum VfDifficulty {
  VF_DIFFICULTY_EASY = 0,
  VF_DIFFICULTY_MEDIUM = 1,
  VF_DIFFICULTY_HARD = 2,
} VfDifficulty;

typedef enum VfPromptMode {
  VF_PROMPT_MODE_DIRECT = 0,
  VF_PROMPT_MODE_STANDARD_REASONING = 1,
  VF_PROMPT_MODE_EXTENDED_REASONING = 2,
} VfPromptMode;

/**
 * Opaque corpus handle.
 */
typedef struct VfCorpus VfCorpus;

typedef struct VfVerifySummary {
  size_t total;
  size_t passed;
  size_t compile_fail;
  size_t sim_fail;
  size_t timeout;
  size_t tool_missing;
  double rejection_rate;
} VfVerifySummary;

typedef struct VfPlan {
  enum VfDifficulty difficulty;
  enum VfPromptMode prompt_mode;
  uint32_t max_new_tokens;
} VfPlan;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread, or NULL. The pointer
 * stays valid until the next call into this library on the same thread.
 */
const char *vf_last_error(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, not yet freed.
 */
void vf_string_free(char *s);

/**
 * Loads a JSONL corpus into `*out`.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum VfStatus vf_corpus_load(const char *path, struct VfCorpus **out);

/**
 * # Safety
 * `corpus` must be a live handle; `path` a NUL-terminated string.
 */
enum VfStatus vf_corpus_save(const struct VfCorpus *corpus, const char *path);

/**
 * Number of samples, or 0 for NULL.
 *
 * # Safety
 * `corpus` must be NULL or a live handle.
 */
size_t vf_corpus_len(const struct VfCorpus *corpus);

/**
 * # Safety
 * `corpus` must be NULL or a handle from this library, not yet freed.
 */
void vf_corpus_free(struct VfCorpus *corpus);

/**
 * Stage log of the corpus as a JSON array; free with `vf_string_free`.
 *
 * # Safety
 * `corpus` must be a live handle; `out` must be writable.
 */
enum VfStatus vf_corpus_stage_log_json(const struct VfCorpus *corpus, char **out);

/**
 * Near-duplicate removal within each domain. `combine_and` selects the
 * conjunction of the problem and solution similarities instead of the
 * disjunction.
 *
 * # Safety
 * `corpus` must be a live handle; `out` must be writable.
 */
enum VfStatus vf_corpus_dedup(const struct VfCorpus *corpus,
                              double threshold,
                              bool combine_and,
                              struct VfCorpus **out);

/**
 * gzip compression ratio of the concatenated solutions and of their
 * token-class sequence.
 *
 * # Safety
 * `corpus` must be a live handle; `cr` and `cr_pos` must be writable.
 */
enum VfStatus vf_corpus_compression(const struct VfCorpus *corpus, double *cr, double *cr_pos);

/**
 * Simulates every sample against its testbench and stores the passing
 * ones in `*out`. `summary` may be NULL.
 *
 * # Safety
 * `corpus` must be a live handle; `out` must be writable; `summary` must be
 * NULL or writable.
 */
enum VfStatus vf_corpus_verify(const struct VfCorpus *corpus,
                               enum VfBackend backend,
                               size_t workers,
                               uint64_t timeout_ms,
                               struct VfCorpus **out,
                               struct VfVerifySummary *summary);

/**
 * Unbiased pass@k for `c` correct out of `n` samples.
 *
 * # Safety
 * `out` must be writable.
 */
enum VfStatus vf_pass_at_k(uint64_t n, uint64_t c, uint64_t k, double *out);

/**
 * Prompt mode and token budget for a difficulty label.
 *
 * # Safety
 * `out` must be writable.
 */
enum VfStatus vf_plan_for(enum VfDifficulty d, struct VfPlan *out);

/**
 * Difficulty from the shipped keyword and length heuristic.
 *
 * # Safety
 * `problem` must be a NUL-terminated string; `out` must be writable.
 */
enum VfStatus vf_classify_difficulty(const char *problem, enum VfDifficulty *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VERIFORGE_H */
