#ifndef REINFLECT_H
#define REINFLECT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum ReinflectStatus {
  REINFLECT_STATUS_OK = 0,
  REINFLECT_STATUS_NULL_POINTER = 1,
  REINFLECT_STATUS_INVALID_UTF8 = 2,
  REINFLECT_STATUS_INVALID_ARGUMENT = 3,
  REINFLECT_STATUS_NOT_FOUND = 4,
  REINFLECT_STATUS_IO = 5,
  REINFLECT_STATUS_PARSE = 6,
  REINFLECT_STATUS_CHECKPOINT = 7,
  REINFLECT_STATUS_INTERNAL = 8,
} ReinflectStatus;

/*
 A trained model with its vocabularies and patch table.
 */
typedef struct ReinflectModel ReinflectModel;

/*
 Immutable patch lookup table.
 */
typedef struct ReinflectPatchTable ReinflectPatchTable;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message for the last failed call on this thread, or NULL. The pointer
 stays valid until the next call into this library on the same thread.
 */
const char *reinflect_last_error(void);

/*
 # Safety
 `s` must be NULL or a string returned by this library, freed once.
 */
void reinflect_string_free(char *s);

/*
 The table for the embedded font and default Unicode ranges.

 # Safety
 `out` must be a valid pointer to writable storage.
 */
enum ReinflectStatus reinflect_patch_table_default(struct ReinflectPatchTable **out);

/*
 Parses `symbol<TAB>id<TAB>result` rows.

 # Safety
 `tsv` must be a NUL-terminated string; `out` must be writable.
 */
enum ReinflectStatus reinflect_patch_table_from_tsv(const char *tsv,
                                                    struct ReinflectPatchTable **out);

/*
 # Safety
 `table` must be a live handle; `out` must be writable.
 */
enum ReinflectStatus reinflect_patch_table_to_tsv(const struct ReinflectPatchTable *table,
                                                  char **out);

/*
 Number of patch classes; 0 for NULL.

 # Safety
 `table` must be NULL or a live handle.
 */
uint32_t reinflect_patch_table_class_count(const struct ReinflectPatchTable *table);

/*
 Applies patch `patch_id` to `symbol`. Returns `NotFound` when the patch
 is undefined for that symbol.

 # Safety
 `table` must be a live handle; `out_symbol` must be writable.
 */
enum ReinflectStatus reinflect_patch_table_apply(const struct ReinflectPatchTable *table,
                                                 uint32_t symbol_cp,
                                                 uint32_t patch_id,
                                                 uint32_t *out_symbol);

/*
 Patch id turning `a` into `b`, or `NotFound`.

 # Safety
 `table` must be a live handle; `out_id` must be writable.
 */
enum ReinflectStatus reinflect_patch_table_find(const struct ReinflectPatchTable *table,
                                                uint32_t a,
                                                uint32_t b,
                                                uint32_t *out_id);

/*
 # Safety
 `table` must be NULL or a handle from this library, freed once.
 */
void reinflect_patch_table_free(struct ReinflectPatchTable *table);

/*
 Patch-aware alignment as `lemma_aligned<TAB>target_aligned<TAB>cost`,
 with `#` marking gaps. A NULL table means no patches.

 # Safety
 String arguments must be NUL-terminated; `table` NULL or live; `out`
 writable.
 */
enum ReinflectStatus reinflect_align(const struct ReinflectPatchTable *table,
                                     const char *lemma,
                                     const char *target,
                                     char **out);

/*
 Gold action sequence as space-separated tokens (`COPY`, `PATCH:3`, ...).

 # Safety
 As for [`reinflect_align`].
 */
enum ReinflectStatus reinflect_oracle(const struct ReinflectPatchTable *table,
                                      const char *lemma,
                                      const char *target,
                                      char **out);

/*
 Runs a space-separated action sequence over `lemma`.

 # Safety
 As for [`reinflect_align`].
 */
enum ReinflectStatus reinflect_run(const struct ReinflectPatchTable *table,
                                   const char *lemma,
                                   const char *actions,
                                   char **out);

/*
 # Safety
 `path` must be NUL-terminated; `out` writable.
 */
enum ReinflectStatus reinflect_model_load(const char *path, struct ReinflectModel **out);

/*
 Predicts the form of `lemma` for `features` (`;`-separated tags) with
 beam search of width `beam_size`. `out_log_likelihood` may be NULL.

 # Safety
 `model` must be live; strings NUL-terminated; `out_form` writable.
 */
enum ReinflectStatus reinflect_model_predict(const struct ReinflectModel *model,
                                             const char *lemma,
                                             const char *features,
                                             uint32_t beam_size,
                                             char **out_form,
                                             double *out_log_likelihood);

/*
 # Safety
 `model` must be NULL or a handle from this library, freed once.
 */
void reinflect_model_free(struct ReinflectModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* REINFLECT_H */
