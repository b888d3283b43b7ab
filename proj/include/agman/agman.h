/* agman: attribute-conditioned image embedding and retrieval.
 *
 * C API over the core library. All objects are opaque handles; every function
 * returns an agman_status, with details retrievable via agman_last_error()
 * (thread-local). Strings returned through out-parameters are heap-allocated
 * and must be released with agman_string_free().
 */
#ifndef AGMAN_AGMAN_H
#define AGMAN_AGMAN_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum agman_status {
  AGMAN_OK = 0,
  AGMAN_ERR_ARGUMENT = 1,   /* bad argument (index/id/name out of range) */
  AGMAN_ERR_PARSE = 2,      /* malformed file content */
  AGMAN_ERR_VALIDATION = 3, /* well-formed but inconsistent data */
  AGMAN_ERR_IO = 4,         /* missing/unreadable/unwritable path */
  AGMAN_ERR_SAMPLING = 5,   /* unsatisfiable triplet pool */
  AGMAN_ERR_CONFIG = 6,     /* invalid configuration */
  AGMAN_ERR_DEGENERATE = 7, /* degenerate numeric input (zero-norm embedding) */
  AGMAN_ERR_STATE = 8,      /* operation invalid for the model state */
  AGMAN_ERR_INTERNAL = 9
} agman_status;

typedef struct agman_config agman_config;

/* Last error message for the calling thread; never NULL. */
const char* agman_last_error(void);

const char* agman_version(void);

void agman_string_free(char* s);

/* ---- configuration ----------------------------------------------------- */

/* Parses a JSON config file. */
agman_status agman_config_load(const char* path, agman_config** out);

/* Parses a JSON config document from memory. */
agman_status agman_config_parse(const char* json_text, agman_config** out);

/* Applies one dotted-path override, e.g. ("train.epochs", "5"). The value is
 * parsed as JSON when possible, otherwise taken as a string. */
agman_status agman_config_set(agman_config* cfg, const char* dotted_key, const char* value);

/* Serializes the resolved configuration as JSON. */
agman_status agman_config_to_json(const agman_config* cfg, char** json_out);

void agman_config_free(agman_config* cfg);

/* ---- commands ----------------------------------------------------------- */

/* Writes out_dir/manifest.jsonl and the PPM images under out_dir/images;
 * *manifest_path_out (optional) receives the manifest path. */
agman_status agman_synth_data(const agman_config* cfg, const char* out_dir, char** manifest_path_out);

/* Trains per the config (data.manifest required); writes out_dir/checkpoint/
 * and out_dir/history.csv. */
agman_status agman_train(const agman_config* cfg, const char* out_dir);

/* Key=value override pairs for evaluation commands: n_overrides entries, keys
 * and values as parallel arrays. May be NULL when n_overrides is 0. */

/* Attribute-specific retrieval MAP report (JSON) for a checkpoint. A NULL or
 * empty manifest falls back to the checkpoint config's data.val_manifest,
 * then data.manifest. */
agman_status agman_eval_map(const char* checkpoint_dir, const char* manifest,
                            const char* const* override_keys, const char* const* override_values,
                            size_t n_overrides, char** report_json_out);

/* Triplet relation prediction report (JSON). triplet_file NULL/empty samples
 * eval.triplet_count triplets from the manifest instead. */
agman_status agman_eval_triplets(const char* checkpoint_dir, const char* manifest, const char* triplet_file,
                                 const char* const* override_keys, const char* const* override_values,
                                 size_t n_overrides, char** report_json_out);

/* Top-k retrieval ranking as CSV (query_id,rank,candidate_id,score,relevant).
 * *truncated_out (optional) is set to 1 when k exceeded the candidate count
 * and the full ranking was returned. */
agman_status agman_retrieve(const char* checkpoint_dir, const char* manifest, const char* query_id,
                            const char* attribute_name, long k, const char* const* override_keys,
                            const char* const* override_values, size_t n_overrides, char** csv_out,
                            int* truncated_out);

/* Spatial attention softmax map for (image, attribute): CSV grid plus a JSON
 * sidecar {image_id, attribute, h, w}. */
agman_status agman_export_attention(const char* checkpoint_dir, const char* manifest, const char* image_id,
                                    const char* attribute_name, const char* const* override_keys,
                                    const char* const* override_values, size_t n_overrides, char** csv_out,
                                    char** sidecar_json_out);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* AGMAN_AGMAN_H */
