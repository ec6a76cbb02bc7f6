/* C interface to the equigraph library.
 *
 * All entry points return eqg_status; on failure eqg_last_error() describes
 * the problem (thread-local, valid until the next failing call on that
 * thread). Strings returned through char** are heap copies the caller
 * releases with eqg_string_free(). Handles are opaque: release bundles with
 * eqg_bundle_free and results with eqg_result_free.
 *
 * Configs are JSON documents with the same schema the CLI consumes; the
 * "source" section describes where the graph comes from. Optimizer entry
 * points that take a bundle handle use the handle's graph, groups, and
 * rewards and read only the optimizer-related config sections.
 */
#ifndef EQUIGRAPH_H
#define EQUIGRAPH_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef struct eqg_bundle eqg_bundle;
typedef struct eqg_result eqg_result;

/* Values double as CLI exit codes. */
typedef enum eqg_status {
    EQG_OK = 0,
    EQG_ERR_INTERNAL = 1, /* unexpected failure */
    EQG_ERR_CONFIG = 2,   /* invalid configuration or arguments */
    EQG_ERR_DATA = 3,     /* invalid or inconsistent data */
    EQG_ERR_DIVERGED = 4  /* optimizer produced non-finite values */
} eqg_status;

const char* eqg_version(void);

/* Message for the most recent failure on this thread; never NULL. */
const char* eqg_last_error(void);

void eqg_string_free(char* s);

/* Loads a dataset from a manifest.json path. Groups carry uniform edge
 * weights; weight rules are applied by eqg_bundle_generate. */
eqg_status eqg_bundle_load(const char* manifest_path, eqg_bundle** out);

/* Builds the fully materialized instance an experiment config describes:
 * generates or loads the graph, assigns group weights, places rewards. */
eqg_status eqg_bundle_generate(const char* config_json, eqg_bundle** out);

/* Writes the bundle's dataset files (manifest.json + CSVs) into dir. */
eqg_status eqg_bundle_save(const eqg_bundle* b, const char* dir);

uint32_t eqg_bundle_nodes(const eqg_bundle* b);
uint64_t eqg_bundle_edge_count(const eqg_bundle* b);
uint64_t eqg_bundle_mask_count(const eqg_bundle* b);
uint32_t eqg_bundle_group_count(const eqg_bundle* b);
uint32_t eqg_bundle_reward_count(const eqg_bundle* b);

/* Counts plus group ids and reward nodes as a JSON object. */
eqg_status eqg_bundle_info_json(const eqg_bundle* b, char** out);

void eqg_bundle_free(eqg_bundle* b);

/* Greedy equitable augmentation under config.budget / config.geci. */
eqg_status eqg_optimize_geci(const eqg_bundle* b, const char* config_json,
                             eqg_result** out);

/* Relaxed gradient optimizer under config.budget / config.train. */
eqg_status eqg_optimize_mrp(const eqg_bundle* b, const char* config_json,
                            eqg_result** out);

/* Facility placement under config.facility.k / config.train. */
eqg_status eqg_optimize_facility(const eqg_bundle* b, const char* config_json,
                                 eqg_result** out);

/* Edge additions as [[src,dst],...], or placed nodes as [node,...] for a
 * facility result. */
eqg_status eqg_result_edits_json(const eqg_result* r, char** out);

/* Optimizer-specific detail (greedy trace, epoch count, final tau, ...). */
eqg_status eqg_result_detail_json(const eqg_result* r, char** out);

/* Epoch-by-epoch training trajectory as CSV; empty for greedy results. */
eqg_status eqg_result_trajectory_csv(const eqg_result* r, char** out);

void eqg_result_free(eqg_result* r);

/* Evaluates the bundle with the additions in edits_json ([[src,dst],...];
 * NULL or empty means none) under config.eval, writing the report JSON. */
eqg_status eqg_evaluate(const eqg_bundle* b, const char* config_json,
                        const char* edits_json, char** report_json);

/* Full pipeline entry: command is one of generate, optimize, evaluate,
 * sweep, facility. Writes output files under out_dir and returns the
 * summary JSON. */
eqg_status eqg_run(const char* command, const char* config_json,
                   const char* out_dir, char** summary_json);

#ifdef __cplusplus
}
#endif

#endif /* EQUIGRAPH_H */
