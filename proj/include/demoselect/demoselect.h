// Copyright 2026 The demoselect Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

/*
 * demoselect C API.
 *
 * Every fallible call returns a ds_status. On failure, ds_last_error() and
 * ds_last_error_kind() describe the error for the calling thread until the
 * next failing call. Strings returned through char** out-parameters are
 * owned by the caller and released with ds_string_free().
 *
 * Structured inputs and outputs (selection requests, reports, analyses) are
 * UTF-8 JSON documents; their schemas are described in README.md.
 */
#ifndef DEMOSELECT_DEMOSELECT_H_
#define DEMOSELECT_DEMOSELECT_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define DS_API __declspec(dllexport)
#else
#define DS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Values double as the command-line exit codes. */
typedef enum ds_status {
  DS_OK = 0,
  DS_ERR_USAGE = 1,  /* bad arguments or configuration */
  DS_ERR_DATA = 2,   /* unreadable, malformed or inconsistent data */
  DS_ERR_ORACLE = 3  /* evaluator failure, protocol error, crash, timeout */
} ds_status;

typedef struct ds_evaluator ds_evaluator;

typedef enum ds_aggregator { DS_AGG_SUM = 0, DS_AGG_MEAN = 1 } ds_aggregator;

typedef struct ds_landscape_params {
  uint32_t n_demos;
  uint32_t n_queries;
  uint64_t seed;
  ds_aggregator aggregator;
  double interaction_scale; /* lambda >= 0 */
  double noise_scale;       /* sigma >= 0 */
  int planted;              /* nonzero enables the planted demo */
  uint32_t planted_demo;
  double planted_gamma;     /* fraction of query columns, (0, 1] */
  double planted_high;      /* must exceed 0.6 */
} ds_landscape_params;

DS_API const char* ds_version(void);
DS_API const char* ds_last_error(void);
DS_API const char* ds_last_error_kind(void);
DS_API void ds_string_free(char* s);

/* ---- evaluators --------------------------------------------------------- */

DS_API void ds_landscape_params_default(ds_landscape_params* params);
DS_API ds_status ds_evaluator_open_synthetic(const ds_landscape_params* params,
                                             ds_evaluator** out);
DS_API ds_status ds_evaluator_open_matrix(const char* csv_path, ds_evaluator** out);
DS_API ds_status ds_evaluator_open_table(const char* jsonl_path, ds_evaluator** out);
/* argv[0] is looked up on PATH. timeout_ms of 0 means the 60 s default. */
DS_API ds_status ds_evaluator_open_external(const char* const* argv, size_t argc,
                                            uint32_t timeout_ms, ds_evaluator** out);
/* Oracle spec as in the experiment config's "oracle" object. */
DS_API ds_status ds_evaluator_open_json(const char* spec_json, const char* base_dir,
                                        ds_evaluator** out);
DS_API void ds_evaluator_free(ds_evaluator* evaluator);

DS_API ds_status ds_evaluator_evaluate(ds_evaluator* evaluator, const uint32_t* demos,
                                       size_t n_demos, uint32_t query,
                                       double* out_utility);
/* Mean utility over the queries. */
DS_API ds_status ds_evaluator_aggregate(ds_evaluator* evaluator, const uint32_t* demos,
                                        size_t n_demos, const uint32_t* queries,
                                        size_t n_queries, double* out_utility);
DS_API uint64_t ds_evaluator_calls(const ds_evaluator* evaluator);
/* {"demos":[...],"queries":[...]}: the ids the backend naturally offers. */
DS_API ds_status ds_evaluator_ids(const ds_evaluator* evaluator, char** out_json);
/* External evaluators only: send shutdown and report the child's exit code. */
DS_API ds_status ds_evaluator_shutdown(ds_evaluator* evaluator, int* exit_code);

/* ---- selection ---------------------------------------------------------- */

/* Request: {"strategy":"topk|greedy|random|exhaustive|nn", "k":1,
 *           "holdout":"fixed|loocv", "candidates":[..], "queries":[..],
 *           "max_size":null, "fair_loocv":false, "iterative":false,
 *           "jobs":1, "manifest":"path"}
 * Missing candidates/queries come from the manifest roles, else from
 * ds_evaluator_ids. */
DS_API ds_status ds_select(ds_evaluator* evaluator, const char* request_json,
                           char** out_result_json);

/* ---- workflows ---------------------------------------------------------- */

/* Request: {"out":dir,"n_demos":6,"n_queries":10,"seed":0,"aggregator":"sum",
 *           "lambda":0,"sigma":0,"planted_gamma":null,"planted_high":0.9,
 *           "planted_demo":0,"table_max_size":null,"demo_columns":false,
 *           "feature_dim":8} */
DS_API ds_status ds_generate(const char* request_json, char** out_summary_json);

/* Runs the experiment and writes <dir>/report.json. `out_dir` may be NULL,
 * in which case the config's output_dir is used. */
DS_API ds_status ds_compare(const char* config_path, const char* out_dir,
                            char** out_report_json, char** out_table);
/* Writes <dir>/analysis.json and <dir>/rank_histograms.csv. */
DS_API ds_status ds_analyze(const char* config_path, const char* out_dir,
                            char** out_analysis_json, char** out_text);
/* Resolved output directory of an experiment config. */
DS_API ds_status ds_config_output_dir(const char* config_path, char** out_dir);
/* Re-audits a report document. *all_pass is 1 when no strategy exceeds its bound. */
DS_API ds_status ds_audit_report(const char* report_json, char** out_audit_json,
                                 char** out_table, int* all_pass);

DS_API ds_status ds_ingest_manifest(const char* path, char** out_summary_json);

/* ---- metrics ------------------------------------------------------------ */

DS_API ds_status ds_mask_iou(const char* pred_pgm, const char* truth_pgm, double* out);
DS_API ds_status ds_image_mse(const char* pred_path, const char* truth_path, double* out);

#ifdef __cplusplus
}
#endif

#endif /* DEMOSELECT_DEMOSELECT_H_ */
