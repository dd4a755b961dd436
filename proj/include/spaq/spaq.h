/* C interface to the spaq library. All strings are UTF-8, NUL-terminated.
 * Strings returned through `char**` are owned by the caller and released
 * with spaq_string_free. On failure a function returns a nonzero status and
 * spaq_last_error() describes it (per thread). */
#ifndef SPAQ_H
#define SPAQ_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define SPAQ_API __declspec(dllexport)
#elif defined(__GNUC__)
#define SPAQ_API __attribute__((visibility("default")))
#else
#define SPAQ_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum spaq_status {
  SPAQ_OK = 0,
  SPAQ_ERR_INVALID_ARGUMENT = 1,
  SPAQ_ERR_IO = 2,
  SPAQ_ERR_CYCLE_DETECTED = 3,
  SPAQ_ERR_DANGLING_DEPENDENCY = 4,
  SPAQ_ERR_DUPLICATE_ID = 5,
  SPAQ_ERR_INVALID_TIMEOUT = 6,
  SPAQ_ERR_INVALID_SPEC = 7,
  SPAQ_ERR_UNKNOWN_NODE = 8,
  SPAQ_ERR_MERGE_CREATES_CYCLE = 9,
  SPAQ_ERR_EDGE_CREATES_CYCLE = 10,
  SPAQ_ERR_DUPLICATE_EDGE = 11,
  SPAQ_ERR_PARSE = 12,
  SPAQ_ERR_NON_MONOTONE_TIME = 13,
  SPAQ_ERR_DUPLICATE_RUN_ID = 14,
  SPAQ_ERR_EMPTY_SERIES = 15,
  SPAQ_ERR_MALFORMED_TRACE = 16,
  SPAQ_ERR_SYNTAX = 17,
  SPAQ_ERR_RANGE = 18,
  SPAQ_ERR_UNKNOWN_PARAM = 19,
  SPAQ_ERR_NO_SAMPLES = 20,
  SPAQ_ERR_UNIMPLEMENTED = 21,
  SPAQ_ERR_EMPTY_SAMPLES = 22,
  SPAQ_ERR_INSUFFICIENT_DATA = 23,
  SPAQ_ERR_INTERNAL = 99
} spaq_status;

typedef enum spaq_verdict {
  SPAQ_HOLDS = 0,
  SPAQ_DOES_NOT_HOLD = 1,
  SPAQ_INSUFFICIENT_DATA = 3
} spaq_verdict;

typedef enum spaq_mode { SPAQ_BASELINE = 0, SPAQ_HIGH_FREQUENCY = 1, SPAQ_ADAPTIVE = 2 } spaq_mode;

typedef enum spaq_side { SPAQ_LOWER = 0, SPAQ_UPPER = 1, SPAQ_TWO_SIDED = 2 } spaq_side;

typedef struct spaq_graph spaq_graph;
typedef struct spaq_dataset spaq_dataset;

SPAQ_API const char* spaq_version(void);
SPAQ_API const char* spaq_last_error(void);
SPAQ_API const char* spaq_status_name(spaq_status status);
SPAQ_API void spaq_string_free(char* s);

/* ---- graphs ---- */
SPAQ_API spaq_status spaq_graph_load(const char* path, spaq_graph** out);
SPAQ_API spaq_status spaq_graph_parse(const char* json, spaq_graph** out);
SPAQ_API void spaq_graph_free(spaq_graph* g);
SPAQ_API spaq_status spaq_graph_to_json(const spaq_graph* g, char** out);
SPAQ_API size_t spaq_graph_node_count(const spaq_graph* g);
SPAQ_API spaq_status spaq_graph_hash(const spaq_graph* g, char** out);
/* New graph where `dependent` depends on `dependency`. */
SPAQ_API spaq_status spaq_graph_add_edge(const spaq_graph* g, const char* dependency, const char* dependent,
                                         spaq_graph** out);
SPAQ_API spaq_status spaq_graph_merge(const spaq_graph* g, const char* a, const char* b, const char* merged_id,
                                      spaq_graph** out);

/* ---- simulation ---- */
typedef struct spaq_sim_options {
  int64_t total_cycles;
  uint64_t seed;
  spaq_mode mode;
  int64_t high_frequency_timeout;
  int oracle_ttf;
  int64_t drift_sample_every;
  int max_retries;
  /* Optional "node=delay,node=delay" adaptive delays; NULL for none. */
  const char* delays;
} spaq_sim_options;

SPAQ_API void spaq_sim_options_init(spaq_sim_options* opt);
/* Runs one simulation. Writes the trace to trace_path when non-NULL and
 * returns a JSON summary (run_id, availability, costs) in *summary_json. */
SPAQ_API spaq_status spaq_simulate(const spaq_graph* g, const spaq_sim_options* opt, const char* trace_path,
                                   char** summary_json);
/* Runs `runs` simulations with seeds opt->seed .. opt->seed+runs-1 using up to
 * `jobs` threads; traces go to trace_dir/<run_id>.trace when trace_dir is
 * non-NULL. Returns a JSON summary array. */
SPAQ_API spaq_status spaq_simulate_batch(const spaq_graph* g, const spaq_sim_options* opt, int runs, int jobs,
                                         const char* trace_dir, char** summary_json);

/* ---- datasets ---- */
SPAQ_API spaq_status spaq_dataset_load(const char* const* paths, size_t count, spaq_dataset** out);
SPAQ_API void spaq_dataset_free(spaq_dataset* ds);
SPAQ_API size_t spaq_dataset_event_count(const spaq_dataset* ds);
SPAQ_API size_t spaq_dataset_run_count(const spaq_dataset* ds);

/* ---- analysis ---- */
/* Evaluates a property. *result_json holds the machine-readable record;
 * *verdict the three-state outcome (interval results report SPAQ_HOLDS). */
SPAQ_API spaq_status spaq_check(const spaq_dataset* ds, const char* property, spaq_verdict* verdict,
                                char** result_json);
/* Caret diagnostic for a property that fails to parse; SPAQ_OK with an empty
 * string when it parses. */
SPAQ_API spaq_status spaq_property_diagnose(const char* property, char** diagnostic);
SPAQ_API spaq_status spaq_scan(const spaq_dataset* ds, const spaq_graph* g, int64_t window, double p0, double C,
                               char** matrix_json);
/* Availability and per-node cost of every run against the graph. */
SPAQ_API spaq_status spaq_report(const spaq_dataset* ds, const spaq_graph* g, char** report_json);

typedef struct spaq_experiment_options {
  int runs;
  int64_t cycles;
  uint64_t seed;
  int jobs;
  int write_traces;
  /* exp1 */
  int64_t hf_timeout;
  int force_zero_delays;
  /* exp2 / exp3 significance settings; <= 0 selects the defaults */
  double rel_shift;
  double p0;
  double confidence;
  int64_t window;
} spaq_experiment_options;

SPAQ_API void spaq_experiment_options_init(spaq_experiment_options* opt);
/* which: 1, 2 or 3. Writes report files into outdir when non-NULL. */
SPAQ_API spaq_status spaq_experiment_run(int which, const spaq_graph* g, const spaq_experiment_options* opt,
                                         const char* outdir, char** report_json);

/* Failure extraction over a CSV time series (time,value). */
SPAQ_API spaq_status spaq_extract_failures_csv(const char* path, double threshold, char** result_json);

/* ---- statistics ---- */
SPAQ_API spaq_status spaq_min_samples(double F, double C, spaq_side side, size_t* out);
SPAQ_API spaq_status spaq_quantile_bound(const double* samples, size_t n, double F, double C, spaq_side side,
                                         char** result_json);

#ifdef __cplusplus
}
#endif

#endif
