/*
 * perfslice C API: performance-diagnostics toolkit over sparse profile/trace
 * databases.
 *
 * All functions return ps_status; PS_OK is 0. On failure, ps_last_error()
 * returns a thread-local message describing the most recent error on the
 * calling thread. Strings returned through char** out-parameters are
 * heap-allocated and must be released with ps_string_free().
 *
 * Handles are opaque. A ps_session borrows its ps_database: close sessions
 * before closing the database they were opened on. Distinct handles may be
 * used from distinct threads; a single session serializes its own fetches.
 */
#ifndef PERFSLICE_H
#define PERFSLICE_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ps_status {
  PS_OK = 0,
  PS_E_IO = 1,
  PS_E_FORMAT = 2,            /* bad magic/version/truncated file */
  PS_E_INVALID_IMAGE = 3,     /* image violates a format invariant */
  PS_E_NOT_FOUND = 4,
  PS_E_INVALID_CONFIG = 5,    /* malformed or inconsistent scenario config */
  PS_E_NO_SUMMARY = 6,
  PS_E_DEGENERATE_SUMMARY = 7,
  PS_E_PARSE = 8,             /* query or node-name syntax error */
  PS_E_NO_SUCH_METRIC = 9,
  PS_E_NO_PERIODICITY = 10,   /* no anchor candidate in the trace */
  PS_E_NO_OUTLIERS = 11,      /* clustering produced a single group */
  PS_E_INSUFFICIENT_DATA = 12,
  PS_E_INVALID_ARGUMENT = 13,
  PS_E_INTERNAL = 14
} ps_status;

typedef enum ps_format {
  PS_FORMAT_CSV = 0,
  PS_FORMAT_JSON = 1
} ps_format;

const char* ps_version(void);
unsigned ps_default_jobs(void);
const char* ps_status_name(ps_status status);
const char* ps_last_error(void);
void ps_string_free(char* s);

/* Generates a synthetic database from a scenario config (JSON text) into
 * out_dir, writing meta.bin/profile.db/trace.db plus truth.json. When
 * truth_json_out is non-NULL it receives the ground-truth JSON text. */
ps_status ps_generate(const char* scenario_json, const char* out_dir,
                      char** truth_json_out);

typedef struct ps_database ps_database;

ps_status ps_database_open(const char* dir, ps_database** out);
void ps_database_close(ps_database* db);
ps_status ps_database_info(const ps_database* db, ps_format format,
                           char** out);
/* Renders every invariant violation; *violations receives the count. */
ps_status ps_database_validate(const ps_database* db, ps_format format,
                               uint64_t* violations, char** out);

typedef struct ps_prune_options {
  double min_inclusive_share;   /* < 0 disables share pruning */
  int drop_line_contexts;       /* nonzero drops line-kind contexts */
  const char* const* collapse_globs;
  size_t collapse_count;
} ps_prune_options;

typedef struct ps_session ps_session;

/* prune may be NULL (keep everything); jobs 0 = hardware concurrency. */
ps_status ps_session_open(ps_database* db, const ps_prune_options* prune,
                          unsigned jobs, ps_session** out);
void ps_session_close(ps_session* session);

/* Query strings follow the expression grammar, e.g.
 * ps_query(s, "rank(0-100:2)", "function(MPI_*)", "cputime:prop (i)", ...). */
ps_status ps_query(ps_session* session, const char* exec, const char* ctx,
                   const char* metric, ps_format format, char** out);

/* GPU imbalance report for the named kernel-time metric. */
ps_status ps_imbalance(ps_session* session, const char* metric_name,
                       double min_share, ps_format format, char** out);

/* Iteration analysis: anchor is "auto", "root", or a decimal ctx id;
 * total_time_s <= 0 derives the longest trace span. */
ps_status ps_iterations(ps_session* session, const char* anchor,
                        double total_time_s, ps_format format, char** out);

/* Congestion localization: method is "dbscan" (eps <= 0 picks the default
 * radius) or "kmeans" (k groups). */
ps_status ps_congestion(ps_session* session, const char* callsite_glob,
                        const char* method, unsigned k, double eps,
                        ps_format format, char** out);

/* Benchmark suites "ingest" or "frame"; emits CSV
 * (suite,size,op,parallelism,mean_s). sizes may be NULL for defaults. */
ps_status ps_bench(ps_database* db, const char* suite, const uint64_t* sizes,
                   size_t n_sizes, unsigned repeat, unsigned jobs,
                   uint64_t seed, char** out);

#ifdef __cplusplus
}
#endif

#endif /* PERFSLICE_H */
