//
// End-to-end report assembly: scenario generation, database info/validation,
// query printing, and the imbalance / iteration / congestion / benchmark
// pipelines. The C API and CLI are thin wrappers over these.
//
#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "query.hpp"
#include "store.hpp"

namespace perfslice::workflows {

enum class output_format { csv, json };

// Parses the scenario config, writes the database plus a truth.json sidecar
// into out_dir, and returns the ground-truth JSON text.
std::string generate_database(const std::string& config_json_text,
                              const std::filesystem::path& out_dir);

std::string database_info(const store::db_handle& h, output_format f);

// Rendered validation report plus the violation count.
std::pair<std::string, uint64_t> validate(const store::db_handle& h,
                                          output_format f);

struct session_options {
  double min_inclusive_share = -1.0;  // < 0 disables share pruning
  bool drop_line_contexts = false;
  std::vector<std::string> collapse_globs;
  unsigned jobs = 0;  // 0 = hardware concurrency
};

std::unique_ptr<query::session> open_session(const store::db_handle& h,
                                             const session_options& opt);

std::string run_query(query::session& s, const std::string& exec,
                      const std::string& ctx, const std::string& metric,
                      output_format f);

// GPU metric discovery, kernel discovery, per-rank balance ratios, and
// iteration CVs (when traces allow). An inactive metric yields an empty
// report rather than an error.
std::string imbalance_report(query::session& s, const std::string& metric_name,
                             double min_share, output_format f);

struct iterations_options {
  std::string anchor = "auto";  // "auto" | "root" | decimal ctx id
  double total_time_s = 0.0;    // <= 0 derives the longest trace span
};

std::string iterations_report(query::session& s, const iterations_options& opt,
                              output_format f);

struct congestion_options {
  std::string callsite_glob = "MPI_*";
  std::string method = "dbscan";  // "dbscan" | "kmeans"
  uint32_t k = 2;
  double eps = 0.0;  // <= 0 selects the default radius
};

std::string congestion_report(query::session& s, const congestion_options& opt,
                              output_format f);

struct bench_options {
  std::string suite = "ingest";  // "ingest" | "frame"
  std::vector<uint64_t> sizes;
  unsigned repeat = 10;
  unsigned jobs = 0;
  uint64_t seed = 0;
};

// CSV: suite,size,op,parallelism,mean_s
std::string bench(const store::db_handle& h, const bench_options& opt);

}  // namespace perfslice::workflows
