//
// Query layer: the expression grammar, metadata resolution to raw index
// plans, and a caching session that only reads missing slices.
//
// Grammar (whole-string, anchored):
//   exec   := "summary" | "rank" | "rank(" lo "-" hi [":" stride] ")"
//           | "rank(" id {"," id} ")"
//   ctx    := "*" | "function(" glob ")" | "path(" glob {"->" glob} ")"
//   metric := name ":" ("sum" | "prop") " (" ("i" | "e") ")"
// Globs support '*' and '?', are case-sensitive, and must match whole names.
// Execution selectors address ranks; a thread selector would slot in as
// another exec form but is not implemented.
//
#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "frame.hpp"
#include "ingest.hpp"
#include "store.hpp"

namespace perfslice::query {

struct exec_selector {
  enum class kind { summary, all_ranks, rank_range, rank_list };
  kind k = kind::summary;
  int64_t lo = 0, hi = 0;
  int64_t stride = 1;
  std::vector<int64_t> ranks;

  friend bool operator==(const exec_selector&, const exec_selector&) = default;
};

struct ctx_selector {
  enum class kind { all, function_glob, path };
  kind k = kind::all;
  std::string glob;
  std::vector<std::string> path;

  friend bool operator==(const ctx_selector&, const ctx_selector&) = default;
};

enum class metric_variant { sum, prop };

struct metric_selector {
  std::string name;
  metric_variant variant = metric_variant::sum;
  store::metric_scope scope = store::metric_scope::inclusive;

  friend bool operator==(const metric_selector&,
                         const metric_selector&) = default;
};

struct query_spec {
  exec_selector exec;
  ctx_selector ctx;
  metric_selector metric;
  std::optional<std::pair<uint64_t, uint64_t>> time_window;

  friend bool operator==(const query_spec&, const query_spec&) = default;
};

// Throws parse_error with the byte offset of the offending token in the
// message.
query_spec parse_query(
    const std::string& exec, const std::string& ctx, const std::string& metric,
    std::optional<std::pair<uint64_t, uint64_t>> window = std::nullopt);

exec_selector parse_exec(const std::string& text);
ctx_selector parse_ctx(const std::string& text);
metric_selector parse_metric(const std::string& text);

std::string render(const exec_selector&);
std::string render(const ctx_selector&);
std::string render(const metric_selector&);

struct index_plan {
  std::vector<uint32_t> profile_ids;  // ascending
  std::vector<uint32_t> ctx_ids;      // ascending
  std::vector<uint16_t> metric_ids;
  metric_variant variant = metric_variant::sum;

  bool empty() const {
    return profile_ids.empty() || ctx_ids.empty() || metric_ids.empty();
  }
  std::size_t key_count() const {
    return profile_ids.size() * ctx_ids.size() * metric_ids.size();
  }
};

// Maps selectors to raw ids. An unknown metric name raises no_such_metric;
// selectors that match nothing yield an empty (flagged, non-fatal) plan.
index_plan resolve_query(const query_spec& q, const store::meta_data& meta,
                         const ingest::keep_set& keep);

// Caching session over one open database. Fetches are serialized by an
// internal mutex; the cache grows monotonically and repeated fetches of
// resident keys perform no disk reads.
class session {
 public:
  session(const store::db_handle& h,
          const std::vector<ingest::prune_strategy>& strategies,
          unsigned jobs);

  const store::db_handle& db() const { return *db_; }
  const store::meta_data& meta() const { return db_->meta(); }
  const ingest::keep_set& keep() const { return keep_; }
  unsigned jobs() const { return jobs_; }

  // Rows for the full plan, reading only keys absent from the cache.
  ingest::slice_table fetch(const query_spec& q);
  // Same, for an already-resolved plan (analysis pipelines address raw ids).
  ingest::slice_table fetch_plan(const index_plan& plan);
  // fetch joined with profile metadata: columns
  // (profile_id, rank, ctx_id, metric_id, value).
  frame::table to_frame(const query_spec& q);

  std::size_t resident_keys() const { return resident_.size(); }

 private:
  const store::db_handle* db_;
  ingest::keep_set keep_;
  unsigned jobs_;

  std::mutex mutex_;
  ingest::slice_table cache_;                 // sorted by (p, c, m)
  std::unordered_set<uint64_t> resident_;     // packed keys already fetched
};

}  // namespace perfslice::query
