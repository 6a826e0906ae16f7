//
// Read layer: prune-strategy evaluation on the summary profile and parallel
// selective extraction of profile/trace slices.
//
// Parallel reads are deterministic: each profile's result lands in an
// index-addressed slot and slots are concatenated in request order, so the
// output is identical for any worker count.
//
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "store.hpp"

namespace perfslice::ingest {

enum class prune_kind {
  min_inclusive_share,
  drop_kind,
  collapse_subtree_glob,
};

struct prune_strategy {
  prune_kind kind = prune_kind::min_inclusive_share;
  double threshold_frac = 0.01;
  store::ctx_kind kind_to_drop = store::ctx_kind::line;
  std::string name_glob;

  static prune_strategy min_share(double threshold_frac);
  static prune_strategy drop(store::ctx_kind k);
  static prune_strategy collapse(std::string glob);
};

// Retained ctx ids, closed under parent; the root is always kept.
struct keep_set {
  std::vector<uint32_t> ids;  // ascending

  bool contains(uint32_t ctx) const;
  std::size_t size() const { return ids.size(); }
};

// Evaluates all strategies on the summary profile and closes the result
// under parents. min_inclusive_share drops contexts whose summary inclusive
// "cputime" falls below threshold_frac of the root's; collapse keeps the
// glob-matched node but drops its descendants.
keep_set compute_keep_set(const store::db_handle& h,
                          const std::vector<prune_strategy>& strategies);

// Columnar slice rows sorted by (profile_id, ctx_id, metric_id), no
// duplicate keys.
struct slice_table {
  std::vector<uint32_t> profile_id;
  std::vector<uint32_t> ctx_id;
  std::vector<uint16_t> metric_id;
  std::vector<double> value;

  std::size_t size() const { return profile_id.size(); }
  void append(uint32_t p, uint32_t c, uint16_t m, double v);
  void append_all(const slice_table& other);

  friend bool operator==(const slice_table&, const slice_table&) = default;
};

// One per-profile read rectangle.
struct slice_request {
  uint32_t profile_id = 0;
  store::id_filter ctxs;
  store::metric_filter metrics;
};

// Runs the requests through store's selective readers on a worker pool.
// Requests must be sorted by profile_id for the output ordering invariant.
slice_table read_slices(const store::db_handle& h,
                        const std::vector<slice_request>& requests,
                        unsigned jobs);

// Concatenated per-profile selective reads restricted to the keep set.
// `metric_ids` empty means all metrics.
slice_table ingest_profiles(const store::db_handle& h,
                            std::vector<uint32_t> profile_ids,
                            const keep_set& keep,
                            const std::vector<uint16_t>& metric_ids,
                            unsigned jobs);

struct trace_table {
  std::vector<uint32_t> profile_id;
  std::vector<uint64_t> timestamp_ns;
  std::vector<uint32_t> ctx_id;

  std::size_t size() const { return profile_id.size(); }

  friend bool operator==(const trace_table&, const trace_table&) = default;
};

struct trace_ingest_result {
  trace_table events;
  // Active context just before the window start, per profile.
  std::map<uint32_t, std::optional<store::trace_event>> carry_in;
};

trace_ingest_result ingest_traces(const store::db_handle& h,
                                  std::vector<uint32_t> profile_ids,
                                  uint64_t t0_ns, uint64_t t1_ns,
                                  unsigned jobs);

}  // namespace perfslice::ingest
