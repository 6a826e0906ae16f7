//
// Imbalance mathematics, GPU metric/kernel discovery, clustering, call-chain
// reconstruction, and node-level correlation. Everything here is pure and
// deterministic: clustering uses fixed initialization and scan orders, and
// statistics use population (1/N) standard deviation.
//
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ingest.hpp"
#include "itermodel.hpp"
#include "store.hpp"

namespace perfslice::diagnostics {

// mean / max; 1.0 for an all-zero vector, empty input raises empty_input.
double balance_ratio(std::span<const double> values);

// 100 * population std / mean; zero mean raises undefined_cv.
double cv_percent(std::span<const double> values);

inline const std::vector<std::string>& default_gpu_metric_names() {
  static const std::vector<std::string> names = {"gker", "gxcopy", "gimopy"};
  return names;
}

// Metric ids from the candidate name list whose summed summary value is
// positive, ascending.
std::vector<uint16_t> detect_active_gpu_metrics(
    const ingest::slice_table& summary, const store::meta_data& meta,
    const std::vector<std::string>& candidate_names =
        default_gpu_metric_names());

struct metric_context {
  uint32_t ctx_id = 0;
  double value = 0.0;
  double share = 0.0;  // value / root total
};

// gpu_kernel contexts whose summed value over `metric_ids` exceeds
// min_share of the root total, sorted by descending share. A nonpositive
// root total raises degenerate_summary.
std::vector<metric_context> find_metric_contexts(
    const ingest::slice_table& summary, const store::meta_data& meta,
    const std::vector<uint16_t>& metric_ids, double min_share = 0.001);

struct cv_report {
  double across_rank_cv_pct = 0.0;  // mean over iterations of cross-trace CV
  double within_rank_cv_pct = 0.0;  // mean over traces of cross-iteration CV
};

// Uses inclusive times over the ordinal intersection of iterations; fewer
// than 2 traces or 2 iterations raises insufficient_data.
cv_report iteration_cv_report(const itermodel::tri_model& m, uint32_t ctx_id);

struct savings_row {
  uint32_t ctx_id = 0;
  double avg_mean_s = 0.0;
  double avg_max_s = 0.0;
  double savings_per_iter_s = 0.0;   // avg_max - avg_mean
  double total_reduction_s = 0.0;    // savings * n_iterations
};

struct savings_summary {
  std::vector<savings_row> rows;
  uint32_t n_iterations = 0;
  double total_savings_s = 0.0;
  double speedup_frac = 0.0;  // total_savings / total_time
};

savings_summary savings_report(const itermodel::tri_model& m,
                               const std::vector<uint32_t>& ctx_ids,
                               double total_time_s);

struct partition {
  std::vector<int32_t> labels;  // -1 = noise

  friend bool operator==(const partition&, const partition&) = default;
};

struct kmeans_result {
  partition part;
  std::vector<std::vector<double>> centroids;
  std::vector<double> objective_history;  // sum of squared distances per step
};

// Lloyd iterations with centroids seeded at evenly spaced quantiles of the
// first coordinate; empty clusters reseed at the farthest point. Converges
// when the largest centroid shift drops below 1e-12 (or after 300 rounds).
kmeans_result kmeans(const std::vector<std::vector<double>>& points,
                     uint32_t k);

// Classic density clustering; neighborhoods are closed balls of radius eps,
// scanned in point order. eps defaults to 5% of the first coordinate's
// range when unset; a nonpositive eps raises invalid_argument.
partition dbscan(const std::vector<std::vector<double>>& points,
                 std::optional<double> eps = std::nullopt,
                 uint32_t min_pts = 4);

struct partition_comparison {
  std::vector<int32_t> labels_a;  // row label values, ascending
  std::vector<int32_t> labels_b;  // column label values, ascending
  std::vector<std::vector<uint64_t>> matrix;
  uint64_t off_block = 0;  // points outside the best one-to-one matching
};

partition_comparison compare_partitions(const partition& a,
                                        const partition& b);

// Names from the root down to ctx.
std::vector<std::string> call_chain(const store::meta_data& meta,
                                    uint32_t ctx_id);

struct node_stat {
  std::string hostname;
  double mean_value = 0.0;
  uint32_t rank_count = 0;
};

// Groups per-rank values by hostname through the profile descriptors;
// output sorted by hostname. Unknown ranks raise not_found.
std::vector<node_stat> node_correlate(
    const std::vector<std::pair<int32_t, double>>& rank_values,
    const store::meta_data& meta);

}  // namespace perfslice::diagnostics
