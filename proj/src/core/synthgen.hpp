//
// Synthetic database generators. Both scenario shapes carry full ground
// truth so end-to-end diagnostics can be checked against known answers:
//
//   * iterative: per-rank traces of an anchored loop running GPU kernels
//     whose per-(rank, iteration) durations are recorded exactly;
//   * congestion: a multi-rack allocation where ranks on designated outlier
//     nodes spend a multiplied amount of time in one MPI call site.
//
// All randomness comes from the shared xorshift64* stream seeded from the
// config, so identical configs produce byte-identical databases. Profile
// bodies are integrated from the same integer-nanosecond segments that the
// traces encode, which makes profile/trace self-consistency exact.
//
#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "store.hpp"

namespace perfslice::synthgen {

struct kernel_spec {
  std::string name;
  double mean_time_s = 0.0;
  // Per-rank multiplicative factors; empty means 1.0 for every rank.
  std::vector<double> across_rank_spread;
  double within_rank_jitter_frac = 0.0;
};

struct iter_scenario_config {
  uint32_t n_ranks = 1;
  uint32_t n_iterations = 1;
  std::vector<kernel_spec> kernels;
  std::string anchor_name = "iter_loop";
  // When positive, each iteration ends with a data-copy segment attributed
  // to a gpu_context node outside the anchor subtree (gives the database a
  // second GPU metric).
  double copy_segment_s = 0.0;
  std::string hostname = "x1000c0s0b0n0";
  uint64_t seed = 0;
};

struct congestion_callsite {
  std::string routine_name;                // leaf, e.g. "MPI_Allreduce"
  std::vector<std::string> call_chain;     // names between root and the leaf
  double base_time_s = 0.0;
};

struct congestion_scenario_config {
  uint32_t n_nodes = 1;
  uint32_t ranks_per_node = 1;
  uint32_t rack_id_base = 4000;
  uint32_t chassis_per_rack = 4;
  uint32_t slots_per_chassis = 8;
  uint32_t outlier_node_count = 0;
  std::vector<uint32_t> outlier_racks;     // rack ids that receive outliers
  std::vector<congestion_callsite> callsites;
  uint32_t congested_callsite = 0;         // index into callsites
  double congestion_multiplier = 1.0;
  double compute_time_s = 1.0;             // root-exclusive compute per rank
  double jitter_frac = 0.0;
  uint64_t seed = 0;
};

constexpr uint32_t k_no_ctx = 0xFFFFFFFFu;

struct iter_ground_truth {
  uint32_t anchor_ctx = 0;
  std::vector<uint32_t> kernel_ctx;
  uint32_t copy_ctx = k_no_ctx;
  // kernel_time_ns[kernel][rank][iteration]
  std::vector<std::vector<std::vector<uint64_t>>> kernel_time_ns;
  // Iteration start timestamps per rank (anchor entries).
  std::vector<std::vector<uint64_t>> boundaries_ns;
  std::vector<uint64_t> trace_end_ns;
};

struct congestion_ground_truth {
  std::vector<std::string> node_hostnames;   // index = node
  std::vector<uint32_t> outlier_nodes;       // ascending node indices
  std::vector<std::string> outlier_hostnames;
  std::vector<uint32_t> outlier_rack_ids;    // distinct, ascending
  std::vector<uint32_t> callsite_ctx;        // leaf ctx per call site
  uint32_t congested_ctx = 0;
  double normal_mean_total_s = 0.0;          // pre-jitter expectations
  double outlier_mean_total_s = 0.0;
};

// Deterministic tree for property tests: `depth` levels, `fanout` children
// per internal node, names "<prefix><id>", kinds drawn from the seed.
std::vector<store::cct_node> generate_cct(uint32_t depth, uint32_t fanout,
                                          const std::string& name_prefix,
                                          uint64_t seed);

std::pair<store::database_image, iter_ground_truth> generate_iterative_scenario(
    const iter_scenario_config& cfg);

std::pair<store::database_image, congestion_ground_truth>
generate_congestion_scenario(const congestion_scenario_config& cfg);

// JSON front door used by the CLI: {"type": "iterative"|"congestion", ...}.
// Returns the image plus a ground-truth JSON document (the truth.json
// sidecar). Throws invalid_config on malformed or inconsistent input.
std::pair<store::database_image, nlohmann::json> generate_from_json(
    const nlohmann::json& config);

iter_scenario_config iter_config_from_json(const nlohmann::json& j);
congestion_scenario_config congestion_config_from_json(const nlohmann::json& j);
nlohmann::json truth_to_json(const iter_ground_truth& t);
nlohmann::json truth_to_json(const congestion_ground_truth& t);

}  // namespace perfslice::synthgen
