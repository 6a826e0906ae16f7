//
// Iteration-aware trace analysis: anchor suggestion, boundary detection,
// per-interval profile re-materialization, and the tri-dimensional
// (node x trace x iteration) model.
//
// A trace is a step function over leaf contexts: event i's context is
// active on [t_i, t_{i+1}) and the call path is recovered through parent
// links. The anchor is "contained" whenever it is the active leaf or one of
// its ancestors; iteration boundaries are exactly the timestamps where
// containment turns on.
//
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "frame.hpp"
#include "store.hpp"

namespace perfslice::itermodel {

struct interval {
  uint64_t t0_ns = 0;
  uint64_t t1_ns = 0;

  uint64_t length_ns() const { return t1_ns - t0_ns; }
  friend bool operator==(const interval&, const interval&) = default;
};

struct profile_entry {
  uint32_t ctx_id = 0;
  int64_t incl_ns = 0;
  int64_t excl_ns = 0;

  friend bool operator==(const profile_entry&, const profile_entry&) = default;
};

// Sparse per-interval profile: touched contexts only, ascending ctx id.
// inclusive >= exclusive per node; root inclusive equals the covered time.
using interval_profile = std::vector<profile_entry>;

// Among contexts entered at least min_iters times whose inter-entry gap CV
// (population std over mean, as a fraction) is at most cv_max, returns the
// one covering the most time; ties go to the smallest ctx id.
uint32_t suggest_anchor(std::span<const store::trace_event> events,
                        uint64_t t_end_ns, const store::meta_data& cct,
                        uint32_t min_iters = 3, double cv_max = 0.2);

// Boundary at every transition into anchor containment; iteration k spans
// [boundary_k, boundary_{k+1}), the last one ends at t_end.
std::vector<interval> detect_iterations(
    std::span<const store::trace_event> events, uint64_t t_end_ns,
    const store::meta_data& cct, uint32_t anchor);

// Integrates trace segments clipped to the interval: each segment adds its
// clipped duration to the leaf's exclusive time and to the inclusive time of
// the leaf and every ancestor. carry_in supplies the context active at the
// interval start.
interval_profile rematerialize(std::span<const store::trace_event> events,
                               std::optional<store::trace_event> carry_in,
                               interval iv, const store::meta_data& cct);

struct anchor_policy {
  bool automatic = true;
  uint32_t ctx = 0;

  static anchor_policy auto_detect() { return {true, 0}; }
  static anchor_policy explicit_ctx(uint32_t c) { return {false, c}; }
};

// Tri-dimensional model over the anchor's subtree. Cells are dense per
// trace: iteration-major, node-minor. The pre-first-boundary gap profile is
// kept per trace and exported as iteration -1, but excluded from row counts
// and statistics.
struct tri_model {
  uint32_t anchor_ctx = 0;
  std::vector<uint32_t> node_ids;    // anchor subtree, ascending
  std::vector<uint32_t> trace_ids;   // traces with >= 1 iteration, ascending
  std::vector<uint32_t> iter_counts; // per trace
  std::vector<uint32_t> skipped_traces;  // no periodic anchor entry

  std::vector<int64_t> incl_ns;      // cells, see cell_index()
  std::vector<int64_t> excl_ns;
  std::vector<int64_t> gap_incl_ns;  // trace-major, node-minor
  std::vector<int64_t> gap_excl_ns;
  std::vector<std::size_t> block_offset;  // per trace

  std::size_t n_nodes() const { return node_ids.size(); }
  std::size_t n_traces() const { return trace_ids.size(); }
  std::size_t n_rows() const;            // gap rows not counted
  uint32_t min_iterations() const;       // ordinal intersection
  std::optional<std::size_t> trace_pos(uint32_t trace_id) const;
  std::optional<std::size_t> node_pos(uint32_t ctx_id) const;
  std::size_t cell_index(std::size_t tpos, uint32_t iter,
                         std::size_t npos) const {
    return block_offset[tpos] + static_cast<std::size_t>(iter) * n_nodes() +
           npos;
  }
  double incl_s(std::size_t tpos, uint32_t iter, std::size_t npos) const {
    return static_cast<double>(incl_ns[cell_index(tpos, iter, npos)]) / 1e9;
  }
  double excl_s(std::size_t tpos, uint32_t iter, std::size_t npos) const {
    return static_cast<double>(excl_ns[cell_index(tpos, iter, npos)]) / 1e9;
  }

  // Leaves of the anchor subtree (the anchor itself when it has no
  // children); these are the per-kernel rows diagnostics report on.
  std::vector<uint32_t> subtree_leaves(const store::meta_data& cct) const;

  // Columns: ctx_id, trace_id, iteration, time_incl_s, time_excl_s.
  // Gap profiles appear as iteration -1.
  std::string to_csv() const;
};

tri_model build_tri_model(const store::db_handle& h,
                          const std::vector<uint32_t>& profile_ids,
                          anchor_policy policy, unsigned jobs);

// Two-dimensional slices as frame tables; iteration/trace/node out of range
// raises not_found.
frame::table slice_fix_iteration(const tri_model& m, uint32_t k);
frame::table slice_fix_trace(const tri_model& m, uint32_t trace_id);
frame::table slice_fix_node(const tri_model& m, uint32_t ctx_id);

}  // namespace perfslice::itermodel
