#include "itermodel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "util.hpp"

namespace perfslice::itermodel {

namespace {

// contains[c] == true iff `anchor` is c or an ancestor of c.
std::vector<char> containment(const store::meta_data& cct, uint32_t anchor) {
  std::vector<char> contains(cct.contexts.size(), 0);
  for (std::size_t c = 0; c < cct.contexts.size(); ++c) {
    if (c == anchor)
      contains[c] = 1;
    else if (c > 0) {
      uint32_t parent = cct.contexts[c].parent;
      if (parent != store::k_no_parent) contains[c] = contains[parent];
    }
  }
  return contains;
}

double gap_cv(const std::vector<uint64_t>& entries) {
  // Population CV (fraction) of the inter-entry gaps.
  std::vector<double> gaps;
  gaps.reserve(entries.size() - 1);
  for (std::size_t i = 1; i < entries.size(); ++i)
    gaps.push_back(static_cast<double>(entries[i] - entries[i - 1]));
  double mean = 0.0;
  for (double g : gaps) mean += g;
  mean /= static_cast<double>(gaps.size());
  if (mean <= 0.0) return std::numeric_limits<double>::infinity();
  double var = 0.0;
  for (double g : gaps) var += (g - mean) * (g - mean);
  var /= static_cast<double>(gaps.size());
  return std::sqrt(var) / mean;
}

}  // namespace

uint32_t suggest_anchor(std::span<const store::trace_event> events,
                        uint64_t t_end_ns, const store::meta_data& cct,
                        uint32_t min_iters, double cv_max) {
  if (events.empty()) raise(errc::empty_input, "trace has no events");

  const std::size_t n_ctx = cct.contexts.size();
  std::vector<std::vector<uint64_t>> entries(n_ctx);
  std::vector<uint64_t> covered(n_ctx, 0);

  // Walk the step function once. Ancestor chains are strictly decreasing in
  // id, so chain set differences are two-pointer merges.
  std::vector<uint32_t> prev_chain;  // descending ids
  auto chain_of = [&](uint32_t leaf) {
    std::vector<uint32_t> chain;
    for (uint32_t c = leaf;; c = cct.contexts[c].parent) {
      chain.push_back(c);
      if (cct.contexts[c].parent == store::k_no_parent) break;
    }
    return chain;
  };

  for (std::size_t i = 0; i < events.size(); ++i) {
    if (events[i].ctx_id >= n_ctx)
      raise(errc::dangling_context,
            "trace event ctx " + std::to_string(events[i].ctx_id) +
                " not in tree");
    std::vector<uint32_t> chain = chain_of(events[i].ctx_id);

    // Entered contexts: in the new chain but not the previous one.
    std::size_t a = 0, b = 0;
    while (a < chain.size()) {
      if (b >= prev_chain.size() || chain[a] > prev_chain[b]) {
        entries[chain[a]].push_back(events[i].timestamp_ns);
        ++a;
      } else if (chain[a] == prev_chain[b]) {
        ++a;
        ++b;
      } else {
        ++b;
      }
    }

    uint64_t seg_end = i + 1 < events.size() ? events[i + 1].timestamp_ns
                                             : std::max(t_end_ns,
                                                        events[i].timestamp_ns);
    uint64_t dur = seg_end - events[i].timestamp_ns;
    if (dur > 0)
      for (uint32_t c : chain) covered[c] += dur;
    prev_chain = std::move(chain);
  }

  uint32_t best = store::k_no_parent;
  uint64_t best_covered = 0;
  for (uint32_t c = 0; c < n_ctx; ++c) {
    if (entries[c].size() < min_iters) continue;
    if (gap_cv(entries[c]) > cv_max) continue;
    if (best == store::k_no_parent || covered[c] > best_covered) {
      best = c;
      best_covered = covered[c];
    }
  }
  if (best == store::k_no_parent)
    raise(errc::no_periodicity, "no context shows periodic entries");
  return best;
}

std::vector<interval> detect_iterations(
    std::span<const store::trace_event> events, uint64_t t_end_ns,
    const store::meta_data& cct, uint32_t anchor) {
  if (anchor >= cct.contexts.size())
    raise(errc::not_found, "anchor ctx " + std::to_string(anchor) +
                               " not in tree");
  std::vector<char> contains = containment(cct, anchor);

  std::vector<uint64_t> boundaries;
  bool inside = false;
  for (const auto& e : events) {
    if (e.ctx_id >= cct.contexts.size())
      raise(errc::dangling_context,
            "trace event ctx " + std::to_string(e.ctx_id) + " not in tree");
    bool now = contains[e.ctx_id] != 0;
    if (now && !inside &&
        (boundaries.empty() || boundaries.back() < e.timestamp_ns))
      boundaries.push_back(e.timestamp_ns);
    inside = now;
  }
  if (boundaries.empty())
    raise(errc::no_iterations, "anchor never entered in trace");

  std::vector<interval> out;
  out.reserve(boundaries.size());
  for (std::size_t k = 0; k < boundaries.size(); ++k) {
    uint64_t t1 = k + 1 < boundaries.size() ? boundaries[k + 1] : t_end_ns;
    if (boundaries[k] < t1) out.push_back({boundaries[k], t1});
  }
  if (out.empty())
    raise(errc::no_iterations, "all detected iterations are empty");
  return out;
}

interval_profile rematerialize(std::span<const store::trace_event> events,
                               std::optional<store::trace_event> carry_in,
                               interval iv, const store::meta_data& cct) {
  if (iv.t0_ns >= iv.t1_ns)
    raise(errc::invalid_argument, "interval must have positive length");

  const std::size_t n_ctx = cct.contexts.size();
  std::vector<int64_t> incl(n_ctx, 0), excl(n_ctx, 0);

  auto add_segment = [&](uint32_t leaf, uint64_t s0, uint64_t s1) {
    uint64_t lo = std::max(s0, iv.t0_ns);
    uint64_t hi = std::min(s1, iv.t1_ns);
    if (lo >= hi) return;
    if (leaf >= n_ctx)
      raise(errc::dangling_context,
            "trace event ctx " + std::to_string(leaf) + " not in tree");
    int64_t dur = static_cast<int64_t>(hi - lo);
    excl[leaf] += dur;
    for (uint32_t c = leaf;; c = cct.contexts[c].parent) {
      incl[c] += dur;
      if (cct.contexts[c].parent == store::k_no_parent) break;
    }
  };

  if (carry_in) {
    uint64_t first = events.empty() ? iv.t1_ns : events.front().timestamp_ns;
    add_segment(carry_in->ctx_id, carry_in->timestamp_ns, first);
  }
  for (std::size_t i = 0; i < events.size(); ++i) {
    uint64_t s1 =
        i + 1 < events.size() ? events[i + 1].timestamp_ns : iv.t1_ns;
    add_segment(events[i].ctx_id, events[i].timestamp_ns, s1);
  }

  interval_profile out;
  for (uint32_t c = 0; c < n_ctx; ++c)
    if (incl[c] != 0 || excl[c] != 0) out.push_back({c, incl[c], excl[c]});
  return out;
}

std::size_t tri_model::n_rows() const {
  std::size_t rows = 0;
  for (uint32_t n : iter_counts) rows += static_cast<std::size_t>(n) * n_nodes();
  return rows;
}

uint32_t tri_model::min_iterations() const {
  if (iter_counts.empty()) return 0;
  return *std::min_element(iter_counts.begin(), iter_counts.end());
}

std::optional<std::size_t> tri_model::trace_pos(uint32_t trace_id) const {
  auto it = std::lower_bound(trace_ids.begin(), trace_ids.end(), trace_id);
  if (it == trace_ids.end() || *it != trace_id) return std::nullopt;
  return static_cast<std::size_t>(it - trace_ids.begin());
}

std::optional<std::size_t> tri_model::node_pos(uint32_t ctx_id) const {
  auto it = std::lower_bound(node_ids.begin(), node_ids.end(), ctx_id);
  if (it == node_ids.end() || *it != ctx_id) return std::nullopt;
  return static_cast<std::size_t>(it - node_ids.begin());
}

std::vector<uint32_t> tri_model::subtree_leaves(
    const store::meta_data& cct) const {
  std::vector<char> has_child(cct.contexts.size(), 0);
  for (const auto& n : cct.contexts)
    if (n.parent != store::k_no_parent) has_child[n.parent] = 1;
  std::vector<uint32_t> leaves;
  for (uint32_t c : node_ids)
    if (!has_child[c]) leaves.push_back(c);
  if (leaves.empty()) leaves.push_back(anchor_ctx);
  return leaves;
}

std::string tri_model::to_csv() const {
  std::string out = "ctx_id,trace_id,iteration,time_incl_s,time_excl_s\n";
  auto row = [&](uint32_t ctx, uint32_t trace, int64_t iter, int64_t incl,
                 int64_t excl) {
    out += std::to_string(ctx) + "," + std::to_string(trace) + "," +
           std::to_string(iter) + "," +
           util::format_double(static_cast<double>(incl) / 1e9) + "," +
           util::format_double(static_cast<double>(excl) / 1e9) + "\n";
  };
  for (std::size_t t = 0; t < n_traces(); ++t) {
    for (std::size_t n = 0; n < n_nodes(); ++n)
      row(node_ids[n], trace_ids[t], -1, gap_incl_ns[t * n_nodes() + n],
          gap_excl_ns[t * n_nodes() + n]);
    for (uint32_t k = 0; k < iter_counts[t]; ++k)
      for (std::size_t n = 0; n < n_nodes(); ++n) {
        std::size_t cell = cell_index(t, k, n);
        row(node_ids[n], trace_ids[t], k, incl_ns[cell], excl_ns[cell]);
      }
  }
  return out;
}

tri_model build_tri_model(const store::db_handle& h,
                          const std::vector<uint32_t>& profile_ids,
                          anchor_policy policy, unsigned jobs) {
  if (profile_ids.empty())
    raise(errc::invalid_argument, "no traces requested");
  std::vector<uint32_t> pids = profile_ids;
  std::sort(pids.begin(), pids.end());
  pids.erase(std::unique(pids.begin(), pids.end()), pids.end());
  const auto& cct = h.meta();

  tri_model model;
  if (policy.automatic) {
    auto [events, t_end] = h.read_trace_full(pids.front());
    model.anchor_ctx = suggest_anchor(events, t_end, cct);
  } else {
    if (policy.ctx >= cct.contexts.size())
      raise(errc::not_found,
            "anchor ctx " + std::to_string(policy.ctx) + " not in tree");
    model.anchor_ctx = policy.ctx;
  }

  std::vector<char> contains = containment(cct, model.anchor_ctx);
  for (uint32_t c = 0; c < cct.contexts.size(); ++c)
    if (contains[c]) model.node_ids.push_back(c);

  struct per_trace {
    bool skipped = false;
    uint32_t iters = 0;
    std::vector<int64_t> incl, excl;      // iteration-major cells
    std::vector<int64_t> gap_incl, gap_excl;
  };
  std::vector<per_trace> slots(pids.size());
  const std::size_t n_nodes = model.node_ids.size();

  util::parallel_for(pids.size(), jobs, [&](std::size_t i) {
    auto [events, t_end] = h.read_trace_full(pids[i]);
    per_trace& slot = slots[i];
    slot.gap_incl.assign(n_nodes, 0);
    slot.gap_excl.assign(n_nodes, 0);

    std::vector<interval> intervals;
    try {
      intervals = detect_iterations(events, t_end, cct, model.anchor_ctx);
    } catch (const error& e) {
      if (e.code() == errc::no_iterations || e.code() == errc::empty_input) {
        slot.skipped = true;
        return;
      }
      throw;
    }

    auto project = [&](const interval_profile& prof, std::vector<int64_t>& incl,
                       std::vector<int64_t>& excl, std::size_t base) {
      for (const auto& entry : prof) {
        auto pos = model.node_pos(entry.ctx_id);
        if (!pos) continue;  // outside the anchor subtree
        incl[base + *pos] += entry.incl_ns;
        excl[base + *pos] += entry.excl_ns;
      }
    };

    auto window = [&](interval iv) {
      auto begin = std::lower_bound(
          events.begin(), events.end(), iv.t0_ns,
          [](const store::trace_event& e, uint64_t t) {
            return e.timestamp_ns < t;
          });
      auto end = std::lower_bound(begin, events.end(), iv.t1_ns,
                                  [](const store::trace_event& e, uint64_t t) {
                                    return e.timestamp_ns < t;
                                  });
      std::optional<store::trace_event> carry;
      if (begin != events.begin()) carry = *(begin - 1);
      std::size_t lo = static_cast<std::size_t>(begin - events.begin());
      std::size_t hi = static_cast<std::size_t>(end - events.begin());
      return std::pair(
          std::span<const store::trace_event>(events.data() + lo, hi - lo),
          carry);
    };

    slot.iters = static_cast<uint32_t>(intervals.size());
    slot.incl.assign(intervals.size() * n_nodes, 0);
    slot.excl.assign(intervals.size() * n_nodes, 0);
    for (std::size_t k = 0; k < intervals.size(); ++k) {
      auto [span, carry] = window(intervals[k]);
      project(rematerialize(span, carry, intervals[k], cct), slot.incl,
              slot.excl, k * n_nodes);
    }

    // Pre-first-boundary gap, when the trace starts outside the anchor.
    if (!events.empty() &&
        events.front().timestamp_ns < intervals.front().t0_ns) {
      interval gap{events.front().timestamp_ns, intervals.front().t0_ns};
      auto [span, carry] = window(gap);
      project(rematerialize(span, carry, gap, cct), slot.gap_incl,
              slot.gap_excl, 0);
    }
  });

  for (std::size_t i = 0; i < pids.size(); ++i) {
    per_trace& slot = slots[i];
    if (slot.skipped) {
      model.skipped_traces.push_back(pids[i]);
      continue;
    }
    model.block_offset.push_back(model.incl_ns.size());
    model.trace_ids.push_back(pids[i]);
    model.iter_counts.push_back(slot.iters);
    model.incl_ns.insert(model.incl_ns.end(), slot.incl.begin(),
                         slot.incl.end());
    model.excl_ns.insert(model.excl_ns.end(), slot.excl.begin(),
                         slot.excl.end());
    model.gap_incl_ns.insert(model.gap_incl_ns.end(), slot.gap_incl.begin(),
                             slot.gap_incl.end());
    model.gap_excl_ns.insert(model.gap_excl_ns.end(), slot.gap_excl.begin(),
                             slot.gap_excl.end());
  }
  return model;
}

namespace {

frame::table make_slice(const std::vector<uint64_t>& c0, const char* n0,
                        const std::vector<uint64_t>& c1, const char* n1,
                        std::vector<double> incl, std::vector<double> excl) {
  frame::table t;
  t.add(frame::column::of_u64(n0, std::vector<uint64_t>(c0)));
  t.add(frame::column::of_u64(n1, std::vector<uint64_t>(c1)));
  t.add(frame::column::of_f64("time_incl_s", std::move(incl)));
  t.add(frame::column::of_f64("time_excl_s", std::move(excl)));
  return t;
}

}  // namespace

frame::table slice_fix_iteration(const tri_model& m, uint32_t k) {
  bool any = false;
  for (uint32_t n : m.iter_counts)
    if (k < n) any = true;
  if (!any) raise(errc::not_found, "iteration " + std::to_string(k) +
                                       " out of range");
  std::vector<uint64_t> ctx, trace;
  std::vector<double> incl, excl;
  for (std::size_t t = 0; t < m.n_traces(); ++t) {
    if (k >= m.iter_counts[t]) continue;
    for (std::size_t n = 0; n < m.n_nodes(); ++n) {
      ctx.push_back(m.node_ids[n]);
      trace.push_back(m.trace_ids[t]);
      incl.push_back(m.incl_s(t, k, n));
      excl.push_back(m.excl_s(t, k, n));
    }
  }
  return make_slice(ctx, "ctx_id", trace, "trace_id", std::move(incl),
                    std::move(excl));
}

frame::table slice_fix_trace(const tri_model& m, uint32_t trace_id) {
  auto tpos = m.trace_pos(trace_id);
  if (!tpos)
    raise(errc::not_found, "trace " + std::to_string(trace_id) +
                               " not in model");
  std::vector<uint64_t> ctx, iter;
  std::vector<double> incl, excl;
  for (uint32_t k = 0; k < m.iter_counts[*tpos]; ++k)
    for (std::size_t n = 0; n < m.n_nodes(); ++n) {
      ctx.push_back(m.node_ids[n]);
      iter.push_back(k);
      incl.push_back(m.incl_s(*tpos, k, n));
      excl.push_back(m.excl_s(*tpos, k, n));
    }
  return make_slice(ctx, "ctx_id", iter, "iteration", std::move(incl),
                    std::move(excl));
}

frame::table slice_fix_node(const tri_model& m, uint32_t ctx_id) {
  auto npos = m.node_pos(ctx_id);
  if (!npos)
    raise(errc::not_found, "ctx " + std::to_string(ctx_id) + " not in model");
  std::vector<uint64_t> trace, iter;
  std::vector<double> incl, excl;
  for (std::size_t t = 0; t < m.n_traces(); ++t)
    for (uint32_t k = 0; k < m.iter_counts[t]; ++k) {
      trace.push_back(m.trace_ids[t]);
      iter.push_back(k);
      incl.push_back(m.incl_s(t, k, *npos));
      excl.push_back(m.excl_s(t, k, *npos));
    }
  return make_slice(trace, "trace_id", iter, "iteration", std::move(incl),
                    std::move(excl));
}

}  // namespace perfslice::itermodel
