#include "ingest.hpp"

#include <algorithm>

#include "util.hpp"

namespace perfslice::ingest {

prune_strategy prune_strategy::min_share(double threshold_frac) {
  // Thresholds above 1 are legal; only the root survives them.
  if (threshold_frac < 0.0)
    raise(errc::invalid_argument, "threshold_frac must be >= 0");
  prune_strategy s;
  s.kind = prune_kind::min_inclusive_share;
  s.threshold_frac = threshold_frac;
  return s;
}

prune_strategy prune_strategy::drop(store::ctx_kind k) {
  prune_strategy s;
  s.kind = prune_kind::drop_kind;
  s.kind_to_drop = k;
  return s;
}

prune_strategy prune_strategy::collapse(std::string glob) {
  if (glob.empty()) raise(errc::invalid_argument, "collapse glob is empty");
  prune_strategy s;
  s.kind = prune_kind::collapse_subtree_glob;
  s.name_glob = std::move(glob);
  return s;
}

bool keep_set::contains(uint32_t ctx) const {
  return std::binary_search(ids.begin(), ids.end(), ctx);
}

keep_set compute_keep_set(const store::db_handle& h,
                          const std::vector<prune_strategy>& strategies) {
  const auto& meta = h.meta();
  const std::size_t n_ctx = meta.contexts.size();
  std::vector<char> kept(n_ctx, 1);

  bool needs_summary = false;
  for (const auto& s : strategies)
    if (s.kind == prune_kind::min_inclusive_share) needs_summary = true;

  std::vector<double> incl;
  double root_time = 0.0;
  if (needs_summary) {
    auto metric = meta.find_metric("cputime", store::metric_scope::inclusive);
    if (!metric)
      raise(errc::no_such_metric,
            "no inclusive cputime metric to evaluate share pruning");
    if (h.find_profile_entry(store::k_summary_profile) == nullptr)
      raise(errc::no_summary, "database has no summary profile");
    incl.assign(n_ctx, 0.0);
    auto records = h.read_profile_records(store::k_summary_profile,
                                          store::id_filter::all_ids(),
                                          store::metric_filter::of({*metric}));
    for (const auto& r : records) incl[r.ctx_id] = r.value;
    root_time = incl[meta.root_ctx()];
    if (root_time <= 0.0)
      raise(errc::degenerate_summary, "summary root time is zero");
  }

  for (const auto& s : strategies) {
    switch (s.kind) {
      case prune_kind::min_inclusive_share: {
        if (s.threshold_frac < 0.0)
          raise(errc::invalid_argument, "threshold_frac must be >= 0");
        const double cut = s.threshold_frac * root_time;
        for (std::size_t c = 1; c < n_ctx; ++c)  // root is protected
          if (incl[c] < cut) kept[c] = 0;
        break;
      }
      case prune_kind::drop_kind:
        for (std::size_t c = 1; c < n_ctx; ++c)
          if (meta.contexts[c].kind == s.kind_to_drop) kept[c] = 0;
        break;
      case prune_kind::collapse_subtree_glob: {
        std::vector<char> under(n_ctx, 0);
        for (std::size_t c = 1; c < n_ctx; ++c) {
          uint32_t parent = meta.contexts[c].parent;
          under[c] = under[parent] ||
                     util::glob_match(s.name_glob, meta.contexts[parent].name);
          if (under[c]) kept[c] = 0;
        }
        break;
      }
    }
  }

  // Close under parents so the retained tree stays connected; ids are
  // topological, so a descending sweep settles ancestors.
  kept[meta.root_ctx()] = 1;
  for (std::size_t c = n_ctx; c-- > 1;)
    if (kept[c]) kept[meta.contexts[c].parent] = 1;

  keep_set out;
  for (std::size_t c = 0; c < n_ctx; ++c)
    if (kept[c]) out.ids.push_back(static_cast<uint32_t>(c));
  return out;
}

void slice_table::append(uint32_t p, uint32_t c, uint16_t m, double v) {
  profile_id.push_back(p);
  ctx_id.push_back(c);
  metric_id.push_back(m);
  value.push_back(v);
}

void slice_table::append_all(const slice_table& other) {
  profile_id.insert(profile_id.end(), other.profile_id.begin(),
                    other.profile_id.end());
  ctx_id.insert(ctx_id.end(), other.ctx_id.begin(), other.ctx_id.end());
  metric_id.insert(metric_id.end(), other.metric_id.begin(),
                   other.metric_id.end());
  value.insert(value.end(), other.value.begin(), other.value.end());
}

slice_table read_slices(const store::db_handle& h,
                        const std::vector<slice_request>& requests,
                        unsigned jobs) {
  std::vector<std::vector<store::profile_record>> slots(requests.size());
  util::parallel_for(requests.size(), jobs, [&](std::size_t i) {
    slots[i] = h.read_profile_records(requests[i].profile_id, requests[i].ctxs,
                                      requests[i].metrics);
  });

  // Offset-addressed assembly: each slot lands at a precomputed position, so
  // the result is identical for any worker count.
  std::vector<std::size_t> offsets(requests.size() + 1, 0);
  for (std::size_t i = 0; i < slots.size(); ++i)
    offsets[i + 1] = offsets[i] + slots[i].size();

  slice_table out;
  out.profile_id.resize(offsets.back());
  out.ctx_id.resize(offsets.back());
  out.metric_id.resize(offsets.back());
  out.value.resize(offsets.back());
  util::parallel_for(requests.size(), jobs, [&](std::size_t i) {
    std::size_t pos = offsets[i];
    for (const auto& r : slots[i]) {
      out.profile_id[pos] = requests[i].profile_id;
      out.ctx_id[pos] = r.ctx_id;
      out.metric_id[pos] = r.metric_id;
      out.value[pos] = r.value;
      ++pos;
    }
  });
  return out;
}

slice_table ingest_profiles(const store::db_handle& h,
                            std::vector<uint32_t> profile_ids,
                            const keep_set& keep,
                            const std::vector<uint16_t>& metric_ids,
                            unsigned jobs) {
  std::sort(profile_ids.begin(), profile_ids.end());
  profile_ids.erase(std::unique(profile_ids.begin(), profile_ids.end()),
                    profile_ids.end());

  // A keep set covering the whole tree degenerates to a sequential body scan.
  store::id_filter ctxs = keep.size() == h.meta().contexts.size()
                              ? store::id_filter::all_ids()
                              : store::id_filter::of(keep.ids);
  store::metric_filter metrics = metric_ids.empty()
                                     ? store::metric_filter::all_ids()
                                     : store::metric_filter::of(metric_ids);

  std::vector<slice_request> requests;
  requests.reserve(profile_ids.size());
  for (uint32_t pid : profile_ids) requests.push_back({pid, ctxs, metrics});
  return read_slices(h, requests, jobs);
}

trace_ingest_result ingest_traces(const store::db_handle& h,
                                  std::vector<uint32_t> profile_ids,
                                  uint64_t t0_ns, uint64_t t1_ns,
                                  unsigned jobs) {
  if (t0_ns > t1_ns)
    raise(errc::invalid_argument, "trace window start after end");
  std::sort(profile_ids.begin(), profile_ids.end());
  profile_ids.erase(std::unique(profile_ids.begin(), profile_ids.end()),
                    profile_ids.end());

  std::vector<store::db_handle::trace_window> slots(profile_ids.size());
  util::parallel_for(profile_ids.size(), jobs, [&](std::size_t i) {
    slots[i] = h.read_trace_window(profile_ids[i], t0_ns, t1_ns);
  });

  trace_ingest_result out;
  std::size_t total = 0;
  for (const auto& w : slots) total += w.events.size();
  out.events.profile_id.reserve(total);
  out.events.timestamp_ns.reserve(total);
  out.events.ctx_id.reserve(total);
  for (std::size_t i = 0; i < profile_ids.size(); ++i) {
    for (const auto& e : slots[i].events) {
      out.events.profile_id.push_back(profile_ids[i]);
      out.events.timestamp_ns.push_back(e.timestamp_ns);
      out.events.ctx_id.push_back(e.ctx_id);
    }
    out.carry_in[profile_ids[i]] = slots[i].carry_in;
  }
  return out;
}

}  // namespace perfslice::ingest
