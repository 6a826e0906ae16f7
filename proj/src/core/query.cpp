#include "query.hpp"

#include <algorithm>
#include <charconv>
#include <map>

#include "util.hpp"

namespace perfslice::query {

namespace {

[[noreturn]] void parse_fail(std::size_t offset, const std::string& what) {
  raise(errc::parse_error,
        "parse error at byte " + std::to_string(offset) + ": " + what);
}

struct text_cursor {
  const std::string& s;
  std::size_t pos = 0;

  bool done() const { return pos >= s.size(); }
  char peek() const { return pos < s.size() ? s[pos] : '\0'; }
  bool try_consume(char c) {
    if (peek() != c) return false;
    ++pos;
    return true;
  }
  void expect(char c, const char* what) {
    if (!try_consume(c)) parse_fail(pos, std::string("expected ") + what);
  }
  bool try_consume(std::string_view lit) {
    if (s.compare(pos, lit.size(), lit) != 0) return false;
    pos += lit.size();
    return true;
  }
  int64_t integer() {
    std::size_t start = pos;
    int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data() + pos, s.data() + s.size(), v);
    if (ec != std::errc() || p == s.data() + pos)
      parse_fail(start, "expected integer");
    pos = static_cast<std::size_t>(p - s.data());
    return v;
  }
  void expect_end() {
    if (!done()) parse_fail(pos, "trailing characters");
  }
};

}  // namespace

exec_selector parse_exec(const std::string& text) {
  exec_selector sel;
  text_cursor c{text};
  if (c.try_consume("summary")) {
    c.expect_end();
    sel.k = exec_selector::kind::summary;
    return sel;
  }
  if (!c.try_consume("rank")) parse_fail(0, "expected 'summary' or 'rank'");
  if (c.done()) {
    sel.k = exec_selector::kind::all_ranks;
    return sel;
  }
  c.expect('(', "'('");
  int64_t first = c.integer();
  if (c.try_consume('-')) {
    std::size_t hi_at = c.pos;
    int64_t hi = c.integer();
    if (hi < first) parse_fail(hi_at, "range upper bound below lower bound");
    int64_t stride = 1;
    if (c.try_consume(':')) {
      std::size_t stride_at = c.pos;
      stride = c.integer();
      if (stride < 1) parse_fail(stride_at, "stride must be >= 1");
    }
    c.expect(')', "')'");
    c.expect_end();
    sel.k = exec_selector::kind::rank_range;
    sel.lo = first;
    sel.hi = hi;
    sel.stride = stride;
    return sel;
  }
  sel.k = exec_selector::kind::rank_list;
  sel.ranks.push_back(first);
  while (c.try_consume(',')) sel.ranks.push_back(c.integer());
  c.expect(')', "')'");
  c.expect_end();
  return sel;
}

namespace {

std::string take_glob(text_cursor& c, std::string_view terminators) {
  std::size_t start = c.pos;
  std::string g;
  while (!c.done() && terminators.find(c.peek()) == std::string_view::npos) {
    // Path separators are two characters; stop before "->".
    if (terminators.find('>') != std::string_view::npos && c.peek() == '-' &&
        c.pos + 1 < c.s.size() && c.s[c.pos + 1] == '>')
      break;
    g.push_back(c.s[c.pos++]);
  }
  if (g.empty()) parse_fail(start, "expected glob pattern");
  return g;
}

}  // namespace

ctx_selector parse_ctx(const std::string& text) {
  ctx_selector sel;
  text_cursor c{text};
  if (c.try_consume('*')) {
    c.expect_end();
    sel.k = ctx_selector::kind::all;
    return sel;
  }
  if (c.try_consume("function(")) {
    sel.k = ctx_selector::kind::function_glob;
    sel.glob = take_glob(c, ")");
    c.expect(')', "')'");
    c.expect_end();
    return sel;
  }
  if (c.try_consume("path(")) {
    sel.k = ctx_selector::kind::path;
    sel.path.push_back(take_glob(c, ")>"));
    while (c.try_consume("->")) sel.path.push_back(take_glob(c, ")>"));
    c.expect(')', "')'");
    c.expect_end();
    return sel;
  }
  parse_fail(0, "expected '*', 'function(...)' or 'path(...)'");
}

metric_selector parse_metric(const std::string& text) {
  metric_selector sel;
  text_cursor c{text};
  std::size_t start = c.pos;
  while (!c.done() && c.peek() != ':') sel.name.push_back(c.s[c.pos++]);
  if (sel.name.empty()) parse_fail(start, "expected metric name");
  c.expect(':', "':'");
  if (c.try_consume("sum"))
    sel.variant = metric_variant::sum;
  else if (c.try_consume("prop"))
    sel.variant = metric_variant::prop;
  else
    parse_fail(c.pos, "expected 'sum' or 'prop'");
  if (!c.try_consume(" (")) parse_fail(c.pos, "expected ' ('");
  if (c.try_consume('i'))
    sel.scope = store::metric_scope::inclusive;
  else if (c.try_consume('e'))
    sel.scope = store::metric_scope::exclusive;
  else
    parse_fail(c.pos, "expected scope 'i' or 'e'");
  c.expect(')', "')'");
  c.expect_end();
  return sel;
}

query_spec parse_query(const std::string& exec, const std::string& ctx,
                       const std::string& metric,
                       std::optional<std::pair<uint64_t, uint64_t>> window) {
  query_spec q;
  q.exec = parse_exec(exec);
  q.ctx = parse_ctx(ctx);
  q.metric = parse_metric(metric);
  if (window && window->first > window->second)
    raise(errc::invalid_argument, "time window start after end");
  q.time_window = window;
  return q;
}

std::string render(const exec_selector& sel) {
  switch (sel.k) {
    case exec_selector::kind::summary: return "summary";
    case exec_selector::kind::all_ranks: return "rank";
    case exec_selector::kind::rank_range: {
      std::string s = "rank(" + std::to_string(sel.lo) + "-" +
                      std::to_string(sel.hi);
      if (sel.stride != 1) s += ":" + std::to_string(sel.stride);
      return s + ")";
    }
    case exec_selector::kind::rank_list: {
      std::string s = "rank(";
      for (std::size_t i = 0; i < sel.ranks.size(); ++i) {
        if (i) s.push_back(',');
        s += std::to_string(sel.ranks[i]);
      }
      return s + ")";
    }
  }
  return "";
}

std::string render(const ctx_selector& sel) {
  switch (sel.k) {
    case ctx_selector::kind::all: return "*";
    case ctx_selector::kind::function_glob:
      return "function(" + sel.glob + ")";
    case ctx_selector::kind::path: {
      std::string s = "path(";
      for (std::size_t i = 0; i < sel.path.size(); ++i) {
        if (i) s += "->";
        s += sel.path[i];
      }
      return s + ")";
    }
  }
  return "";
}

std::string render(const metric_selector& sel) {
  return sel.name +
         (sel.variant == metric_variant::sum ? ":sum (" : ":prop (") +
         (sel.scope == store::metric_scope::inclusive ? "i)" : "e)");
}

namespace {

// Root-to-node name sequence must contain the glob list as a subsequence of
// ancestors ending at the node itself; a greedy upward walk decides that.
bool path_matches(const store::meta_data& meta, uint32_t ctx,
                  const std::vector<std::string>& globs) {
  if (globs.empty()) return false;
  if (!util::glob_match(globs.back(), meta.contexts[ctx].name)) return false;
  std::size_t gi = globs.size() - 1;
  uint32_t cur = meta.contexts[ctx].parent;
  while (gi > 0 && cur != store::k_no_parent) {
    if (util::glob_match(globs[gi - 1], meta.contexts[cur].name)) --gi;
    cur = meta.contexts[cur].parent;
  }
  return gi == 0;
}

}  // namespace

index_plan resolve_query(const query_spec& q, const store::meta_data& meta,
                         const ingest::keep_set& keep) {
  index_plan plan;
  plan.variant = q.metric.variant;

  switch (q.exec.k) {
    case exec_selector::kind::summary:
      if (meta.find_profile(store::k_summary_profile) != nullptr)
        plan.profile_ids.push_back(store::k_summary_profile);
      break;
    case exec_selector::kind::all_ranks:
      for (const auto& p : meta.profiles)
        if (p.rank >= 0) plan.profile_ids.push_back(p.id);
      break;
    case exec_selector::kind::rank_range:
      for (const auto& p : meta.profiles) {
        if (p.rank < q.exec.lo || p.rank > q.exec.hi) continue;
        if ((p.rank - q.exec.lo) % q.exec.stride != 0) continue;
        plan.profile_ids.push_back(p.id);
      }
      break;
    case exec_selector::kind::rank_list:
      for (const auto& p : meta.profiles)
        if (std::find(q.exec.ranks.begin(), q.exec.ranks.end(), p.rank) !=
            q.exec.ranks.end())
          plan.profile_ids.push_back(p.id);
      break;
  }

  switch (q.ctx.k) {
    case ctx_selector::kind::all:
      plan.ctx_ids = keep.ids;
      break;
    case ctx_selector::kind::function_glob:
      for (uint32_t c : keep.ids)
        if (util::glob_match(q.ctx.glob, meta.contexts[c].name))
          plan.ctx_ids.push_back(c);
      break;
    case ctx_selector::kind::path:
      for (uint32_t c : keep.ids)
        if (path_matches(meta, c, q.ctx.path)) plan.ctx_ids.push_back(c);
      break;
  }

  auto metric = meta.find_metric(q.metric.name, q.metric.scope);
  if (!metric)
    raise(errc::no_such_metric,
          "no metric named " + q.metric.name +
              (q.metric.scope == store::metric_scope::inclusive ? " (i)"
                                                                : " (e)"));
  plan.metric_ids.push_back(*metric);
  return plan;
}

namespace {

// Packed (profile, ctx, metric) cache key; widths bound the supported
// database shape and are checked at insertion.
uint64_t pack_key(uint32_t p, uint32_t c, uint16_t m) {
  if (p >= (1u << 24) || c >= (1u << 24))
    raise(errc::internal, "id exceeds cache key width");
  return (static_cast<uint64_t>(p) << 40) | (static_cast<uint64_t>(c) << 16) |
         m;
}

}  // namespace

session::session(const store::db_handle& h,
                 const std::vector<ingest::prune_strategy>& strategies,
                 unsigned jobs)
    : db_(&h), keep_(ingest::compute_keep_set(h, strategies)),
      jobs_(jobs == 0 ? util::default_jobs() : jobs) {}

ingest::slice_table session::fetch(const query_spec& q) {
  return fetch_plan(resolve_query(q, meta(), keep_));
}

ingest::slice_table session::fetch_plan(const index_plan& plan) {
  std::lock_guard<std::mutex> lock(mutex_);

  // Missing keys, grouped per profile by identical missing-metric sets so
  // each read covers exactly the absent (ctx, metric) pairs.
  std::vector<ingest::slice_request> requests;
  for (uint32_t p : plan.profile_ids) {
    std::map<std::vector<uint16_t>, std::vector<uint32_t>> groups;
    for (uint32_t c : plan.ctx_ids) {
      std::vector<uint16_t> missing;
      for (uint16_t m : plan.metric_ids)
        if (resident_.find(pack_key(p, c, m)) == resident_.end())
          missing.push_back(m);
      if (!missing.empty()) groups[std::move(missing)].push_back(c);
    }
    for (auto& [metrics, ctxs] : groups)
      requests.push_back({p, store::id_filter::of(std::move(ctxs)),
                          store::metric_filter::of(metrics)});
  }

  if (!requests.empty()) {
    ingest::slice_table fresh = ingest::read_slices(*db_, requests, jobs_);
    for (const auto& r : requests)
      for (uint32_t c : r.ctxs.ids)
        for (uint16_t m : r.metrics.ids)
          resident_.insert(pack_key(r.profile_id, c, m));

    // Several metric groups per profile interleave ctx ranges; restore the
    // global (p, c, m) order before merging.
    auto fresh_key = [&](std::size_t k) {
      return std::tuple(fresh.profile_id[k], fresh.ctx_id[k],
                        fresh.metric_id[k]);
    };
    bool sorted = true;
    for (std::size_t k = 1; k < fresh.size() && sorted; ++k)
      sorted = fresh_key(k - 1) < fresh_key(k);
    if (!sorted) {
      std::vector<std::size_t> perm(fresh.size());
      for (std::size_t k = 0; k < perm.size(); ++k) perm[k] = k;
      std::sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
        return fresh_key(a) < fresh_key(b);
      });
      ingest::slice_table sorted_fresh;
      for (std::size_t k : perm)
        sorted_fresh.append(fresh.profile_id[k], fresh.ctx_id[k],
                            fresh.metric_id[k], fresh.value[k]);
      fresh = std::move(sorted_fresh);
    }

    // Merge the sorted new rows into the sorted cache.
    ingest::slice_table merged;
    std::size_t i = 0, j = 0;
    auto key_at = [](const ingest::slice_table& t, std::size_t k) {
      return std::tuple(t.profile_id[k], t.ctx_id[k], t.metric_id[k]);
    };
    merged.profile_id.reserve(cache_.size() + fresh.size());
    while (i < cache_.size() || j < fresh.size()) {
      bool take_cache = j >= fresh.size() ||
                        (i < cache_.size() && key_at(cache_, i) < key_at(fresh, j));
      const ingest::slice_table& src = take_cache ? cache_ : fresh;
      std::size_t k = take_cache ? i++ : j++;
      merged.append(src.profile_id[k], src.ctx_id[k], src.metric_id[k],
                    src.value[k]);
    }
    cache_ = std::move(merged);
  }

  // Project the plan out of the cache.
  ingest::slice_table out;
  for (uint32_t p : plan.profile_ids) {
    // Rows for profile p form one contiguous cache range.
    auto lo = std::lower_bound(cache_.profile_id.begin(),
                               cache_.profile_id.end(), p);
    auto hi = std::upper_bound(lo, cache_.profile_id.end(), p);
    for (std::size_t k = static_cast<std::size_t>(lo - cache_.profile_id.begin());
         k < static_cast<std::size_t>(hi - cache_.profile_id.begin()); ++k) {
      if (!std::binary_search(plan.ctx_ids.begin(), plan.ctx_ids.end(),
                              cache_.ctx_id[k]))
        continue;
      if (std::find(plan.metric_ids.begin(), plan.metric_ids.end(),
                    cache_.metric_id[k]) == plan.metric_ids.end())
        continue;
      out.append(cache_.profile_id[k], cache_.ctx_id[k], cache_.metric_id[k],
                 cache_.value[k]);
    }
  }
  return out;
}

frame::table session::to_frame(const query_spec& q) {
  ingest::slice_table rows = fetch(q);
  std::vector<uint64_t> profile(rows.size()), ctx(rows.size()),
      metric(rows.size());
  std::vector<int64_t> rank(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    profile[i] = rows.profile_id[i];
    ctx[i] = rows.ctx_id[i];
    metric[i] = rows.metric_id[i];
    const store::profile_desc* pd = meta().find_profile(rows.profile_id[i]);
    rank[i] = pd != nullptr ? pd->rank : -1;
  }
  frame::table t;
  t.add(frame::column::of_u64("profile_id", std::move(profile)));
  t.add(frame::column::of_i64("rank", std::move(rank)));
  t.add(frame::column::of_u64("ctx_id", std::move(ctx)));
  t.add(frame::column::of_u64("metric_id", std::move(metric)));
  t.add(frame::column::of_f64("value", rows.value));
  return t;
}

}  // namespace perfslice::query
