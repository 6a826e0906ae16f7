#include "frame.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "util.hpp"

namespace perfslice::frame {

namespace {

[[noreturn]] void no_column(std::string_view name) {
  raise(errc::no_such_column, "no such column: " + std::string(name));
}

// Total order per dtype. f64 places NaN above every number and equal to
// itself so comparisons stay a strict weak ordering.
int cmp_f64(double a, double b) {
  bool na = std::isnan(a), nb = std::isnan(b);
  if (na || nb) return na == nb ? 0 : (na ? 1 : -1);
  if (a < b) return -1;
  if (a > b) return 1;
  return 0;
}

template <typename T>
int cmp_plain(const T& a, const T& b) {
  if (a < b) return -1;
  if (b < a) return 1;
  return 0;
}

int compare_cells(const column& ca, std::size_t i, const column& cb,
                  std::size_t j) {
  switch (ca.type()) {
    case dtype::i64: return cmp_plain(ca.i64s()[i], cb.i64s()[j]);
    case dtype::u64: return cmp_plain(ca.u64s()[i], cb.u64s()[j]);
    case dtype::f64: return cmp_f64(ca.f64s()[i], cb.f64s()[j]);
    case dtype::str: return cmp_plain(ca.strs()[i], cb.strs()[j]);
  }
  return 0;
}

struct sort_key {
  const column* col;
  bool ascending;
};

std::vector<sort_key> resolve_keys(const table& t,
                                   const std::vector<std::string>& keys,
                                   const std::vector<bool>& ascending) {
  if (!ascending.empty() && ascending.size() != keys.size())
    raise(errc::invalid_argument, "ascending flags do not match key count");
  std::vector<sort_key> out;
  out.reserve(keys.size());
  for (std::size_t i = 0; i < keys.size(); ++i)
    out.push_back({&t.col(keys[i]), ascending.empty() || ascending[i]});
  return out;
}

bool row_less(const std::vector<sort_key>& keys, std::size_t i,
              std::size_t j) {
  for (const auto& k : keys) {
    int c = compare_cells(*k.col, i, *k.col, j);
    if (c != 0) return k.ascending ? c < 0 : c > 0;
  }
  return i < j;  // stability tie-break
}

bool rows_equal(const std::vector<sort_key>& keys, std::size_t i,
                std::size_t j) {
  for (const auto& k : keys)
    if (compare_cells(*k.col, i, *k.col, j) != 0) return false;
  return true;
}

// The comparator is a strict total order (original index breaks ties), so
// any correct sort yields the same unique permutation; the parallel path
// chunk-sorts and merges.
std::vector<std::size_t> argsort(std::size_t n,
                                 const std::vector<sort_key>& keys,
                                 backend b) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  auto less = [&](std::size_t i, std::size_t j) { return row_less(keys, i, j); };

  unsigned workers = b.mode == backend::kind::parallel ? b.workers : 1;
  if (workers <= 1 || n < 2 * k_reduce_block) {
    std::sort(perm.begin(), perm.end(), less);
    return perm;
  }

  std::size_t chunk = (n + workers - 1) / workers;
  std::vector<std::pair<std::size_t, std::size_t>> ranges;
  for (std::size_t begin = 0; begin < n; begin += chunk)
    ranges.emplace_back(begin, std::min(begin + chunk, n));
  util::parallel_for(ranges.size(), workers, [&](std::size_t r) {
    std::sort(perm.begin() + ranges[r].first, perm.begin() + ranges[r].second,
              less);
  });
  std::vector<std::size_t> buf(n);
  while (ranges.size() > 1) {
    std::vector<std::pair<std::size_t, std::size_t>> next;
    for (std::size_t r = 0; r + 1 < ranges.size(); r += 2) {
      auto [a0, a1] = ranges[r];
      auto [b0, b1] = ranges[r + 1];
      std::merge(perm.begin() + a0, perm.begin() + a1, perm.begin() + b0,
                 perm.begin() + b1, buf.begin() + a0, less);
      std::copy(buf.begin() + a0, buf.begin() + b1, perm.begin() + a0);
      next.emplace_back(a0, b1);
    }
    if (ranges.size() % 2 == 1) next.push_back(ranges.back());
    ranges = std::move(next);
  }
  return perm;
}

column gather(const column& c, const std::vector<std::size_t>& idx) {
  switch (c.type()) {
    case dtype::i64: {
      std::vector<int64_t> v;
      v.reserve(idx.size());
      for (auto i : idx) v.push_back(c.i64s()[i]);
      return column::of_i64(c.name(), std::move(v));
    }
    case dtype::u64: {
      std::vector<uint64_t> v;
      v.reserve(idx.size());
      for (auto i : idx) v.push_back(c.u64s()[i]);
      return column::of_u64(c.name(), std::move(v));
    }
    case dtype::f64: {
      std::vector<double> v;
      v.reserve(idx.size());
      for (auto i : idx) v.push_back(c.f64s()[i]);
      return column::of_f64(c.name(), std::move(v));
    }
    case dtype::str: {
      std::vector<std::string> v;
      v.reserve(idx.size());
      for (auto i : idx) v.push_back(c.strs()[i]);
      return column::of_str(c.name(), std::move(v));
    }
  }
  raise(errc::internal, "unreachable");
}

void require_numeric(const column& c) {
  if (c.type() == dtype::str)
    raise(errc::type_mismatch, "column " + c.name() + " is not numeric");
  if (c.type() == dtype::f64)
    for (double v : c.f64s())
      if (std::isnan(v))
        raise(errc::type_mismatch, "NaN in aggregate column " + c.name());
}

double cell_as_double(const column& c, std::size_t i) {
  switch (c.type()) {
    case dtype::i64: return static_cast<double>(c.i64s()[i]);
    case dtype::u64: return static_cast<double>(c.u64s()[i]);
    case dtype::f64: return c.f64s()[i];
    case dtype::str: break;
  }
  raise(errc::type_mismatch, "string cell in numeric context");
}

void require_f64(const column& c) {
  if (c.type() != dtype::f64)
    raise(errc::type_mismatch, "column " + c.name() + " must be f64");
}

bool cmp_holds(int c, cmp_op op) {
  switch (op) {
    case cmp_op::lt: return c < 0;
    case cmp_op::le: return c <= 0;
    case cmp_op::eq: return c == 0;
    case cmp_op::ge: return c >= 0;
    case cmp_op::gt: return c > 0;
    case cmp_op::ne: return c != 0;
  }
  return false;
}

}  // namespace

column column::of_i64(std::string name, std::vector<int64_t> v) {
  return column(std::move(name), storage(std::in_place_index<0>, std::move(v)));
}
column column::of_u64(std::string name, std::vector<uint64_t> v) {
  return column(std::move(name), storage(std::in_place_index<1>, std::move(v)));
}
column column::of_f64(std::string name, std::vector<double> v) {
  return column(std::move(name), storage(std::in_place_index<2>, std::move(v)));
}
column column::of_str(std::string name, std::vector<std::string> v) {
  return column(std::move(name), storage(std::in_place_index<3>, std::move(v)));
}

std::size_t column::size() const {
  return std::visit([](const auto& v) { return v.size(); }, data_);
}

const std::vector<int64_t>& column::i64s() const {
  if (type() != dtype::i64) raise(errc::type_mismatch, name_ + " is not i64");
  return std::get<0>(data_);
}
const std::vector<uint64_t>& column::u64s() const {
  if (type() != dtype::u64) raise(errc::type_mismatch, name_ + " is not u64");
  return std::get<1>(data_);
}
const std::vector<double>& column::f64s() const {
  if (type() != dtype::f64) raise(errc::type_mismatch, name_ + " is not f64");
  return std::get<2>(data_);
}
const std::vector<std::string>& column::strs() const {
  if (type() != dtype::str) raise(errc::type_mismatch, name_ + " is not str");
  return std::get<3>(data_);
}
std::vector<double>& column::f64s_mut() {
  if (type() != dtype::f64) raise(errc::type_mismatch, name_ + " is not f64");
  return std::get<2>(data_);
}

void table::add(column c) {
  if (!columns_.empty() && c.size() != n_rows())
    raise(errc::length_mismatch,
          "column " + c.name() + " length does not match table");
  if (find(c.name()) != nullptr)
    raise(errc::invalid_argument, "duplicate column name: " + c.name());
  columns_.push_back(std::move(c));
}

std::size_t table::n_rows() const {
  return columns_.empty() ? 0 : columns_.front().size();
}

const column& table::col(std::string_view name) const {
  const column* c = find(name);
  if (c == nullptr) no_column(name);
  return *c;
}

const column* table::find(std::string_view name) const {
  for (const auto& c : columns_)
    if (c.name() == name) return &c;
  return nullptr;
}

std::string table::to_csv() const {
  std::string out;
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (i) out.push_back(',');
    out += util::csv_field(columns_[i].name());
  }
  out.push_back('\n');
  const std::size_t rows = n_rows();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < columns_.size(); ++i) {
      if (i) out.push_back(',');
      const column& c = columns_[i];
      switch (c.type()) {
        case dtype::i64: out += std::to_string(c.i64s()[r]); break;
        case dtype::u64: out += std::to_string(c.u64s()[r]); break;
        case dtype::f64: out += util::format_double(c.f64s()[r]); break;
        case dtype::str: out += util::csv_field(c.strs()[r]); break;
      }
    }
    out.push_back('\n');
  }
  return out;
}

backend backend::par(unsigned workers) {
  if (workers < 1) raise(errc::invalid_argument, "worker count must be >= 1");
  return {kind::parallel, workers};
}

const char* agg_fn_name(agg_fn fn) {
  switch (fn) {
    case agg_fn::sum: return "sum";
    case agg_fn::mean: return "mean";
    case agg_fn::min: return "min";
    case agg_fn::max: return "max";
    case agg_fn::count: return "count";
  }
  return "?";
}

table group_aggregate(const table& t, const std::vector<std::string>& keys,
                      const std::vector<agg_spec>& aggs, backend b) {
  auto key_cols = resolve_keys(t, keys, {});
  std::vector<const column*> agg_cols;
  agg_cols.reserve(aggs.size());
  for (const auto& a : aggs) {
    const column& c = t.col(a.column);
    require_numeric(c);
    agg_cols.push_back(&c);
  }

  const std::size_t n = t.n_rows();
  std::vector<std::size_t> perm = argsort(n, key_cols, b);

  // Group run boundaries over the sorted permutation. Within a run the
  // permutation is in ascending original row index (stability), which fixes
  // the float accumulation order.
  std::vector<std::size_t> starts;
  for (std::size_t i = 0; i < n; ++i)
    if (i == 0 || !rows_equal(key_cols, perm[i - 1], perm[i]))
      starts.push_back(i);
  const std::size_t n_groups = starts.size();
  auto run = [&](std::size_t g) {
    return std::pair(starts[g], g + 1 < n_groups ? starts[g + 1] : n);
  };

  std::vector<std::size_t> heads(n_groups);
  for (std::size_t g = 0; g < n_groups; ++g) heads[g] = perm[starts[g]];

  table out;
  for (const auto& k : key_cols) out.add(gather(*k.col, heads));

  unsigned workers = b.mode == backend::kind::parallel ? b.workers : 1;
  for (std::size_t a = 0; a < aggs.size(); ++a) {
    const column& src = *agg_cols[a];
    const std::string out_name = aggs[a].column + "_" + agg_fn_name(aggs[a].fn);
    switch (aggs[a].fn) {
      case agg_fn::count: {
        std::vector<uint64_t> v(n_groups);
        util::parallel_for(n_groups, workers, [&](std::size_t g) {
          auto [lo, hi] = run(g);
          v[g] = hi - lo;
        });
        out.add(column::of_u64(out_name, std::move(v)));
        break;
      }
      case agg_fn::mean: {
        std::vector<double> v(n_groups);
        util::parallel_for(n_groups, workers, [&](std::size_t g) {
          auto [lo, hi] = run(g);
          double acc = 0.0;
          for (std::size_t i = lo; i < hi; ++i)
            acc += cell_as_double(src, perm[i]);
          v[g] = acc / static_cast<double>(hi - lo);
        });
        out.add(column::of_f64(out_name, std::move(v)));
        break;
      }
      case agg_fn::sum:
      case agg_fn::min:
      case agg_fn::max: {
        const bool is_sum = aggs[a].fn == agg_fn::sum;
        const bool is_min = aggs[a].fn == agg_fn::min;
        switch (src.type()) {
          case dtype::i64: {
            std::vector<int64_t> v(n_groups);
            util::parallel_for(n_groups, workers, [&](std::size_t g) {
              auto [lo, hi] = run(g);
              int64_t acc = src.i64s()[perm[lo]];
              for (std::size_t i = lo + 1; i < hi; ++i) {
                int64_t x = src.i64s()[perm[i]];
                if (is_sum)
                  acc = static_cast<int64_t>(static_cast<uint64_t>(acc) +
                                             static_cast<uint64_t>(x));
                else
                  acc = is_min ? std::min(acc, x) : std::max(acc, x);
              }
              v[g] = acc;
            });
            out.add(column::of_i64(out_name, std::move(v)));
            break;
          }
          case dtype::u64: {
            std::vector<uint64_t> v(n_groups);
            util::parallel_for(n_groups, workers, [&](std::size_t g) {
              auto [lo, hi] = run(g);
              uint64_t acc = src.u64s()[perm[lo]];
              for (std::size_t i = lo + 1; i < hi; ++i) {
                uint64_t x = src.u64s()[perm[i]];
                acc = is_sum ? acc + x : (is_min ? std::min(acc, x) : std::max(acc, x));
              }
              v[g] = acc;
            });
            out.add(column::of_u64(out_name, std::move(v)));
            break;
          }
          case dtype::f64: {
            std::vector<double> v(n_groups);
            util::parallel_for(n_groups, workers, [&](std::size_t g) {
              auto [lo, hi] = run(g);
              double acc = src.f64s()[perm[lo]];
              for (std::size_t i = lo + 1; i < hi; ++i) {
                double x = src.f64s()[perm[i]];
                acc = is_sum ? acc + x : (is_min ? std::min(acc, x) : std::max(acc, x));
              }
              v[g] = acc;
            });
            out.add(column::of_f64(out_name, std::move(v)));
            break;
          }
          case dtype::str:
            raise(errc::type_mismatch, "string aggregation unsupported");
        }
        break;
      }
    }
  }
  return out;
}

table sort(const table& t, const std::vector<std::string>& keys,
           const std::vector<bool>& ascending, backend b) {
  auto key_cols = resolve_keys(t, keys, ascending);
  std::vector<std::size_t> perm = argsort(t.n_rows(), key_cols, b);
  table out;
  unsigned workers = b.mode == backend::kind::parallel ? b.workers : 1;
  std::vector<column> cols(t.n_cols());
  util::parallel_for(t.n_cols(), workers, [&](std::size_t c) {
    cols[c] = gather(t.columns()[c], perm);
  });
  for (auto& c : cols) out.add(std::move(c));
  return out;
}

table filter(const table& t, const std::string& column_name, cmp_op op,
             const literal& lit, backend b) {
  const column& c = t.col(column_name);
  if (static_cast<std::size_t>(c.type()) != lit.index())
    raise(errc::type_mismatch,
          "literal type does not match column " + column_name);

  const std::size_t n = t.n_rows();
  auto pred = [&](std::size_t i) {
    switch (c.type()) {
      case dtype::i64:
        return cmp_holds(cmp_plain(c.i64s()[i], std::get<int64_t>(lit)), op);
      case dtype::u64:
        return cmp_holds(cmp_plain(c.u64s()[i], std::get<uint64_t>(lit)), op);
      case dtype::f64:
        return cmp_holds(cmp_f64(c.f64s()[i], std::get<double>(lit)), op);
      case dtype::str:
        return cmp_holds(cmp_plain(c.strs()[i], std::get<std::string>(lit)), op);
    }
    return false;
  };

  unsigned workers = b.mode == backend::kind::parallel ? b.workers : 1;
  std::vector<std::size_t> selected;
  if (workers <= 1 || n < 2 * k_reduce_block) {
    for (std::size_t i = 0; i < n; ++i)
      if (pred(i)) selected.push_back(i);
  } else {
    std::size_t chunk = (n + workers - 1) / workers;
    std::vector<std::vector<std::size_t>> parts((n + chunk - 1) / chunk);
    util::parallel_for(parts.size(), workers, [&](std::size_t p) {
      std::size_t lo = p * chunk, hi = std::min(lo + chunk, n);
      for (std::size_t i = lo; i < hi; ++i)
        if (pred(i)) parts[p].push_back(i);
    });
    for (auto& p : parts)
      selected.insert(selected.end(), p.begin(), p.end());
  }

  table out;
  std::vector<column> cols(t.n_cols());
  util::parallel_for(t.n_cols(), workers, [&](std::size_t ci) {
    cols[ci] = gather(t.columns()[ci], selected);
  });
  for (auto& cc : cols) out.add(std::move(cc));
  return out;
}

table merge(const table& left, const table& right,
            const std::vector<std::string>& on, backend b) {
  if (on.empty()) raise(errc::invalid_argument, "merge requires key columns");
  std::vector<const column*> lkeys, rkeys;
  for (const auto& k : on) {
    const column& lc = left.col(k);
    const column& rc = right.col(k);
    if (lc.type() != rc.type())
      raise(errc::type_mismatch, "key dtype mismatch on " + k);
    lkeys.push_back(&lc);
    rkeys.push_back(&rc);
  }

  // Sort right rows by key; runs of equal keys keep ascending row order.
  std::vector<sort_key> rsort;
  for (auto* c : rkeys) rsort.push_back({c, true});
  std::vector<std::size_t> rperm = argsort(right.n_rows(), rsort, b);
  std::vector<std::size_t> rstarts;
  for (std::size_t i = 0; i < rperm.size(); ++i)
    if (i == 0 || !rows_equal(rsort, rperm[i - 1], rperm[i]))
      rstarts.push_back(i);

  auto cmp_left_right = [&](std::size_t li, std::size_t ri) {
    for (std::size_t k = 0; k < lkeys.size(); ++k) {
      int c = compare_cells(*lkeys[k], li, *rkeys[k], ri);
      if (c != 0) return c;
    }
    return 0;
  };
  // Index of the right run matching left row li, or npos.
  auto find_run = [&](std::size_t li) -> std::size_t {
    std::size_t lo = 0, hi = rstarts.size();
    while (lo < hi) {
      std::size_t mid = lo + (hi - lo) / 2;
      if (cmp_left_right(li, rperm[rstarts[mid]]) > 0)
        lo = mid + 1;
      else
        hi = mid;
    }
    if (lo < rstarts.size() && cmp_left_right(li, rperm[rstarts[lo]]) == 0)
      return lo;
    return static_cast<std::size_t>(-1);
  };

  const std::size_t nl = left.n_rows();
  unsigned workers = b.mode == backend::kind::parallel ? b.workers : 1;
  std::vector<std::size_t> lidx, ridx;
  auto emit_range = [&](std::size_t lo, std::size_t hi,
                        std::vector<std::size_t>& lv,
                        std::vector<std::size_t>& rv) {
    for (std::size_t li = lo; li < hi; ++li) {
      std::size_t g = find_run(li);
      if (g == static_cast<std::size_t>(-1)) continue;
      std::size_t rhi = g + 1 < rstarts.size() ? rstarts[g + 1] : rperm.size();
      for (std::size_t i = rstarts[g]; i < rhi; ++i) {
        lv.push_back(li);
        rv.push_back(rperm[i]);
      }
    }
  };
  if (workers <= 1 || nl < 2 * k_reduce_block) {
    emit_range(0, nl, lidx, ridx);
  } else {
    std::size_t chunk = (nl + workers - 1) / workers;
    std::size_t parts = (nl + chunk - 1) / chunk;
    std::vector<std::vector<std::size_t>> lparts(parts), rparts(parts);
    util::parallel_for(parts, workers, [&](std::size_t p) {
      emit_range(p * chunk, std::min(p * chunk + chunk, nl), lparts[p],
                 rparts[p]);
    });
    for (std::size_t p = 0; p < parts; ++p) {
      lidx.insert(lidx.end(), lparts[p].begin(), lparts[p].end());
      ridx.insert(ridx.end(), rparts[p].begin(), rparts[p].end());
    }
  }

  std::vector<const column*> sources;
  std::vector<const std::vector<std::size_t>*> gathers;
  for (const auto& c : left.columns()) {
    sources.push_back(&c);
    gathers.push_back(&lidx);
  }
  for (const auto& c : right.columns()) {
    bool is_key = false;
    for (const auto& k : on)
      if (c.name() == k) is_key = true;
    if (is_key) continue;
    sources.push_back(&c);
    gathers.push_back(&ridx);
  }
  std::vector<column> cols(sources.size());
  util::parallel_for(sources.size(), workers, [&](std::size_t c) {
    cols[c] = gather(*sources[c], *gathers[c]);
  });
  table out;
  for (auto& c : cols) {
    if (out.find(c.name()) != nullptr) c.rename(c.name() + "_r");
    out.add(std::move(c));
  }
  return out;
}

column vector_add(const column& a, const column& b, backend be) {
  require_f64(a);
  require_f64(b);
  if (a.size() != b.size())
    raise(errc::length_mismatch, "vector_add length mismatch");
  std::vector<double> v(a.size());
  unsigned workers = be.mode == backend::kind::parallel ? be.workers : 1;
  util::parallel_for(a.size(), workers,
                     [&](std::size_t i) { v[i] = a.f64s()[i] + b.f64s()[i]; });
  return column::of_f64(a.name(), std::move(v));
}

column in_place_multiply(const column& a, double scalar, backend be) {
  require_f64(a);
  std::vector<double> v(a.size());
  unsigned workers = be.mode == backend::kind::parallel ? be.workers : 1;
  util::parallel_for(a.size(), workers,
                     [&](std::size_t i) { v[i] = a.f64s()[i] * scalar; });
  return column::of_f64(a.name(), std::move(v));
}

namespace {

// Fold-left block sums; both reduction and scan derive from these so their
// results agree bit-exactly.
std::vector<double> block_sums(const std::vector<double>& v, unsigned workers) {
  const std::size_t n_blocks = (v.size() + k_reduce_block - 1) / k_reduce_block;
  std::vector<double> sums(n_blocks, 0.0);
  util::parallel_for(n_blocks, workers, [&](std::size_t bl) {
    std::size_t lo = bl * k_reduce_block;
    std::size_t hi = std::min(lo + k_reduce_block, v.size());
    double acc = v[lo];
    for (std::size_t i = lo + 1; i < hi; ++i) acc += v[i];
    sums[bl] = acc;
  });
  return sums;
}

}  // namespace

double reduce_sum(const column& a, backend be) {
  require_f64(a);
  const auto& v = a.f64s();
  if (v.empty()) return 0.0;
  unsigned workers = be.mode == backend::kind::parallel ? be.workers : 1;
  std::vector<double> sums = block_sums(v, workers);
  double acc = sums[0];
  for (std::size_t b = 1; b < sums.size(); ++b) acc += sums[b];
  return acc;
}

column cumulative_sum(const column& a, backend be) {
  require_f64(a);
  const auto& v = a.f64s();
  std::vector<double> out(v.size());
  if (!v.empty()) {
    unsigned workers = be.mode == backend::kind::parallel ? be.workers : 1;
    std::vector<double> sums = block_sums(v, workers);
    std::vector<double> carry(sums.size(), 0.0);
    for (std::size_t b = 1; b < sums.size(); ++b)
      carry[b] = b == 1 ? sums[0] : carry[b - 1] + sums[b - 1];
    util::parallel_for(sums.size(), workers, [&](std::size_t bl) {
      std::size_t lo = bl * k_reduce_block;
      std::size_t hi = std::min(lo + k_reduce_block, v.size());
      double running = v[lo];
      out[lo] = bl == 0 ? running : carry[bl] + running;
      for (std::size_t i = lo + 1; i < hi; ++i) {
        running += v[i];
        out[i] = bl == 0 ? running : carry[bl] + running;
      }
    });
  }
  return column::of_f64(a.name(), std::move(out));
}

column scalar_compare(const column& a, cmp_op op, double s, backend be) {
  require_f64(a);
  std::vector<int64_t> v(a.size());
  unsigned workers = be.mode == backend::kind::parallel ? be.workers : 1;
  util::parallel_for(a.size(), workers, [&](std::size_t i) {
    v[i] = cmp_holds(cmp_f64(a.f64s()[i], s), op) ? 1 : 0;
  });
  return column::of_i64(a.name(), std::move(v));
}

}  // namespace perfslice::frame
