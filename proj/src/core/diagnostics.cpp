#include "diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace perfslice::diagnostics {

double balance_ratio(std::span<const double> values) {
  if (values.empty()) raise(errc::empty_input, "balance_ratio of empty vector");
  double max = values[0], sum = 0.0;
  for (double v : values) {
    max = std::max(max, v);
    sum += v;
  }
  if (max == 0.0) return 1.0;
  return sum / static_cast<double>(values.size()) / max;
}

double cv_percent(std::span<const double> values) {
  if (values.empty()) raise(errc::empty_input, "cv of empty vector");
  double sum = 0.0;
  for (double v : values) sum += v;
  double mean = sum / static_cast<double>(values.size());
  if (mean == 0.0) raise(errc::undefined_cv, "cv undefined for zero mean");
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(values.size());
  return 100.0 * std::sqrt(var) / mean;
}

std::vector<uint16_t> detect_active_gpu_metrics(
    const ingest::slice_table& summary, const store::meta_data& meta,
    const std::vector<std::string>& candidate_names) {
  std::set<uint16_t> candidates;
  for (const auto& m : meta.metrics)
    for (const auto& name : candidate_names)
      if (m.name == name) candidates.insert(static_cast<uint16_t>(m.id));

  std::map<uint16_t, double> totals;
  for (std::size_t i = 0; i < summary.size(); ++i)
    if (candidates.count(summary.metric_id[i]))
      totals[summary.metric_id[i]] += summary.value[i];

  std::vector<uint16_t> active;
  for (const auto& [id, total] : totals)
    if (total > 0.0) active.push_back(id);
  return active;
}

std::vector<metric_context> find_metric_contexts(
    const ingest::slice_table& summary, const store::meta_data& meta,
    const std::vector<uint16_t>& metric_ids, double min_share) {
  std::vector<double> value(meta.contexts.size(), 0.0);
  for (std::size_t i = 0; i < summary.size(); ++i)
    if (std::find(metric_ids.begin(), metric_ids.end(), summary.metric_id[i]) !=
        metric_ids.end())
      value[summary.ctx_id[i]] += summary.value[i];

  double total = value[meta.root_ctx()];
  if (total <= 0.0)
    raise(errc::degenerate_summary, "metric total at root is zero");

  std::vector<metric_context> out;
  for (uint32_t c = 0; c < meta.contexts.size(); ++c) {
    if (meta.contexts[c].kind != store::ctx_kind::gpu_kernel) continue;
    if (value[c] <= min_share * total) continue;
    out.push_back({c, value[c], value[c] / total});
  }
  std::sort(out.begin(), out.end(),
            [](const metric_context& a, const metric_context& b) {
              if (a.share != b.share) return a.share > b.share;
              return a.ctx_id < b.ctx_id;
            });
  return out;
}

namespace {

// Per-(trace, iteration) inclusive seconds for one node, over the ordinal
// intersection.
std::vector<std::vector<double>> node_matrix(const itermodel::tri_model& m,
                                             uint32_t ctx_id,
                                             uint32_t n_iters) {
  auto npos = m.node_pos(ctx_id);
  if (!npos)
    raise(errc::not_found, "ctx " + std::to_string(ctx_id) + " not in model");
  std::vector<std::vector<double>> values(m.n_traces());
  for (std::size_t t = 0; t < m.n_traces(); ++t) {
    values[t].reserve(n_iters);
    for (uint32_t k = 0; k < n_iters; ++k)
      values[t].push_back(m.incl_s(t, k, *npos));
  }
  return values;
}

}  // namespace

cv_report iteration_cv_report(const itermodel::tri_model& m, uint32_t ctx_id) {
  const uint32_t n_iters = m.min_iterations();
  if (m.n_traces() < 2 || n_iters < 2)
    raise(errc::insufficient_data,
          "cv report needs at least 2 traces and 2 iterations");
  auto values = node_matrix(m, ctx_id, n_iters);

  cv_report rep;
  std::vector<double> column(m.n_traces());
  for (uint32_t k = 0; k < n_iters; ++k) {
    for (std::size_t t = 0; t < m.n_traces(); ++t) column[t] = values[t][k];
    rep.across_rank_cv_pct += cv_percent(column);
  }
  rep.across_rank_cv_pct /= static_cast<double>(n_iters);

  for (std::size_t t = 0; t < m.n_traces(); ++t)
    rep.within_rank_cv_pct += cv_percent(values[t]);
  rep.within_rank_cv_pct /= static_cast<double>(m.n_traces());
  return rep;
}

savings_summary savings_report(const itermodel::tri_model& m,
                               const std::vector<uint32_t>& ctx_ids,
                               double total_time_s) {
  if (total_time_s <= 0.0)
    raise(errc::invalid_total, "total time must be positive");
  const uint32_t n_iters = m.min_iterations();
  if (n_iters < 1)
    raise(errc::insufficient_data, "model has no iterations");

  savings_summary out;
  out.n_iterations = n_iters;
  for (uint32_t ctx : ctx_ids) {
    auto values = node_matrix(m, ctx, n_iters);
    double avg_mean = 0.0, avg_max = 0.0;
    for (uint32_t k = 0; k < n_iters; ++k) {
      double sum = 0.0, max = values[0][k];
      for (std::size_t t = 0; t < m.n_traces(); ++t) {
        sum += values[t][k];
        max = std::max(max, values[t][k]);
      }
      avg_mean += sum / static_cast<double>(m.n_traces());
      avg_max += max;
    }
    avg_mean /= static_cast<double>(n_iters);
    avg_max /= static_cast<double>(n_iters);

    savings_row row;
    row.ctx_id = ctx;
    row.avg_mean_s = avg_mean;
    row.avg_max_s = avg_max;
    row.savings_per_iter_s = avg_max - avg_mean;
    row.total_reduction_s = row.savings_per_iter_s * n_iters;
    out.total_savings_s += row.total_reduction_s;
    out.rows.push_back(row);
  }
  out.speedup_frac = out.total_savings_s / total_time_s;
  return out;
}

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double diff = a[i] - b[i];
    d += diff * diff;
  }
  return d;
}

void check_points(const std::vector<std::vector<double>>& points) {
  if (points.empty()) raise(errc::empty_input, "no points to cluster");
  for (const auto& p : points)
    if (p.size() != points.front().size())
      raise(errc::length_mismatch, "points have mixed dimensionality");
}

}  // namespace

kmeans_result kmeans(const std::vector<std::vector<double>>& points,
                     uint32_t k) {
  check_points(points);
  const std::size_t n = points.size();
  if (k < 1 || k > n)
    raise(errc::invalid_k, "k must lie in [1, n]");

  // Seed at evenly spaced quantiles of the first coordinate.
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (points[a][0] != points[b][0]) return points[a][0] < points[b][0];
    return a < b;
  });
  kmeans_result res;
  for (uint32_t j = 0; j < k; ++j) {
    std::size_t pos = static_cast<std::size_t>(
        (static_cast<double>(j) + 0.5) * static_cast<double>(n) /
        static_cast<double>(k));
    res.centroids.push_back(points[order[std::min(pos, n - 1)]]);
  }

  res.part.labels.assign(n, 0);
  for (int iter = 0; iter < 300; ++iter) {
    // Assignment.
    double objective = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      int32_t best = 0;
      double best_d = sq_dist(points[i], res.centroids[0]);
      for (uint32_t j = 1; j < k; ++j) {
        double d = sq_dist(points[i], res.centroids[j]);
        if (d < best_d) {
          best_d = d;
          best = static_cast<int32_t>(j);
        }
      }
      res.part.labels[i] = best;
      objective += best_d;
    }
    // Lloyd steps never raise the objective; a rise means a broken update.
    if (!res.objective_history.empty() &&
        objective > res.objective_history.back() * (1.0 + 1e-12) + 1e-300)
      raise(errc::internal, "kmeans objective increased between steps");
    res.objective_history.push_back(objective);

    // Update.
    const std::size_t dim = points.front().size();
    std::vector<std::vector<double>> next(k, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto label = static_cast<std::size_t>(res.part.labels[i]);
      ++counts[label];
      for (std::size_t d = 0; d < dim; ++d) next[label][d] += points[i][d];
    }
    for (uint32_t j = 0; j < k; ++j) {
      if (counts[j] == 0) {
        // Reseed the empty cluster at the point farthest from its centroid.
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          double d = sq_dist(
              points[i],
              res.centroids[static_cast<std::size_t>(res.part.labels[i])]);
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        next[j] = points[far];
        counts[j] = 1;
      } else {
        for (std::size_t d = 0; d < dim; ++d)
          next[j][d] /= static_cast<double>(counts[j]);
      }
    }

    double shift = 0.0;
    for (uint32_t j = 0; j < k; ++j)
      shift = std::max(shift, std::sqrt(sq_dist(next[j], res.centroids[j])));
    res.centroids = std::move(next);
    if (shift < 1e-12) break;
  }
  return res;
}

partition dbscan(const std::vector<std::vector<double>>& points,
                 std::optional<double> eps_opt, uint32_t min_pts) {
  check_points(points);
  const std::size_t n = points.size();

  double eps;
  if (eps_opt) {
    eps = *eps_opt;
  } else {
    double lo = points[0][0], hi = points[0][0];
    for (const auto& p : points) {
      lo = std::min(lo, p[0]);
      hi = std::max(hi, p[0]);
    }
    eps = 0.05 * (hi - lo);
  }
  if (eps <= 0.0)
    raise(errc::invalid_argument, "dbscan radius must be positive");
  const double eps_sq = eps * eps;

  auto neighbors = [&](std::size_t i) {
    std::vector<std::size_t> out;
    for (std::size_t j = 0; j < n; ++j)
      if (sq_dist(points[i], points[j]) <= eps_sq) out.push_back(j);
    return out;
  };

  constexpr int32_t k_unvisited = -2;
  partition part;
  part.labels.assign(n, k_unvisited);
  int32_t next_cluster = 0;

  for (std::size_t i = 0; i < n; ++i) {
    if (part.labels[i] != k_unvisited) continue;
    auto seeds = neighbors(i);
    if (seeds.size() < min_pts) {
      part.labels[i] = -1;  // noise, possibly claimed later as a border point
      continue;
    }
    const int32_t cluster = next_cluster++;
    part.labels[i] = cluster;
    for (std::size_t qi = 0; qi < seeds.size(); ++qi) {
      std::size_t p = seeds[qi];
      if (part.labels[p] == -1) part.labels[p] = cluster;
      if (part.labels[p] != k_unvisited) continue;
      part.labels[p] = cluster;
      auto more = neighbors(p);
      if (more.size() >= min_pts)
        seeds.insert(seeds.end(), more.begin(), more.end());
    }
  }

  for (auto& l : part.labels)
    if (l == k_unvisited) l = -1;
  return part;
}

partition_comparison compare_partitions(const partition& a,
                                        const partition& b) {
  if (a.labels.size() != b.labels.size())
    raise(errc::length_mismatch, "partitions cover different point counts");

  partition_comparison cmp;
  std::set<int32_t> la(a.labels.begin(), a.labels.end());
  std::set<int32_t> lb(b.labels.begin(), b.labels.end());
  cmp.labels_a.assign(la.begin(), la.end());
  cmp.labels_b.assign(lb.begin(), lb.end());

  auto index_of = [](const std::vector<int32_t>& v, int32_t x) {
    return static_cast<std::size_t>(
        std::lower_bound(v.begin(), v.end(), x) - v.begin());
  };
  cmp.matrix.assign(cmp.labels_a.size(),
                    std::vector<uint64_t>(cmp.labels_b.size(), 0));
  for (std::size_t i = 0; i < a.labels.size(); ++i)
    ++cmp.matrix[index_of(cmp.labels_a, a.labels[i])]
                [index_of(cmp.labels_b, b.labels[i])];

  // Greedy by descending cell count: each b-label is matched once, to its
  // dominant a-label (a-labels may absorb several b-labels, so a refinement
  // of `a` scores zero). Everything outside the matched cells is off block.
  struct cell {
    uint64_t count;
    std::size_t i, j;
  };
  std::vector<cell> cells;
  for (std::size_t i = 0; i < cmp.matrix.size(); ++i)
    for (std::size_t j = 0; j < cmp.matrix[i].size(); ++j)
      if (cmp.matrix[i][j] > 0) cells.push_back({cmp.matrix[i][j], i, j});
  std::sort(cells.begin(), cells.end(), [](const cell& x, const cell& y) {
    if (x.count != y.count) return x.count > y.count;
    if (x.i != y.i) return x.i < y.i;
    return x.j < y.j;
  });
  std::vector<char> col_used(cmp.labels_b.size(), 0);
  uint64_t matched = 0;
  for (const auto& c : cells) {
    if (col_used[c.j]) continue;
    col_used[c.j] = 1;
    matched += c.count;
  }
  cmp.off_block = a.labels.size() - matched;
  return cmp;
}

std::vector<std::string> call_chain(const store::meta_data& meta,
                                    uint32_t ctx_id) {
  std::vector<std::string> names;
  for (uint32_t c : meta.ancestor_chain(ctx_id))
    names.push_back(meta.contexts[c].name);
  return names;
}

std::vector<node_stat> node_correlate(
    const std::vector<std::pair<int32_t, double>>& rank_values,
    const store::meta_data& meta) {
  std::map<int32_t, const std::string*> rank_host;
  for (const auto& p : meta.profiles)
    if (p.rank >= 0 && rank_host.find(p.rank) == rank_host.end())
      rank_host[p.rank] = &p.hostname;

  std::map<std::string, std::pair<double, uint32_t>> acc;  // sum, count
  for (const auto& [rank, value] : rank_values) {
    auto it = rank_host.find(rank);
    if (it == rank_host.end())
      raise(errc::not_found, "rank " + std::to_string(rank) +
                                 " has no profile descriptor");
    auto& slot = acc[*it->second];
    slot.first += value;
    slot.second += 1;
  }

  std::vector<node_stat> out;
  out.reserve(acc.size());
  for (const auto& [host, sum_count] : acc)
    out.push_back({host, sum_count.first / sum_count.second,
                   sum_count.second});
  return out;
}

}  // namespace perfslice::diagnostics
