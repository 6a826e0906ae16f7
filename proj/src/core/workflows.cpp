#include "workflows.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "diagnostics.hpp"
#include "synthgen.hpp"
#include "topology.hpp"
#include "util.hpp"

namespace perfslice::workflows {

namespace {

using nlohmann::json;

json table_to_json(const frame::table& t) {
  json rows = json::array();
  for (std::size_t r = 0; r < t.n_rows(); ++r) {
    json row;
    for (const auto& c : t.columns()) {
      switch (c.type()) {
        case frame::dtype::i64: row[c.name()] = c.i64s()[r]; break;
        case frame::dtype::u64: row[c.name()] = c.u64s()[r]; break;
        case frame::dtype::f64: row[c.name()] = c.f64s()[r]; break;
        case frame::dtype::str: row[c.name()] = c.strs()[r]; break;
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// Per-rank values for one ctx/metric with sparse zeros filled in, rank
// ascending. Returns (ranks, values).
std::pair<std::vector<int32_t>, std::vector<double>> rank_vector(
    const query::session& s, const ingest::slice_table& rows, uint32_t ctx) {
  std::map<uint32_t, double> by_profile;
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (rows.ctx_id[i] == ctx) by_profile[rows.profile_id[i]] = rows.value[i];

  std::vector<std::pair<int32_t, double>> rank_value;
  for (const auto& p : s.meta().profiles) {
    if (p.rank < 0) continue;
    auto it = by_profile.find(p.id);
    rank_value.emplace_back(p.rank, it == by_profile.end() ? 0.0 : it->second);
  }
  std::sort(rank_value.begin(), rank_value.end());
  std::vector<int32_t> ranks;
  std::vector<double> values;
  for (const auto& [r, v] : rank_value) {
    ranks.push_back(r);
    values.push_back(v);
  }
  return {std::move(ranks), std::move(values)};
}

}  // namespace

std::string generate_database(const std::string& config_json_text,
                              const std::filesystem::path& out_dir) {
  json config;
  try {
    config = json::parse(config_json_text);
  } catch (const json::exception& e) {
    raise(errc::invalid_config, std::string("config json: ") + e.what());
  }
  auto [image, truth] = synthgen::generate_from_json(config);
  store::write_database(image, out_dir);

  std::string truth_text = truth.dump(2);
  std::ofstream out(out_dir / "truth.json", std::ios::trunc);
  if (!out) raise(errc::io_error, "cannot write truth.json");
  out << truth_text << "\n";
  return truth_text;
}

std::string database_info(const store::db_handle& h, output_format f) {
  uint64_t records = 0, events = 0;
  for (const auto& e : h.profile_index()) records += e.record_count;
  for (const auto& e : h.trace_index()) events += e.event_count;

  if (f == output_format::json) {
    json j;
    j["path"] = h.path().string();
    j["metrics"] = h.meta().metrics.size();
    j["profiles"] = h.meta().profiles.size();
    j["contexts"] = h.meta().contexts.size();
    j["traces"] = h.trace_index().size();
    j["records"] = records;
    j["events"] = events;
    return j.dump(2);
  }
  std::string out = "field,value\n";
  out += "metrics," + std::to_string(h.meta().metrics.size()) + "\n";
  out += "profiles," + std::to_string(h.meta().profiles.size()) + "\n";
  out += "contexts," + std::to_string(h.meta().contexts.size()) + "\n";
  out += "traces," + std::to_string(h.trace_index().size()) + "\n";
  out += "records," + std::to_string(records) + "\n";
  out += "events," + std::to_string(events) + "\n";
  return out;
}

std::pair<std::string, uint64_t> validate(const store::db_handle& h,
                                          output_format f) {
  store::validation_report report = store::validate_database(h);
  if (f == output_format::json) {
    json j;
    j["violations"] = report.issues.size();
    j["issues"] = json::array();
    for (const auto& issue : report.issues)
      j["issues"].push_back(
          {{"location", issue.location}, {"message", issue.message}});
    return {j.dump(2), report.issues.size()};
  }
  std::string out = "location,message\n";
  for (const auto& issue : report.issues)
    out += util::csv_field(issue.location) + "," +
           util::csv_field(issue.message) + "\n";
  return {out, report.issues.size()};
}

std::unique_ptr<query::session> open_session(const store::db_handle& h,
                                             const session_options& opt) {
  std::vector<ingest::prune_strategy> strategies;
  if (opt.min_inclusive_share >= 0.0)
    strategies.push_back(
        ingest::prune_strategy::min_share(opt.min_inclusive_share));
  if (opt.drop_line_contexts)
    strategies.push_back(ingest::prune_strategy::drop(store::ctx_kind::line));
  for (const auto& glob : opt.collapse_globs)
    strategies.push_back(ingest::prune_strategy::collapse(glob));
  return std::make_unique<query::session>(h, strategies, opt.jobs);
}

std::string run_query(query::session& s, const std::string& exec,
                      const std::string& ctx, const std::string& metric,
                      output_format f) {
  query::query_spec q = query::parse_query(exec, ctx, metric);
  frame::table t = s.to_frame(q);
  if (f == output_format::json) return table_to_json(t).dump(2);
  return t.to_csv();
}

namespace {

struct imbalance_row {
  uint32_t ctx_id;
  std::string name;
  double share;
  double ratio;
  bool has_cv;
  double across_cv, within_cv;
};

}  // namespace

std::string imbalance_report(query::session& s, const std::string& metric_name,
                             double min_share, output_format f) {
  const auto& meta = s.meta();

  // Summary slices for every candidate GPU metric (cache-backed).
  ingest::slice_table summary;
  for (const auto& m : meta.metrics) {
    bool candidate = false;
    for (const auto& name : diagnostics::default_gpu_metric_names())
      if (m.name == name) candidate = true;
    if (!candidate) continue;
    query::index_plan plan;
    plan.profile_ids = {store::k_summary_profile};
    plan.ctx_ids = s.keep().ids;
    plan.metric_ids = {static_cast<uint16_t>(m.id)};
    summary.append_all(s.fetch_plan(plan));
  }
  std::vector<uint16_t> active =
      diagnostics::detect_active_gpu_metrics(summary, meta);

  auto metric_id = meta.find_metric(metric_name, store::metric_scope::inclusive);
  bool metric_active =
      metric_id &&
      std::find(active.begin(), active.end(), *metric_id) != active.end();

  std::vector<imbalance_row> rows;
  if (metric_active) {
    auto kernels =
        diagnostics::find_metric_contexts(summary, meta, {*metric_id},
                                          min_share);

    std::vector<uint32_t> kernel_ids;
    for (const auto& k : kernels) kernel_ids.push_back(k.ctx_id);
    std::sort(kernel_ids.begin(), kernel_ids.end());

    query::index_plan per_rank;
    for (const auto& p : meta.profiles)
      if (p.rank >= 0) per_rank.profile_ids.push_back(p.id);
    per_rank.ctx_ids = kernel_ids;
    per_rank.metric_ids = {*metric_id};
    ingest::slice_table rank_rows = s.fetch_plan(per_rank);

    // Iteration CVs need the tri-model; skip quietly when traces cannot
    // support one.
    std::unique_ptr<itermodel::tri_model> model;
    std::vector<uint32_t> trace_ids;
    for (const auto& e : s.db().trace_index()) trace_ids.push_back(e.profile_id);
    if (!trace_ids.empty()) {
      try {
        model = std::make_unique<itermodel::tri_model>(itermodel::build_tri_model(
            s.db(), trace_ids, itermodel::anchor_policy::auto_detect(),
            s.jobs()));
      } catch (const error&) {
        model.reset();
      }
    }

    for (const auto& k : kernels) {
      imbalance_row row{k.ctx_id, meta.contexts[k.ctx_id].name, k.share, 0.0,
                        false, 0.0, 0.0};
      row.ratio =
          diagnostics::balance_ratio(rank_vector(s, rank_rows, k.ctx_id).second);
      if (model) {
        try {
          auto cv = diagnostics::iteration_cv_report(*model, k.ctx_id);
          row.has_cv = true;
          row.across_cv = cv.across_rank_cv_pct;
          row.within_cv = cv.within_rank_cv_pct;
        } catch (const error&) {
        }
      }
      rows.push_back(std::move(row));
    }
  }

  if (f == output_format::json) {
    json j;
    j["metric"] = metric_name;
    json active_names = json::array();
    for (uint16_t id : active) active_names.push_back(meta.metrics[id].name);
    j["active_gpu_metrics"] = std::move(active_names);
    j["rows"] = json::array();
    for (const auto& r : rows) {
      json jr;
      jr["ctx_id"] = r.ctx_id;
      jr["name"] = r.name;
      jr["execution_share_frac"] = r.share;
      jr["balance_ratio"] = r.ratio;
      if (r.has_cv) {
        jr["across_rank_cv_pct"] = r.across_cv;
        jr["within_rank_cv_pct"] = r.within_cv;
      } else {
        jr["across_rank_cv_pct"] = nullptr;
        jr["within_rank_cv_pct"] = nullptr;
      }
      j["rows"].push_back(std::move(jr));
    }
    return j.dump(2);
  }

  std::string out =
      "ctx_id,name,execution_share_frac,balance_ratio,across_rank_cv_pct,"
      "within_rank_cv_pct\n";
  for (const auto& r : rows) {
    out += std::to_string(r.ctx_id) + "," + util::csv_field(r.name) + "," +
           util::format_double(r.share) + "," + util::format_double(r.ratio) +
           ",";
    if (r.has_cv)
      out += util::format_double(r.across_cv) + "," +
             util::format_double(r.within_cv);
    else
      out += ",";
    out += "\n";
  }
  return out;
}

std::string iterations_report(query::session& s, const iterations_options& opt,
                              output_format f) {
  const auto& meta = s.meta();
  std::vector<uint32_t> trace_ids;
  for (const auto& e : s.db().trace_index()) trace_ids.push_back(e.profile_id);
  if (trace_ids.empty())
    raise(errc::not_found, "database has no traces");

  itermodel::anchor_policy policy = itermodel::anchor_policy::auto_detect();
  if (opt.anchor == "root") {
    policy = itermodel::anchor_policy::explicit_ctx(meta.root_ctx());
  } else if (opt.anchor != "auto") {
    uint32_t ctx = 0;
    try {
      ctx = static_cast<uint32_t>(std::stoul(opt.anchor));
    } catch (const std::exception&) {
      raise(errc::invalid_argument,
            "anchor must be 'auto', 'root', or a ctx id");
    }
    policy = itermodel::anchor_policy::explicit_ctx(ctx);
  }

  itermodel::tri_model model =
      itermodel::build_tri_model(s.db(), trace_ids, policy, s.jobs());

  double total_time = opt.total_time_s;
  if (total_time <= 0.0) {
    for (const auto& e : s.db().trace_index())
      total_time = std::max(
          total_time,
          static_cast<double>(e.t_end_ns - e.t_begin_ns) / 1e9);
  }

  std::vector<uint32_t> kernels = model.subtree_leaves(meta);
  diagnostics::savings_summary savings =
      diagnostics::savings_report(model, kernels, total_time);

  struct cv_row {
    uint32_t ctx;
    bool ok;
    diagnostics::cv_report cv;
  };
  std::vector<cv_row> cvs;
  for (uint32_t ctx : kernels) {
    cv_row row{ctx, false, {}};
    try {
      row.cv = diagnostics::iteration_cv_report(model, ctx);
      row.ok = true;
    } catch (const error&) {
    }
    cvs.push_back(row);
  }

  if (f == output_format::json) {
    json j;
    j["anchor"] = {{"ctx_id", model.anchor_ctx},
                   {"name", meta.contexts[model.anchor_ctx].name}};
    j["n_traces"] = model.n_traces();
    j["iterations_per_trace"] = json::object();
    for (std::size_t t = 0; t < model.n_traces(); ++t)
      j["iterations_per_trace"][std::to_string(model.trace_ids[t])] =
          model.iter_counts[t];
    j["n_iterations"] = model.min_iterations();
    j["skipped_traces"] = model.skipped_traces;
    j["model"] = json::array();
    for (std::size_t t = 0; t < model.n_traces(); ++t)
      for (uint32_t k = 0; k < model.iter_counts[t]; ++k)
        for (std::size_t n = 0; n < model.n_nodes(); ++n)
          j["model"].push_back({{"ctx_id", model.node_ids[n]},
                                {"trace_id", model.trace_ids[t]},
                                {"iteration", k},
                                {"time_incl_s", model.incl_s(t, k, n)},
                                {"time_excl_s", model.excl_s(t, k, n)}});
    j["cv"] = json::array();
    for (const auto& row : cvs) {
      json jr;
      jr["ctx_id"] = row.ctx;
      jr["name"] = meta.contexts[row.ctx].name;
      if (row.ok) {
        jr["across_rank_cv_pct"] = row.cv.across_rank_cv_pct;
        jr["within_rank_cv_pct"] = row.cv.within_rank_cv_pct;
      } else {
        jr["across_rank_cv_pct"] = nullptr;
        jr["within_rank_cv_pct"] = nullptr;
      }
      j["cv"].push_back(std::move(jr));
    }
    j["savings"] = json::array();
    for (const auto& row : savings.rows)
      j["savings"].push_back({{"ctx_id", row.ctx_id},
                              {"name", meta.contexts[row.ctx_id].name},
                              {"avg_mean_s", row.avg_mean_s},
                              {"avg_max_s", row.avg_max_s},
                              {"savings_per_iter_s", row.savings_per_iter_s},
                              {"total_reduction_s", row.total_reduction_s}});
    j["n_iterations_used"] = savings.n_iterations;
    j["total_savings_s"] = savings.total_savings_s;
    j["total_time_s"] = total_time;
    j["speedup_frac"] = savings.speedup_frac;
    return j.dump(2);
  }

  std::string out = model.to_csv();
  out += "\nctx_id,name,across_rank_cv_pct,within_rank_cv_pct\n";
  for (const auto& row : cvs) {
    out += std::to_string(row.ctx) + "," +
           util::csv_field(meta.contexts[row.ctx].name) + ",";
    if (row.ok)
      out += util::format_double(row.cv.across_rank_cv_pct) + "," +
             util::format_double(row.cv.within_rank_cv_pct);
    else
      out += ",";
    out += "\n";
  }
  out +=
      "\nctx_id,name,avg_mean_s,avg_max_s,savings_per_iter_s,"
      "total_reduction_s\n";
  for (const auto& row : savings.rows)
    out += std::to_string(row.ctx_id) + "," +
           util::csv_field(meta.contexts[row.ctx_id].name) + "," +
           util::format_double(row.avg_mean_s) + "," +
           util::format_double(row.avg_max_s) + "," +
           util::format_double(row.savings_per_iter_s) + "," +
           util::format_double(row.total_reduction_s) + "\n";
  out += "\nn_iterations,total_savings_s,total_time_s,speedup_frac\n";
  out += std::to_string(savings.n_iterations) + "," +
         util::format_double(savings.total_savings_s) + "," +
         util::format_double(total_time) + "," +
         util::format_double(savings.speedup_frac) + "\n";
  return out;
}

std::string congestion_report(query::session& s, const congestion_options& opt,
                              output_format f) {
  const auto& meta = s.meta();

  // Summary bottlenecks for the call-site glob.
  query::query_spec summary_q = query::parse_query(
      "summary", "function(" + opt.callsite_glob + ")", "cputime:sum (i)");
  query::index_plan callsite_plan =
      query::resolve_query(summary_q, meta, s.keep());
  if (callsite_plan.ctx_ids.empty())
    raise(errc::not_found,
          "no call sites match " + opt.callsite_glob);
  ingest::slice_table summary_rows = s.fetch_plan(callsite_plan);

  // Per-rank values for every candidate call site.
  query::index_plan per_rank = callsite_plan;
  per_rank.profile_ids.clear();
  for (const auto& p : meta.profiles)
    if (p.rank >= 0) per_rank.profile_ids.push_back(p.id);
  ingest::slice_table rank_rows = s.fetch_plan(per_rank);

  struct site {
    uint32_t ctx;
    double summary_s;
    double ratio;
    std::vector<int32_t> ranks;
    std::vector<double> values;
  };
  std::vector<site> sites;
  for (uint32_t ctx : callsite_plan.ctx_ids) {
    site st;
    st.ctx = ctx;
    st.summary_s = 0.0;
    for (std::size_t i = 0; i < summary_rows.size(); ++i)
      if (summary_rows.ctx_id[i] == ctx) st.summary_s = summary_rows.value[i];
    auto [ranks, values] = rank_vector(s, rank_rows, ctx);
    st.ranks = std::move(ranks);
    st.values = std::move(values);
    st.ratio = diagnostics::balance_ratio(st.values);
    sites.push_back(std::move(st));
  }

  const site* worst = &sites.front();
  for (const auto& st : sites)
    if (st.ratio < worst->ratio) worst = &st;

  // Node correlation for the worst site and for total time.
  std::vector<std::pair<int32_t, double>> worst_rank_values;
  for (std::size_t i = 0; i < worst->ranks.size(); ++i)
    worst_rank_values.emplace_back(worst->ranks[i], worst->values[i]);
  std::vector<diagnostics::node_stat> node_means =
      diagnostics::node_correlate(worst_rank_values, meta);

  query::index_plan total_plan;
  total_plan.profile_ids = per_rank.profile_ids;
  total_plan.ctx_ids = {meta.root_ctx()};
  total_plan.metric_ids = per_rank.metric_ids;
  ingest::slice_table total_rows = s.fetch_plan(total_plan);
  auto [total_ranks, total_values] = rank_vector(s, total_rows, meta.root_ctx());
  std::vector<std::pair<int32_t, double>> total_rank_values;
  for (std::size_t i = 0; i < total_ranks.size(); ++i)
    total_rank_values.emplace_back(total_ranks[i], total_values[i]);
  std::vector<diagnostics::node_stat> total_means =
      diagnostics::node_correlate(total_rank_values, meta);

  auto cluster_nodes = [&](const std::vector<diagnostics::node_stat>& stats) {
    std::vector<std::vector<double>> points;
    points.reserve(stats.size());
    for (const auto& st : stats) points.push_back({st.mean_value});
    if (opt.method == "kmeans")
      return diagnostics::kmeans(points, opt.k).part;
    if (opt.method != "dbscan")
      raise(errc::invalid_argument, "cluster method must be dbscan or kmeans");
    std::optional<double> eps;
    if (opt.eps > 0.0) eps = opt.eps;
    if (!eps) {
      double lo = points[0][0], hi = points[0][0];
      for (const auto& p : points) {
        lo = std::min(lo, p[0]);
        hi = std::max(hi, p[0]);
      }
      // Perfectly uniform values leave no usable radius; that is a single
      // group, not a clustering failure.
      if (hi == lo) {
        diagnostics::partition flat;
        flat.labels.assign(points.size(), 0);
        return flat;
      }
    }
    return diagnostics::dbscan(points, eps);
  };

  diagnostics::partition part = cluster_nodes(node_means);
  diagnostics::partition total_part = cluster_nodes(total_means);

  // Cluster inventory on the call-site partition.
  std::map<int32_t, std::pair<double, uint64_t>> groups;  // label -> (sum, n)
  for (std::size_t i = 0; i < part.labels.size(); ++i) {
    auto& g = groups[part.labels[i]];
    g.first += node_means[i].mean_value;
    g.second += 1;
  }
  uint64_t noise = 0;
  if (groups.count(-1)) {
    noise = groups[-1].second;
    groups.erase(-1);
  }
  if (groups.size() < 2)
    raise(errc::no_outliers,
          "clustering yields a single group; no outlier population");

  int32_t outlier_label = 0;
  double outlier_mean = -1.0;
  for (const auto& [label, g] : groups) {
    double mean = g.first / static_cast<double>(g.second);
    if (mean > outlier_mean) {
      outlier_mean = mean;
      outlier_label = label;
    }
  }

  std::vector<std::string> outlier_hosts, all_hosts;
  for (std::size_t i = 0; i < node_means.size(); ++i) {
    all_hosts.push_back(node_means[i].hostname);
    if (part.labels[i] == outlier_label)
      outlier_hosts.push_back(node_means[i].hostname);
  }

  diagnostics::partition_comparison cross =
      diagnostics::compare_partitions(part, total_part);
  topology::congestion_report topo =
      topology::localize_outliers(outlier_hosts, all_hosts);
  std::vector<std::string> chain = diagnostics::call_chain(meta, worst->ctx);

  if (f == output_format::json) {
    json j;
    j["callsites"] = json::array();
    for (const auto& st : sites)
      j["callsites"].push_back({{"ctx_id", st.ctx},
                                {"name", meta.contexts[st.ctx].name},
                                {"summary_s", st.summary_s},
                                {"balance_ratio", st.ratio}});
    j["worst"] = {{"ctx_id", worst->ctx},
                  {"name", meta.contexts[worst->ctx].name},
                  {"balance_ratio", worst->ratio},
                  {"call_chain", chain}};
    j["clusters"] = json::array();
    for (const auto& [label, g] : groups)
      j["clusters"].push_back(
          {{"label", label},
           {"nodes", g.second},
           {"mean_s", g.first / static_cast<double>(g.second)}});
    j["noise_nodes"] = noise;
    j["outlier_group"] = {{"label", outlier_label},
                          {"nodes", outlier_hosts.size()},
                          {"mean_s", outlier_mean},
                          {"hostnames", outlier_hosts}};
    j["total_time_partition"] = {{"off_block", cross.off_block}};
    j["topology"] =
        json::parse(topology::render_report(topo, topology::report_format::json));
    return j.dump(2);
  }

  std::string out = "ctx_id,name,summary_s,balance_ratio\n";
  for (const auto& st : sites)
    out += std::to_string(st.ctx) + "," +
           util::csv_field(meta.contexts[st.ctx].name) + "," +
           util::format_double(st.summary_s) + "," +
           util::format_double(st.ratio) + "\n";
  out += "\nworst_ctx,worst_name,balance_ratio,call_chain\n";
  out += std::to_string(worst->ctx) + "," +
         util::csv_field(meta.contexts[worst->ctx].name) + "," +
         util::format_double(worst->ratio) + ",";
  std::string joined;
  for (std::size_t i = 0; i < chain.size(); ++i) {
    if (i) joined += "->";
    joined += chain[i];
  }
  out += util::csv_field(joined) + "\n";
  out += "\nlabel,nodes,mean_s\n";
  for (const auto& [label, g] : groups)
    out += std::to_string(label) + "," + std::to_string(g.second) + "," +
           util::format_double(g.first / static_cast<double>(g.second)) + "\n";
  out += "\noff_block," + std::to_string(cross.off_block) + "\n";
  out += "\n" + topology::render_report(topo, topology::report_format::text);
  return out;
}

std::string bench(const store::db_handle& h, const bench_options& opt) {
  unsigned jobs = opt.jobs == 0 ? util::default_jobs() : opt.jobs;
  unsigned repeat = opt.repeat == 0 ? 1 : opt.repeat;

  auto time_once = [](const std::function<void()>& fn) {
    auto start = std::chrono::steady_clock::now();
    fn();
    auto stop = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(stop - start).count();
  };
  auto time_mean = [&](const std::function<void()>& fn) {
    double total = 0.0;
    for (unsigned r = 0; r < repeat; ++r) total += time_once(fn);
    return total / repeat;
  };

  std::string out = "suite,size,op,parallelism,mean_s\n";

  if (opt.suite == "ingest") {
    std::vector<uint64_t> sizes =
        opt.sizes.empty() ? std::vector<uint64_t>{10, 100, 1000} : opt.sizes;
    std::vector<uint32_t> rank_profiles;
    for (const auto& p : h.meta().profiles)
      if (p.rank >= 0) rank_profiles.push_back(p.id);

    ingest::keep_set keep = ingest::compute_keep_set(h, {});
    std::vector<unsigned> widths;
    for (unsigned w = 1; w < jobs; w *= 2) widths.push_back(w);
    widths.push_back(jobs);

    for (unsigned width : widths)
      for (uint64_t size : sizes) {
        uint64_t n = std::min<uint64_t>(size, rank_profiles.size());
        std::vector<uint32_t> ids(rank_profiles.begin(),
                                  rank_profiles.begin() + n);
        double mean = time_mean(
            [&] { ingest::ingest_profiles(h, ids, keep, {}, width); });
        out += "ingest," + std::to_string(n) + ",ingest," +
               std::to_string(width) + "," + util::format_double(mean) + "\n";
      }
    return out;
  }

  if (opt.suite != "frame")
    raise(errc::invalid_argument, "bench suite must be ingest or frame");

  std::vector<uint64_t> sizes =
      opt.sizes.empty() ? std::vector<uint64_t>{1000, 10000, 100000}
                        : opt.sizes;

  for (uint64_t size : sizes) {
    util::xorshift64s rng(opt.seed ^ size);
    uint64_t cardinality = std::max<uint64_t>(1, size / 16);
    std::vector<uint64_t> key(size);
    std::vector<double> val(size);
    std::vector<int64_t> idx(size);
    for (uint64_t i = 0; i < size; ++i) {
      key[i] = rng.next_below(cardinality);
      val[i] = rng.next_unit();
      idx[i] = static_cast<int64_t>(i);
    }
    frame::table t;
    t.add(frame::column::of_u64("key", std::move(key)));
    t.add(frame::column::of_f64("val", std::move(val)));
    t.add(frame::column::of_i64("idx", std::move(idx)));

    frame::table right;
    {
      std::vector<uint64_t> rkey(cardinality);
      std::vector<double> weight(cardinality);
      for (uint64_t i = 0; i < cardinality; ++i) {
        rkey[i] = i;
        weight[i] = rng.next_unit();
      }
      right.add(frame::column::of_u64("key", std::move(rkey)));
      right.add(frame::column::of_f64("weight", std::move(weight)));
    }

    const frame::column& val_col = t.col("val");
    for (frame::backend be : {frame::backend::seq(), frame::backend::par(jobs)}) {
      auto emit = [&](const char* op, const std::function<void()>& fn) {
        out += "frame," + std::to_string(size) + "," + op + "," +
               std::to_string(be.workers) + "," +
               util::format_double(time_mean(fn)) + "\n";
      };
      emit("grouping", [&] {
        frame::group_aggregate(t, {"key"}, {{"val", frame::agg_fn::sum}}, be);
      });
      emit("sorting", [&] { frame::sort(t, {"val"}, {}, be); });
      emit("filtering", [&] {
        frame::filter(t, "val", frame::cmp_op::lt, frame::literal(0.5), be);
      });
      emit("merging", [&] { frame::merge(t, right, {"key"}, be); });
      emit("scalar_compare",
           [&] { frame::scalar_compare(val_col, frame::cmp_op::lt, 0.5, be); });
      emit("vector_add", [&] { frame::vector_add(val_col, val_col, be); });
      emit("in_place_multiply",
           [&] { frame::in_place_multiply(val_col, 1.0001, be); });
      emit("reduction_sum", [&] { frame::reduce_sum(val_col, be); });
      emit("cumulative_sum", [&] { frame::cumulative_sum(val_col, be); });
    }
  }
  return out;
}

}  // namespace perfslice::workflows
