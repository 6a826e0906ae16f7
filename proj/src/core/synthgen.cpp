#include "synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>

#include <nlohmann/json.hpp>

#include "util.hpp"

namespace perfslice::synthgen {

namespace {

using store::ctx_kind;
using store::metric_scope;

constexpr double k_ns = 1e9;

uint64_t to_ns(double seconds) {
  return static_cast<uint64_t>(std::llround(seconds * k_ns));
}

void require(bool ok, const std::string& msg) {
  if (!ok) raise(errc::invalid_config, msg);
}

void validate(const iter_scenario_config& cfg) {
  require(cfg.n_ranks >= 1, "n_ranks must be >= 1");
  require(cfg.n_iterations >= 1, "n_iterations must be >= 1");
  require(!cfg.kernels.empty(), "at least one kernel is required");
  require(!cfg.anchor_name.empty(), "anchor_name must be nonempty");
  require(cfg.copy_segment_s >= 0.0, "copy_segment_s must be >= 0");
  require(!cfg.hostname.empty(), "hostname must be nonempty");
  for (const auto& k : cfg.kernels) {
    require(!k.name.empty(), "kernel name must be nonempty");
    require(k.mean_time_s > 0.0, "kernel mean_time_s must be > 0");
    require(k.within_rank_jitter_frac >= 0.0 && k.within_rank_jitter_frac < 0.5,
            "within_rank_jitter_frac must lie in [0, 0.5)");
    require(k.across_rank_spread.empty() ||
                k.across_rank_spread.size() == cfg.n_ranks,
            "across_rank_spread must list one factor per rank");
    for (double f : k.across_rank_spread)
      require(f > 0.0, "spread factors must be > 0");
  }
}

void validate(const congestion_scenario_config& cfg) {
  require(cfg.n_nodes >= 1, "n_nodes must be >= 1");
  require(cfg.ranks_per_node >= 1, "ranks_per_node must be >= 1");
  require(cfg.chassis_per_rack >= 1 && cfg.slots_per_chassis >= 1,
          "rack shape must be >= 1 in both dimensions");
  require(cfg.outlier_node_count <= cfg.n_nodes,
          "outlier_node_count exceeds n_nodes");
  require(!cfg.callsites.empty(), "at least one call site is required");
  require(cfg.congested_callsite < cfg.callsites.size(),
          "congested_callsite out of range");
  require(cfg.congestion_multiplier >= 1.0,
          "congestion_multiplier must be >= 1");
  require(cfg.compute_time_s >= 0.0, "compute_time_s must be >= 0");
  require(cfg.jitter_frac >= 0.0 && cfg.jitter_frac < 0.5,
          "jitter_frac must lie in [0, 0.5)");
  for (const auto& s : cfg.callsites) {
    require(!s.routine_name.empty(), "routine_name must be nonempty");
    require(s.base_time_s > 0.0, "call-site base_time_s must be > 0");
  }
  if (cfg.outlier_node_count > 0) {
    require(!cfg.outlier_racks.empty(),
            "outlier_racks must be nonempty when outliers are requested");
    require(cfg.outlier_racks.size() <= cfg.outlier_node_count,
            "fewer outlier nodes than outlier racks");
  }
}

// Inclusive = exclusive + sum of child inclusives; ids are topological so a
// single reverse sweep suffices.
std::vector<uint64_t> roll_up(const std::vector<uint64_t>& excl,
                              const std::vector<store::cct_node>& nodes) {
  std::vector<uint64_t> incl = excl;
  for (size_t id = nodes.size(); id-- > 1;)
    incl[nodes[id].parent] += incl[id];
  return incl;
}

struct metric_layout {
  uint16_t cputime_i = 0;
  uint16_t cputime_e = 1;
  uint16_t gker_i = 0xFFFF;
  uint16_t gxcopy_i = 0xFFFF;
};

// Emits one rank's sorted sparse records from per-metric nanosecond columns.
std::vector<store::profile_record> make_records(
    const std::vector<std::vector<uint64_t>>& ns_by_metric) {
  std::vector<store::profile_record> recs;
  const size_t n_ctx = ns_by_metric.front().size();
  for (uint32_t ctx = 0; ctx < n_ctx; ++ctx)
    for (uint16_t m = 0; m < ns_by_metric.size(); ++m) {
      uint64_t ns = ns_by_metric[m][ctx];
      if (ns > 0)
        recs.push_back({ctx, m, static_cast<double>(ns) / k_ns});
    }
  return recs;
}

std::vector<store::profile_record> make_summary(
    const std::vector<std::vector<std::vector<uint64_t>>>& per_rank_ns) {
  const size_t n_metrics = per_rank_ns.front().size();
  const size_t n_ctx = per_rank_ns.front().front().size();
  std::vector<std::vector<uint64_t>> total(n_metrics,
                                           std::vector<uint64_t>(n_ctx, 0));
  for (const auto& rank_ns : per_rank_ns)
    for (size_t m = 0; m < n_metrics; ++m)
      for (size_t c = 0; c < n_ctx; ++c) total[m][c] += rank_ns[m][c];
  return make_records(total);
}

}  // namespace

std::vector<store::cct_node> generate_cct(uint32_t depth, uint32_t fanout,
                                          const std::string& name_prefix,
                                          uint64_t seed) {
  require(depth >= 1, "depth must be >= 1");
  util::xorshift64s rng(seed);
  std::vector<store::cct_node> nodes;
  nodes.push_back({0, store::k_no_parent, ctx_kind::function,
                   name_prefix + "0"});
  // Breadth-first: level d spans a contiguous id range.
  uint32_t level_begin = 0, level_end = 1;
  for (uint32_t d = 1; d < depth; ++d) {
    uint32_t next_begin = static_cast<uint32_t>(nodes.size());
    for (uint32_t parent = level_begin; parent < level_end; ++parent)
      for (uint32_t c = 0; c < fanout; ++c) {
        uint32_t id = static_cast<uint32_t>(nodes.size());
        auto kind = static_cast<ctx_kind>(rng.next_below(3));  // fn/loop/line
        nodes.push_back({id, parent, kind, name_prefix + std::to_string(id)});
      }
    level_begin = next_begin;
    level_end = static_cast<uint32_t>(nodes.size());
  }
  return nodes;
}

std::pair<store::database_image, iter_ground_truth> generate_iterative_scenario(
    const iter_scenario_config& cfg) {
  validate(cfg);

  store::database_image image;
  iter_ground_truth truth;
  const uint32_t n_kernels = static_cast<uint32_t>(cfg.kernels.size());
  const bool has_copy = cfg.copy_segment_s > 0.0;

  auto& nodes = image.meta.contexts;
  nodes.push_back({0, store::k_no_parent, ctx_kind::function, "main"});
  nodes.push_back({1, 0, ctx_kind::function, cfg.anchor_name});
  truth.anchor_ctx = 1;
  for (uint32_t k = 0; k < n_kernels; ++k) {
    uint32_t id = 2 + k;
    nodes.push_back({id, 1, ctx_kind::gpu_kernel, cfg.kernels[k].name});
    truth.kernel_ctx.push_back(id);
  }
  if (has_copy) {
    truth.copy_ctx = 2 + n_kernels;
    nodes.push_back({truth.copy_ctx, 0, ctx_kind::gpu_context, "gpu_xcopy_h2d"});
  }

  metric_layout ml;
  image.meta.metrics.push_back({0, metric_scope::inclusive, "cputime", "s"});
  image.meta.metrics.push_back({1, metric_scope::exclusive, "cputime", "s"});
  ml.gker_i = 2;
  image.meta.metrics.push_back({2, metric_scope::inclusive, "gker", "s"});
  if (has_copy) {
    ml.gxcopy_i = 3;
    image.meta.metrics.push_back({3, metric_scope::inclusive, "gxcopy", "s"});
  }

  image.meta.profiles.push_back({0, -1, -1, "", 0});
  for (uint32_t r = 0; r < cfg.n_ranks; ++r)
    image.meta.profiles.push_back(
        {r + 1, static_cast<int32_t>(r), 0, cfg.hostname, 1});

  util::xorshift64s rng(cfg.seed);
  const uint64_t copy_ns = to_ns(cfg.copy_segment_s);
  truth.kernel_time_ns.assign(
      n_kernels, std::vector<std::vector<uint64_t>>(
                     cfg.n_ranks, std::vector<uint64_t>(cfg.n_iterations, 0)));
  truth.boundaries_ns.assign(cfg.n_ranks, {});
  truth.trace_end_ns.assign(cfg.n_ranks, 0);

  const size_t n_metrics = image.meta.metrics.size();
  const size_t n_ctx = nodes.size();
  std::vector<std::vector<std::vector<uint64_t>>> per_rank_ns;

  for (uint32_t r = 0; r < cfg.n_ranks; ++r) {
    store::trace_data trace;
    trace.profile_id = r + 1;
    uint64_t t = 0;
    std::vector<uint64_t> excl(n_ctx, 0);

    for (uint32_t it = 0; it < cfg.n_iterations; ++it) {
      truth.boundaries_ns[r].push_back(t);
      trace.events.push_back({t, truth.anchor_ctx});
      for (uint32_t k = 0; k < n_kernels; ++k) {
        const auto& spec = cfg.kernels[k];
        double factor =
            spec.across_rank_spread.empty() ? 1.0 : spec.across_rank_spread[r];
        double u = rng.next_signed_unit();
        uint64_t d = to_ns(spec.mean_time_s * factor *
                           (1.0 + spec.within_rank_jitter_frac * u));
        trace.events.push_back({t, truth.kernel_ctx[k]});
        t += d;
        excl[truth.kernel_ctx[k]] += d;
        truth.kernel_time_ns[k][r][it] = d;
      }
      if (has_copy) {
        trace.events.push_back({t, truth.copy_ctx});
        t += copy_ns;
        excl[truth.copy_ctx] += copy_ns;
      }
      trace.events.push_back({t, 0});  // leave the anchor subtree
    }
    trace.t_end_ns = t;
    truth.trace_end_ns[r] = t;
    image.traces.push_back(std::move(trace));

    std::vector<uint64_t> incl = roll_up(excl, nodes);
    std::vector<uint64_t> gker_leaf(n_ctx, 0), gxcopy_leaf(n_ctx, 0);
    for (uint32_t ctx : truth.kernel_ctx) gker_leaf[ctx] = excl[ctx];
    if (has_copy) gxcopy_leaf[truth.copy_ctx] = excl[truth.copy_ctx];

    std::vector<std::vector<uint64_t>> ns_by_metric(n_metrics);
    ns_by_metric[ml.cputime_i] = incl;
    ns_by_metric[ml.cputime_e] = excl;
    ns_by_metric[ml.gker_i] = roll_up(gker_leaf, nodes);
    if (has_copy) ns_by_metric[ml.gxcopy_i] = roll_up(gxcopy_leaf, nodes);
    per_rank_ns.push_back(std::move(ns_by_metric));
  }

  image.records.push_back(make_summary(per_rank_ns));
  for (auto& rank_ns : per_rank_ns)
    image.records.push_back(make_records(rank_ns));

  return {std::move(image), std::move(truth)};
}

std::pair<store::database_image, congestion_ground_truth>
generate_congestion_scenario(const congestion_scenario_config& cfg) {
  validate(cfg);

  store::database_image image;
  congestion_ground_truth truth;
  const uint32_t n_sites = static_cast<uint32_t>(cfg.callsites.size());
  const uint32_t nodes_per_rack = cfg.chassis_per_rack * cfg.slots_per_chassis;

  auto& nodes = image.meta.contexts;
  nodes.push_back({0, store::k_no_parent, ctx_kind::function, "main"});
  for (const auto& site : cfg.callsites) {
    uint32_t parent = 0;
    for (const auto& name : site.call_chain) {
      uint32_t id = static_cast<uint32_t>(nodes.size());
      nodes.push_back({id, parent, ctx_kind::function, name});
      parent = id;
    }
    uint32_t leaf = static_cast<uint32_t>(nodes.size());
    nodes.push_back({leaf, parent, ctx_kind::function, site.routine_name});
    truth.callsite_ctx.push_back(leaf);
  }
  truth.congested_ctx = truth.callsite_ctx[cfg.congested_callsite];

  image.meta.metrics.push_back({0, metric_scope::inclusive, "cputime", "s"});
  image.meta.metrics.push_back({1, metric_scope::exclusive, "cputime", "s"});

  // Node placement: consecutive nodes fill a rack slot by slot.
  std::map<uint32_t, std::vector<uint32_t>> rack_nodes;
  for (uint32_t n = 0; n < cfg.n_nodes; ++n) {
    uint32_t rack = cfg.rack_id_base + n / nodes_per_rack;
    uint32_t chassis = (n / cfg.slots_per_chassis) % cfg.chassis_per_rack;
    uint32_t slot = n % cfg.slots_per_chassis;
    truth.node_hostnames.push_back("x" + std::to_string(rack) + "c" +
                                   std::to_string(chassis) + "s" +
                                   std::to_string(slot) + "b0n0");
    rack_nodes[rack].push_back(n);
  }

  util::xorshift64s rng(cfg.seed);
  std::set<uint32_t> outliers;
  if (cfg.outlier_node_count > 0) {
    std::vector<uint32_t> leftover;
    for (uint32_t rack : cfg.outlier_racks) {
      auto it = rack_nodes.find(rack);
      require(it != rack_nodes.end(),
              "outlier rack " + std::to_string(rack) + " has no nodes");
      // One guaranteed pick per requested rack, the rest go to the pool.
      const auto& members = it->second;
      uint32_t pick = members[rng.next_below(members.size())];
      outliers.insert(pick);
      for (uint32_t n : members)
        if (n != pick) leftover.push_back(n);
    }
    require(outliers.size() + leftover.size() >= cfg.outlier_node_count,
            "outlier racks too small for outlier_node_count");
    for (size_t i = leftover.size(); i > 1; --i)
      std::swap(leftover[i - 1], leftover[rng.next_below(i)]);
    for (size_t i = 0; outliers.size() < cfg.outlier_node_count; ++i)
      outliers.insert(leftover[i]);
  }
  truth.outlier_nodes.assign(outliers.begin(), outliers.end());
  std::set<uint32_t> rack_set;
  for (uint32_t n : truth.outlier_nodes) {
    truth.outlier_hostnames.push_back(truth.node_hostnames[n]);
    rack_set.insert(cfg.rack_id_base + n / nodes_per_rack);
  }
  truth.outlier_rack_ids.assign(rack_set.begin(), rack_set.end());

  double site_total = 0.0;
  for (const auto& s : cfg.callsites) site_total += s.base_time_s;
  truth.normal_mean_total_s = cfg.compute_time_s + site_total;
  truth.outlier_mean_total_s =
      truth.normal_mean_total_s + (cfg.congestion_multiplier - 1.0) *
                                      cfg.callsites[cfg.congested_callsite]
                                          .base_time_s;

  const uint32_t n_ranks = cfg.n_nodes * cfg.ranks_per_node;
  image.meta.profiles.push_back({0, -1, -1, "", 0});
  for (uint32_t r = 0; r < n_ranks; ++r) {
    uint32_t node = r / cfg.ranks_per_node;
    image.meta.profiles.push_back({r + 1, static_cast<int32_t>(r), 0,
                                   truth.node_hostnames[node], node});
  }

  const size_t n_ctx = nodes.size();
  std::vector<std::vector<std::vector<uint64_t>>> per_rank_ns;
  per_rank_ns.reserve(n_ranks);

  for (uint32_t r = 0; r < n_ranks; ++r) {
    uint32_t node = r / cfg.ranks_per_node;
    bool is_outlier = outliers.count(node) > 0;

    store::trace_data trace;
    trace.profile_id = r + 1;
    std::vector<uint64_t> excl(n_ctx, 0);
    uint64_t t = 0;

    double u = rng.next_signed_unit();
    uint64_t compute_ns =
        to_ns(cfg.compute_time_s * (1.0 + cfg.jitter_frac * u));
    trace.events.push_back({t, 0});
    t += compute_ns;
    excl[0] += compute_ns;

    for (uint32_t s = 0; s < n_sites; ++s) {
      double scale =
          (is_outlier && s == cfg.congested_callsite) ? cfg.congestion_multiplier
                                                      : 1.0;
      double us = rng.next_signed_unit();
      uint64_t d = to_ns(cfg.callsites[s].base_time_s * scale *
                         (1.0 + cfg.jitter_frac * us));
      trace.events.push_back({t, truth.callsite_ctx[s]});
      t += d;
      excl[truth.callsite_ctx[s]] += d;
    }
    trace.t_end_ns = t;
    image.traces.push_back(std::move(trace));

    std::vector<std::vector<uint64_t>> ns_by_metric(2);
    ns_by_metric[0] = roll_up(excl, nodes);
    ns_by_metric[1] = std::move(excl);
    per_rank_ns.push_back(std::move(ns_by_metric));
  }

  image.records.push_back(make_summary(per_rank_ns));
  for (auto& rank_ns : per_rank_ns)
    image.records.push_back(make_records(rank_ns));

  return {std::move(image), std::move(truth)};
}

namespace {

using nlohmann::json;

template <typename T>
T field(const json& j, const char* key, std::optional<T> fallback = {}) {
  if (!j.contains(key)) {
    if (fallback) return *fallback;
    raise(errc::invalid_config, std::string("missing config field: ") + key);
  }
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    raise(errc::invalid_config,
          std::string("bad config field ") + key + ": " + e.what());
  }
}

}  // namespace

iter_scenario_config iter_config_from_json(const json& j) {
  iter_scenario_config cfg;
  cfg.n_ranks = field<uint32_t>(j, "n_ranks");
  cfg.n_iterations = field<uint32_t>(j, "n_iterations");
  cfg.anchor_name = field<std::string>(j, "anchor_name", {{"iter_loop"}});
  cfg.copy_segment_s = field<double>(j, "copy_segment_s", {0.0});
  cfg.hostname = field<std::string>(j, "hostname", {{"x1000c0s0b0n0"}});
  cfg.seed = field<uint64_t>(j, "seed", {0});
  if (!j.contains("kernels") || !j.at("kernels").is_array())
    raise(errc::invalid_config, "kernels must be an array");
  for (const auto& jk : j.at("kernels")) {
    kernel_spec k;
    k.name = field<std::string>(jk, "name");
    k.mean_time_s = field<double>(jk, "mean_time_s");
    k.across_rank_spread =
        field<std::vector<double>>(jk, "across_rank_spread", {{}});
    k.within_rank_jitter_frac =
        field<double>(jk, "within_rank_jitter_frac", {0.0});
    cfg.kernels.push_back(std::move(k));
  }
  return cfg;
}

congestion_scenario_config congestion_config_from_json(const json& j) {
  congestion_scenario_config cfg;
  cfg.n_nodes = field<uint32_t>(j, "n_nodes");
  cfg.ranks_per_node = field<uint32_t>(j, "ranks_per_node");
  cfg.rack_id_base = field<uint32_t>(j, "rack_id_base", {4000});
  cfg.chassis_per_rack = field<uint32_t>(j, "chassis_per_rack", {4});
  cfg.slots_per_chassis = field<uint32_t>(j, "slots_per_chassis", {8});
  cfg.outlier_node_count = field<uint32_t>(j, "outlier_node_count", {0});
  cfg.outlier_racks =
      field<std::vector<uint32_t>>(j, "outlier_racks", {{}});
  cfg.congested_callsite = field<uint32_t>(j, "congested_callsite", {0});
  cfg.congestion_multiplier = field<double>(j, "congestion_multiplier", {1.0});
  cfg.compute_time_s = field<double>(j, "compute_time_s", {1.0});
  cfg.jitter_frac = field<double>(j, "jitter_frac", {0.0});
  cfg.seed = field<uint64_t>(j, "seed", {0});
  if (!j.contains("callsites") || !j.at("callsites").is_array())
    raise(errc::invalid_config, "callsites must be an array");
  for (const auto& js : j.at("callsites")) {
    congestion_callsite s;
    s.routine_name = field<std::string>(js, "routine_name");
    s.call_chain = field<std::vector<std::string>>(js, "call_chain", {{}});
    s.base_time_s = field<double>(js, "base_time_s");
    cfg.callsites.push_back(std::move(s));
  }
  return cfg;
}

nlohmann::json truth_to_json(const iter_ground_truth& t) {
  json j;
  j["type"] = "iterative";
  j["anchor_ctx"] = t.anchor_ctx;
  j["kernel_ctx"] = t.kernel_ctx;
  if (t.copy_ctx != k_no_ctx) j["copy_ctx"] = t.copy_ctx;
  j["kernel_time_ns"] = t.kernel_time_ns;
  j["boundaries_ns"] = t.boundaries_ns;
  j["trace_end_ns"] = t.trace_end_ns;
  return j;
}

nlohmann::json truth_to_json(const congestion_ground_truth& t) {
  json j;
  j["type"] = "congestion";
  j["outlier_nodes"] = t.outlier_nodes;
  j["outlier_hostnames"] = t.outlier_hostnames;
  j["outlier_rack_ids"] = t.outlier_rack_ids;
  j["callsite_ctx"] = t.callsite_ctx;
  j["congested_ctx"] = t.congested_ctx;
  j["normal_mean_total_s"] = t.normal_mean_total_s;
  j["outlier_mean_total_s"] = t.outlier_mean_total_s;
  return j;
}

std::pair<store::database_image, nlohmann::json> generate_from_json(
    const nlohmann::json& config) {
  std::string type = field<std::string>(config, "type");
  if (type == "iterative") {
    auto [image, truth] = generate_iterative_scenario(
        iter_config_from_json(config));
    return {std::move(image), truth_to_json(truth)};
  }
  if (type == "congestion") {
    auto [image, truth] = generate_congestion_scenario(
        congestion_config_from_json(config));
    return {std::move(image), truth_to_json(truth)};
  }
  raise(errc::invalid_config, "unknown scenario type: " + type);
}

}  // namespace perfslice::synthgen
