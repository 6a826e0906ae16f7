#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

#include <nlohmann/json.hpp>

#include "core/store.hpp"
#include "core/synthgen.hpp"
#include "helpers.hpp"

using namespace perfslice;
using testutil::scratch_dir;

namespace {

std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

}  // namespace

TEST_CASE("generate_cct: depth one is a single root") {
  auto nodes = synthgen::generate_cct(1, 5, "fn", 0);
  REQUIRE(nodes.size() == 1);
  CHECK(nodes[0].parent == store::k_no_parent);
}

TEST_CASE("generate_cct: deterministic and sized by the closed form") {
  auto a = synthgen::generate_cct(3, 2, "fn", 0);
  auto b = synthgen::generate_cct(3, 2, "fn", 0);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].name == b[i].name);
    CHECK(a[i].kind == b[i].kind);
    CHECK(a[i].parent == b[i].parent);
  }
  // sum over d of fanout^d
  CHECK(a.size() == 1 + 2 + 4);
  CHECK(synthgen::generate_cct(4, 3, "fn", 1).size() == 1 + 3 + 9 + 27);
}

TEST_CASE("one rank, one iteration, one kernel of a second") {
  synthgen::iter_scenario_config cfg;
  cfg.n_ranks = 1;
  cfg.n_iterations = 1;
  synthgen::kernel_spec k;
  k.name = "kernel";
  k.mean_time_s = 1.0;
  cfg.kernels = {k};
  auto [image, truth] = synthgen::generate_iterative_scenario(cfg);

  REQUIRE(image.traces.size() == 1);
  // anchor enter, kernel, exit
  REQUIRE(image.traces[0].events.size() == 3);
  CHECK(image.traces[0].events[0].ctx_id == truth.anchor_ctx);
  CHECK(image.traces[0].events[1].ctx_id == truth.kernel_ctx[0]);
  CHECK(image.traces[0].events[2].ctx_id == 0);
  CHECK(image.traces[0].t_end_ns == 1'000'000'000);

  // Kernel time lands in the profile at exactly one second.
  auto metric = image.meta.find_metric("cputime", store::metric_scope::inclusive);
  REQUIRE(metric.has_value());
  double kernel_time = 0.0;
  for (const auto& r : image.records[1])
    if (r.ctx_id == truth.kernel_ctx[0] && r.metric_id == *metric)
      kernel_time = r.value;
  CHECK(kernel_time == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("identical configs produce byte-identical databases") {
  auto cfg = testutil::small_iter_config(77, 3, 4, 0.3);
  auto [image_a, truth_a] = synthgen::generate_iterative_scenario(cfg);
  auto [image_b, truth_b] = synthgen::generate_iterative_scenario(cfg);
  CHECK(image_a.records == image_b.records);
  CHECK(image_a.traces == image_b.traces);

  scratch_dir da("det_a"), db("det_b");
  store::write_database(image_a, da.path());
  store::write_database(image_b, db.path());
  for (const char* name : {"meta.bin", "profile.db", "trace.db"})
    CHECK(file_bytes(da.path() / name) == file_bytes(db.path() / name));
}

TEST_CASE("profiles equal trace-integrated times") {
  auto cfg = testutil::small_iter_config(5, 3, 6, 0.25);
  auto [image, truth] = synthgen::generate_iterative_scenario(cfg);
  auto cputime_i =
      *image.meta.find_metric("cputime", store::metric_scope::inclusive);
  auto cputime_e =
      *image.meta.find_metric("cputime", store::metric_scope::exclusive);

  for (size_t t = 0; t < image.traces.size(); ++t) {
    const auto& trace = image.traces[t];
    // Integrate the step function per leaf, then roll up the parent chain.
    std::vector<uint64_t> excl(image.meta.contexts.size(), 0);
    for (size_t i = 0; i < trace.events.size(); ++i) {
      uint64_t end = i + 1 < trace.events.size()
                         ? trace.events[i + 1].timestamp_ns
                         : trace.t_end_ns;
      excl[trace.events[i].ctx_id] += end - trace.events[i].timestamp_ns;
    }
    std::vector<uint64_t> incl = excl;
    for (size_t c = image.meta.contexts.size(); c-- > 1;)
      incl[image.meta.contexts[c].parent] += incl[c];

    std::map<std::pair<uint32_t, uint16_t>, double> body;
    for (const auto& r : image.records[t + 1])
      body[{r.ctx_id, r.metric_id}] = r.value;
    for (uint32_t c = 0; c < image.meta.contexts.size(); ++c) {
      double want_i = static_cast<double>(incl[c]) / 1e9;
      double want_e = static_cast<double>(excl[c]) / 1e9;
      auto it_i = body.find({c, cputime_i});
      auto it_e = body.find({c, cputime_e});
      CHECK((it_i == body.end() ? 0.0 : it_i->second) == want_i);
      CHECK((it_e == body.end() ? 0.0 : it_e->second) == want_e);
    }
  }
}

TEST_CASE("ground-truth boundaries are the anchor entry timestamps") {
  auto cfg = testutil::small_iter_config(9, 2, 7, 0.1);
  auto [image, truth] = synthgen::generate_iterative_scenario(cfg);
  for (size_t r = 0; r < cfg.n_ranks; ++r) {
    const auto& trace = image.traces[r];
    std::vector<uint64_t> anchor_entries;
    for (const auto& e : trace.events)
      if (e.ctx_id == truth.anchor_ctx)
        anchor_entries.push_back(e.timestamp_ns);
    CHECK(anchor_entries == truth.boundaries_ns[r]);
    CHECK(anchor_entries.size() == cfg.n_iterations);
  }
}

TEST_CASE("tuned spread reproduces the reference savings figure") {
  auto cfg = testutil::gamess_like_config();
  auto [image, truth] = synthgen::generate_iterative_scenario(cfg);

  // Kernel 0 (j05): per-iteration cross-rank mean 2.963, max 4.650,
  // so per-iteration savings 1.687.
  const auto& matrix = truth.kernel_time_ns[0];
  double savings_total = 0.0;
  for (uint32_t it = 0; it < cfg.n_iterations; ++it) {
    double sum = 0.0, mx = 0.0;
    for (uint32_t r = 0; r < cfg.n_ranks; ++r) {
      double v = static_cast<double>(matrix[r][it]) / 1e9;
      sum += v;
      mx = std::max(mx, v);
    }
    savings_total += mx - sum / cfg.n_ranks;
  }
  double savings_per_iter = savings_total / cfg.n_iterations;
  CHECK(savings_per_iter == doctest::Approx(1.687).epsilon(1e-9));
}

TEST_CASE("congestion: multiplier one leaves every call site in balance") {
  auto cfg = testutil::aurora_like_config(1, 0.0);
  cfg.n_nodes = 40;
  cfg.ranks_per_node = 2;
  cfg.outlier_node_count = 8;
  cfg.outlier_racks = {4000, 4001};
  cfg.congestion_multiplier = 1.0;
  auto [image, truth] = synthgen::generate_congestion_scenario(cfg);

  // All ranks carry identical call-site values.
  std::map<uint32_t, std::set<double>> values_by_ctx;
  for (size_t p = 1; p < image.records.size(); ++p)
    for (const auto& r : image.records[p])
      values_by_ctx[r.ctx_id].insert(r.value);
  for (uint32_t ctx : truth.callsite_ctx)
    CHECK(values_by_ctx[ctx].size() == 1);
}

TEST_CASE("congestion: outliers land in the requested racks, one each") {
  auto cfg = testutil::aurora_like_config(123);
  cfg.n_nodes = 320;
  cfg.outlier_node_count = 50;
  cfg.outlier_racks = {4001, 4003, 4005, 4007};
  auto [image, truth] = synthgen::generate_congestion_scenario(cfg);

  CHECK(truth.outlier_nodes.size() == 50);
  CHECK(truth.outlier_rack_ids == std::vector<uint32_t>{4001, 4003, 4005, 4007});
  const uint32_t nodes_per_rack = cfg.chassis_per_rack * cfg.slots_per_chassis;
  for (uint32_t n : truth.outlier_nodes) {
    uint32_t rack = cfg.rack_id_base + n / nodes_per_rack;
    CHECK(std::find(cfg.outlier_racks.begin(), cfg.outlier_racks.end(), rack) !=
          cfg.outlier_racks.end());
  }
}

TEST_CASE("congestion determinism across runs") {
  auto cfg = testutil::aurora_like_config(99);
  cfg.n_nodes = 64;
  cfg.outlier_node_count = 10;
  cfg.outlier_racks = {4000, 4001};
  auto [a, ta] = synthgen::generate_congestion_scenario(cfg);
  auto [b, tb] = synthgen::generate_congestion_scenario(cfg);
  CHECK(a.records == b.records);
  CHECK(a.traces == b.traces);
  CHECK(ta.outlier_nodes == tb.outlier_nodes);
}

TEST_CASE("invalid configs are rejected") {
  synthgen::iter_scenario_config bad = testutil::small_iter_config();
  bad.n_iterations = 0;
  CHECK_THROWS_AS(synthgen::generate_iterative_scenario(bad), error);

  bad = testutil::small_iter_config();
  bad.kernels[0].within_rank_jitter_frac = 0.5;
  CHECK_THROWS_AS(synthgen::generate_iterative_scenario(bad), error);

  bad = testutil::small_iter_config();
  bad.kernels[0].across_rank_spread = {1.0};  // wrong arity
  CHECK_THROWS_AS(synthgen::generate_iterative_scenario(bad), error);

  auto badc = testutil::aurora_like_config();
  badc.outlier_node_count = badc.n_nodes + 1;
  CHECK_THROWS_AS(synthgen::generate_congestion_scenario(badc), error);
}

TEST_CASE("json config round trip drives the generators") {
  nlohmann::json j = {
      {"type", "iterative"},
      {"n_ranks", 2},
      {"n_iterations", 3},
      {"anchor_name", "loop"},
      {"seed", 5},
      {"kernels",
       {{{"name", "k0"}, {"mean_time_s", 0.5}},
        {{"name", "k1"}, {"mean_time_s", 0.25}}}},
  };
  auto [image, truth] = synthgen::generate_from_json(j);
  CHECK(image.meta.profiles.size() == 3);
  CHECK(truth["type"] == "iterative");
  CHECK(truth["kernel_ctx"].size() == 2);

  nlohmann::json missing = {{"type", "iterative"}, {"n_ranks", 2}};
  CHECK_THROWS_AS(synthgen::generate_from_json(missing), error);
  nlohmann::json unknown = {{"type", "bogus"}};
  CHECK_THROWS_AS(synthgen::generate_from_json(unknown), error);
}
