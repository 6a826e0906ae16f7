// Exercises the shared-library surface the CLI is built on, through
// perfslice.h only.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <atomic>
#include <cstring>
#include <filesystem>
#include <string>

#include <perfslice.h>

namespace {

class scratch_dir {
 public:
  explicit scratch_dir(const std::string& tag) {
    static std::atomic<uint64_t> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("perfslice_capi_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~scratch_dir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string str() const { return path_.string(); }

 private:
  std::filesystem::path path_;
};

const char* k_iter_config = R"({
  "type": "iterative",
  "n_ranks": 4,
  "n_iterations": 5,
  "anchor_name": "solver_loop",
  "copy_segment_s": 0.002,
  "seed": 11,
  "kernels": [
    {"name": "kernel_a", "mean_time_s": 0.4,
     "across_rank_spread": [1.6, 0.8, 0.8, 0.8]},
    {"name": "kernel_b", "mean_time_s": 0.1}
  ]
})";

const char* k_congestion_config = R"({
  "type": "congestion",
  "n_nodes": 32,
  "ranks_per_node": 2,
  "outlier_node_count": 6,
  "outlier_racks": [4000],
  "compute_time_s": 1.0,
  "congestion_multiplier": 4.0,
  "jitter_frac": 0.01,
  "seed": 3,
  "callsites": [
    {"routine_name": "MPI_Allreduce",
     "call_chain": ["hypre_GMRESSetup", "hypre_BoomerAMGSetup"],
     "base_time_s": 0.5},
    {"routine_name": "MPI_Waitall",
     "call_chain": ["hypre_ParCSRMatrixMatvec"],
     "base_time_s": 0.2}
  ]
})";

struct owned {
  char* p = nullptr;
  ~owned() { ps_string_free(p); }
};

}  // namespace

TEST_CASE("generate, open, info, validate") {
  scratch_dir dir("gen");
  owned truth;
  REQUIRE(ps_generate(k_iter_config, dir.str().c_str(), &truth.p) == PS_OK);
  CHECK(std::string(truth.p).find("anchor_ctx") != std::string::npos);
  CHECK(std::filesystem::exists(dir.str() + "/truth.json"));

  ps_database* db = nullptr;
  REQUIRE(ps_database_open(dir.str().c_str(), &db) == PS_OK);

  owned info;
  REQUIRE(ps_database_info(db, PS_FORMAT_JSON, &info.p) == PS_OK);
  CHECK(std::string(info.p).find("\"profiles\": 5") != std::string::npos);

  owned report;
  uint64_t violations = 99;
  REQUIRE(ps_database_validate(db, PS_FORMAT_CSV, &violations, &report.p) ==
          PS_OK);
  CHECK(violations == 0);

  ps_database_close(db);
}

TEST_CASE("bad inputs produce typed statuses and messages") {
  CHECK(ps_generate("{not json", "/tmp/unused_psx", nullptr) ==
        PS_E_INVALID_CONFIG);
  CHECK(std::strlen(ps_last_error()) > 0);

  ps_database* db = nullptr;
  CHECK(ps_database_open("/nonexistent/psx", &db) == PS_E_IO);
  CHECK(ps_database_open(nullptr, &db) == PS_E_INVALID_ARGUMENT);
  CHECK(std::string(ps_status_name(PS_E_PARSE)) == "parse_error");
}

TEST_CASE("session: query, imbalance, iterations") {
  scratch_dir dir("session");
  REQUIRE(ps_generate(k_iter_config, dir.str().c_str(), nullptr) == PS_OK);
  ps_database* db = nullptr;
  REQUIRE(ps_database_open(dir.str().c_str(), &db) == PS_OK);
  ps_session* session = nullptr;
  REQUIRE(ps_session_open(db, nullptr, 2, &session) == PS_OK);

  owned rows;
  REQUIRE(ps_query(session, "rank", "function(kernel_*)", "cputime:prop (i)",
                   PS_FORMAT_CSV, &rows.p) == PS_OK);
  CHECK(std::string(rows.p).find("profile_id,rank,ctx_id,metric_id,value") == 0);

  owned bad;
  CHECK(ps_query(session, "rank(5-3)", "*", "cputime:sum (i)", PS_FORMAT_CSV,
                 &bad.p) == PS_E_PARSE);
  CHECK(ps_query(session, "rank", "*", "nope:sum (i)", PS_FORMAT_CSV,
                 &bad.p) == PS_E_NO_SUCH_METRIC);

  owned imb;
  REQUIRE(ps_imbalance(session, "gker", 0.001, PS_FORMAT_JSON, &imb.p) ==
          PS_OK);
  CHECK(std::string(imb.p).find("kernel_a") != std::string::npos);

  owned iters;
  REQUIRE(ps_iterations(session, "auto", 0.0, PS_FORMAT_JSON, &iters.p) ==
          PS_OK);
  std::string iters_text = iters.p;
  CHECK(iters_text.find("\"name\": \"solver_loop\"") != std::string::npos);
  CHECK(iters_text.find("speedup_frac") != std::string::npos);

  ps_session_close(session);
  ps_database_close(db);
}

TEST_CASE("congestion report and bench through the C surface") {
  scratch_dir dir("cong");
  REQUIRE(ps_generate(k_congestion_config, dir.str().c_str(), nullptr) ==
          PS_OK);
  ps_database* db = nullptr;
  REQUIRE(ps_database_open(dir.str().c_str(), &db) == PS_OK);
  ps_session* session = nullptr;
  ps_prune_options prune{};
  prune.min_inclusive_share = 0.01;
  REQUIRE(ps_session_open(db, &prune, 2, &session) == PS_OK);

  owned report;
  REQUIRE(ps_congestion(session, "MPI_*", "dbscan", 2, 0.0, PS_FORMAT_JSON,
                        &report.p) == PS_OK);
  std::string text = report.p;
  CHECK(text.find("\"off_block\": 0") != std::string::npos);
  CHECK(text.find("hypre_GMRESSetup") != std::string::npos);

  owned bench;
  uint64_t sizes[] = {8, 32};
  REQUIRE(ps_bench(db, "ingest", sizes, 2, 2, 2, 0, &bench.p) == PS_OK);
  std::string bench_text = bench.p;
  CHECK(bench_text.find("suite,size,op,parallelism,mean_s") == 0);

  ps_session_close(session);
  ps_database_close(db);
}

TEST_CASE("uniform database yields no outlier group") {
  scratch_dir dir("uniform");
  std::string config = k_congestion_config;
  auto patch = [&](const char* from, const char* to) {
    auto pos = config.find(from);
    REQUIRE(pos != std::string::npos);
    config.replace(pos, std::strlen(from), to);
  };
  patch("\"congestion_multiplier\": 4.0", "\"congestion_multiplier\": 1.0");
  patch("\"jitter_frac\": 0.01", "\"jitter_frac\": 0.0");
  REQUIRE(ps_generate(config.c_str(), dir.str().c_str(), nullptr) == PS_OK);

  ps_database* db = nullptr;
  REQUIRE(ps_database_open(dir.str().c_str(), &db) == PS_OK);
  ps_session* session = nullptr;
  REQUIRE(ps_session_open(db, nullptr, 2, &session) == PS_OK);
  owned report;
  CHECK(ps_congestion(session, "MPI_*", "dbscan", 2, 0.0, PS_FORMAT_JSON,
                      &report.p) == PS_E_NO_OUTLIERS);
  ps_session_close(session);
  ps_database_close(db);
}
