//
// perfslice CLI: thin client of the libperfslice C API.
//
// Exit codes: 0 success, 2 bad scenario config, 3 query parse error,
// 4 unknown metric, 5 degenerate summary, 6 no periodic anchor,
// 7 clustering found no outlier group, 1 anything else.
//
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "perfslice.h"

namespace {

int exit_code_for(ps_status st) {
  switch (st) {
    case PS_OK: return 0;
    case PS_E_INVALID_CONFIG: return 2;
    case PS_E_PARSE: return 3;
    case PS_E_NO_SUCH_METRIC: return 4;
    case PS_E_DEGENERATE_SUMMARY: return 5;
    case PS_E_NO_PERIODICITY: return 6;
    case PS_E_NO_OUTLIERS: return 7;
    default: return 1;
  }
}

int fail(ps_status st) {
  std::fprintf(stderr, "perfslice: %s: %s\n", ps_status_name(st),
               ps_last_error());
  return exit_code_for(st);
}

struct db_closer {
  void operator()(ps_database* db) const { ps_database_close(db); }
};
struct session_closer {
  void operator()(ps_session* s) const { ps_session_close(s); }
};
struct string_freer {
  void operator()(char* s) const { ps_string_free(s); }
};
using db_ptr = std::unique_ptr<ps_database, db_closer>;
using session_ptr = std::unique_ptr<ps_session, session_closer>;
using out_ptr = std::unique_ptr<char, string_freer>;

struct cli_options {
  std::string db_path;
  unsigned jobs = 0;  // 0 = hardware concurrency
  std::string backend = "par";
  std::string format = "csv";
  double prune_share = 0.01;
  bool drop_lines = false;
  std::vector<std::string> collapse;
  uint64_t seed = 0;
  bool seed_set = false;

  unsigned effective_jobs() const { return backend == "seq" ? 1 : jobs; }
  ps_format fmt() const {
    return format == "json" ? PS_FORMAT_JSON : PS_FORMAT_CSV;
  }
};

int open_db(const cli_options& opt, db_ptr& db) {
  ps_database* raw = nullptr;
  ps_status st = ps_database_open(opt.db_path.c_str(), &raw);
  if (st != PS_OK) return fail(st);
  db.reset(raw);
  return 0;
}

int open_session(const cli_options& opt, ps_database* db, session_ptr& out) {
  std::vector<const char*> globs;
  for (const auto& g : opt.collapse) globs.push_back(g.c_str());
  ps_prune_options prune{};
  prune.min_inclusive_share = opt.prune_share;
  prune.drop_line_contexts = opt.drop_lines ? 1 : 0;
  prune.collapse_globs = globs.empty() ? nullptr : globs.data();
  prune.collapse_count = globs.size();

  ps_session* raw = nullptr;
  ps_status st = ps_session_open(db, &prune, opt.effective_jobs(), &raw);
  if (st != PS_OK) return fail(st);
  out.reset(raw);
  return 0;
}

int print_result(ps_status st, const out_ptr& text) {
  if (st != PS_OK) return fail(st);
  std::fputs(text.get(), stdout);
  size_t len = std::strlen(text.get());
  if (len == 0 || text.get()[len - 1] != '\n') std::fputc('\n', stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Selective analysis of sparse profile/trace databases"};
  app.require_subcommand(1);

  cli_options opt;
  app.add_option("--db", opt.db_path, "Database directory");
  app.add_option("--jobs", opt.jobs,
                 "Worker count (default: hardware concurrency)")
      ->envname("PERFSLICE_JOBS");
  app.add_option("--backend", opt.backend, "seq|par (seq forces 1 worker)")
      ->check(CLI::IsMember({"seq", "par"}));
  app.add_option("--format", opt.format, "csv|json output")
      ->check(CLI::IsMember({"csv", "json"}));
  app.add_option("--prune-share", opt.prune_share,
                 "Minimum inclusive share kept by pruning (default 0.01)");
  app.add_flag("--drop-lines", opt.drop_lines, "Prune line-level contexts");
  app.add_option("--collapse", opt.collapse,
                 "Collapse subtrees below nodes matching GLOB (repeatable)");
  auto* seed_opt =
      app.add_option("--seed", opt.seed, "Override the scenario seed");

  std::string gen_config, gen_out;
  auto* gen = app.add_subcommand("gen", "Generate a synthetic database");
  gen->add_option("config", gen_config, "Scenario config (JSON)")->required();
  gen->add_option("out", gen_out, "Output database directory")->required();

  auto* info = app.add_subcommand("info", "Show database shape");
  auto* validate = app.add_subcommand("validate", "Check format invariants");

  std::string q_exec, q_ctx, q_metric;
  auto* query = app.add_subcommand("query", "Run a slice query");
  query->add_option("exec", q_exec, "summary | rank | rank(lo-hi[:stride])")
      ->required();
  query->add_option("ctx", q_ctx, "* | function(GLOB) | path(G1->G2)")
      ->required();
  query->add_option("metric", q_metric, "name:sum|prop (i|e)")->required();

  std::string imb_metric = "gker";
  double imb_min_share = 0.001;
  auto* imbalance =
      app.add_subcommand("imbalance", "GPU kernel imbalance report");
  imbalance->add_option("--metric", imb_metric, "Kernel-time metric name");
  imbalance->add_option("--min-share", imb_min_share,
                        "Minimum execution share reported");

  std::string iters_anchor = "auto";
  double iters_total = 0.0;
  auto* iters =
      app.add_subcommand("iters", "Iteration model, CVs, and savings");
  iters->add_option("--anchor", iters_anchor, "auto | root | ctx id");
  iters->add_option("--total-time", iters_total,
                    "Application wall time in seconds for the speedup figure");

  std::string cong_glob = "MPI_*", cong_method = "dbscan";
  unsigned cong_k = 2;
  double cong_eps = 0.0;
  auto* congestion =
      app.add_subcommand("congestion", "Localize communication outliers");
  congestion->add_option("--callsite", cong_glob, "Call-site glob");
  congestion->add_option("--cluster", cong_method, "dbscan|kmeans")
      ->check(CLI::IsMember({"dbscan", "kmeans"}));
  congestion->add_option("--k", cong_k, "K-Means group count");
  congestion->add_option("--eps", cong_eps, "DBSCAN radius (0 = auto)");

  std::string bench_suite = "ingest";
  std::vector<uint64_t> bench_sizes;
  unsigned bench_repeat = 10;
  auto* bench = app.add_subcommand("bench", "Timing suites");
  bench->add_option("--suite", bench_suite, "ingest|frame")
      ->check(CLI::IsMember({"ingest", "frame"}));
  bench->add_option("--sizes", bench_sizes, "Sizes to sweep")->delimiter(',');
  bench->add_option("--repeat", bench_repeat, "Trials per measurement");

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);
  opt.seed_set = seed_opt->count() > 0;

  if (gen->parsed()) {
    std::ifstream in(gen_config);
    if (!in) {
      std::fprintf(stderr, "perfslice: cannot read config %s\n",
                   gen_config.c_str());
      return 2;
    }
    std::stringstream buf;
    buf << in.rdbuf();
    std::string config_text = buf.str();
    if (opt.seed_set) {
      try {
        nlohmann::json j = nlohmann::json::parse(config_text);
        j["seed"] = opt.seed;
        config_text = j.dump();
      } catch (const nlohmann::json::exception& e) {
        std::fprintf(stderr, "perfslice: invalid_config: %s\n", e.what());
        return 2;
      }
    }
    ps_status st = ps_generate(config_text.c_str(), gen_out.c_str(), nullptr);
    if (st != PS_OK) return fail(st);
    std::printf("wrote %s\n", gen_out.c_str());
    return 0;
  }

  db_ptr db;
  if (int rc = open_db(opt, db)) return rc;

  if (info->parsed()) {
    char* text = nullptr;
    ps_status st = ps_database_info(db.get(), opt.fmt(), &text);
    return print_result(st, out_ptr(text));
  }

  if (validate->parsed()) {
    char* text = nullptr;
    uint64_t violations = 0;
    ps_status st = ps_database_validate(db.get(), opt.fmt(), &violations, &text);
    int rc = print_result(st, out_ptr(text));
    if (rc != 0) return rc;
    return violations == 0 ? 0 : 1;
  }

  if (bench->parsed()) {
    char* text = nullptr;
    ps_status st = ps_bench(db.get(), bench_suite.c_str(),
                            bench_sizes.empty() ? nullptr : bench_sizes.data(),
                            bench_sizes.size(), bench_repeat,
                            opt.effective_jobs(), opt.seed, &text);
    return print_result(st, out_ptr(text));
  }

  session_ptr session;
  if (int rc = open_session(opt, db.get(), session)) return rc;

  if (query->parsed()) {
    char* text = nullptr;
    ps_status st = ps_query(session.get(), q_exec.c_str(), q_ctx.c_str(),
                            q_metric.c_str(), opt.fmt(), &text);
    return print_result(st, out_ptr(text));
  }

  if (imbalance->parsed()) {
    char* text = nullptr;
    ps_status st = ps_imbalance(session.get(), imb_metric.c_str(),
                                imb_min_share, opt.fmt(), &text);
    return print_result(st, out_ptr(text));
  }

  if (iters->parsed()) {
    char* text = nullptr;
    ps_status st = ps_iterations(session.get(), iters_anchor.c_str(),
                                 iters_total, opt.fmt(), &text);
    return print_result(st, out_ptr(text));
  }

  if (congestion->parsed()) {
    char* text = nullptr;
    ps_status st =
        ps_congestion(session.get(), cong_glob.c_str(), cong_method.c_str(),
                      cong_k, cong_eps, opt.fmt(), &text);
    return print_result(st, out_ptr(text));
  }

  return 0;
}
