//
// extern-C surface of libperfslice: opaque handles, status codes, and a
// thread-local last-error message over the C++ core.
//
#include "perfslice.h"

#include <cstdlib>
#include <cstring>
#include <memory>
#include <new>
#include <string>

#include "core/common.hpp"
#include "core/query.hpp"
#include "core/store.hpp"
#include "core/util.hpp"
#include "core/workflows.hpp"

using namespace perfslice;

struct ps_database {
  store::db_handle handle;

  explicit ps_database(store::db_handle h) : handle(std::move(h)) {}
};

struct ps_session {
  std::unique_ptr<query::session> session;
};

namespace {

thread_local std::string t_last_error;

ps_status status_of(errc code) {
  switch (code) {
    case errc::ok: return PS_OK;
    case errc::io_error: return PS_E_IO;
    case errc::format_error: return PS_E_FORMAT;
    case errc::invalid_image: return PS_E_INVALID_IMAGE;
    case errc::invalid_config: return PS_E_INVALID_CONFIG;
    case errc::invalid_argument: return PS_E_INVALID_ARGUMENT;
    case errc::not_found: return PS_E_NOT_FOUND;
    case errc::no_summary: return PS_E_NO_SUMMARY;
    case errc::degenerate_summary: return PS_E_DEGENERATE_SUMMARY;
    case errc::parse_error: return PS_E_PARSE;
    case errc::no_such_metric: return PS_E_NO_SUCH_METRIC;
    case errc::no_periodicity: return PS_E_NO_PERIODICITY;
    case errc::no_iterations: return PS_E_NO_PERIODICITY;
    case errc::no_outliers: return PS_E_NO_OUTLIERS;
    case errc::insufficient_data: return PS_E_INSUFFICIENT_DATA;
    case errc::empty_input: return PS_E_INVALID_ARGUMENT;
    case errc::undefined_cv: return PS_E_INSUFFICIENT_DATA;
    case errc::invalid_total: return PS_E_INVALID_ARGUMENT;
    case errc::invalid_k: return PS_E_INVALID_ARGUMENT;
    case errc::no_such_column: return PS_E_NOT_FOUND;
    case errc::type_mismatch: return PS_E_INVALID_ARGUMENT;
    case errc::length_mismatch: return PS_E_INVALID_ARGUMENT;
    case errc::dangling_context: return PS_E_FORMAT;
    case errc::internal: return PS_E_INTERNAL;
  }
  return PS_E_INTERNAL;
}

template <typename Fn>
ps_status guarded(Fn&& fn) {
  try {
    fn();
    return PS_OK;
  } catch (const error& e) {
    t_last_error = e.what();
    return status_of(e.code());
  } catch (const std::bad_alloc&) {
    t_last_error = "out of memory";
    return PS_E_INTERNAL;
  } catch (const std::exception& e) {
    t_last_error = e.what();
    return PS_E_INTERNAL;
  }
}

char* copy_out(const std::string& s) {
  char* p = static_cast<char*>(::malloc(s.size() + 1));
  if (p == nullptr) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

ps_status require(bool ok, const char* message) {
  if (ok) return PS_OK;
  t_last_error = message;
  return PS_E_INVALID_ARGUMENT;
}

workflows::output_format to_format(ps_format f) {
  return f == PS_FORMAT_JSON ? workflows::output_format::json
                             : workflows::output_format::csv;
}

}  // namespace

extern "C" {

const char* ps_version(void) { return "0.1.0"; }

unsigned ps_default_jobs(void) { return util::default_jobs(); }

const char* ps_status_name(ps_status status) {
  switch (status) {
    case PS_OK: return "ok";
    case PS_E_IO: return "io_error";
    case PS_E_FORMAT: return "format_error";
    case PS_E_INVALID_IMAGE: return "invalid_image";
    case PS_E_NOT_FOUND: return "not_found";
    case PS_E_INVALID_CONFIG: return "invalid_config";
    case PS_E_NO_SUMMARY: return "no_summary";
    case PS_E_DEGENERATE_SUMMARY: return "degenerate_summary";
    case PS_E_PARSE: return "parse_error";
    case PS_E_NO_SUCH_METRIC: return "no_such_metric";
    case PS_E_NO_PERIODICITY: return "no_periodicity";
    case PS_E_NO_OUTLIERS: return "no_outliers";
    case PS_E_INSUFFICIENT_DATA: return "insufficient_data";
    case PS_E_INVALID_ARGUMENT: return "invalid_argument";
    case PS_E_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* ps_last_error(void) { return t_last_error.c_str(); }

void ps_string_free(char* s) { ::free(s); }

ps_status ps_generate(const char* scenario_json, const char* out_dir,
                      char** truth_json_out) {
  if (ps_status st = require(scenario_json && out_dir,
                             "scenario_json and out_dir are required"))
    return st;
  return guarded([&] {
    std::string truth = workflows::generate_database(scenario_json, out_dir);
    if (truth_json_out != nullptr) *truth_json_out = copy_out(truth);
  });
}

ps_status ps_database_open(const char* dir, ps_database** out) {
  if (ps_status st = require(dir && out, "dir and out are required")) return st;
  *out = nullptr;
  return guarded([&] {
    auto db = std::make_unique<ps_database>(store::db_handle::open(dir));
    *out = db.release();
  });
}

void ps_database_close(ps_database* db) { delete db; }

ps_status ps_database_info(const ps_database* db, ps_format format,
                           char** out) {
  if (ps_status st = require(db && out, "db and out are required")) return st;
  return guarded([&] {
    *out = copy_out(workflows::database_info(db->handle, to_format(format)));
  });
}

ps_status ps_database_validate(const ps_database* db, ps_format format,
                               uint64_t* violations, char** out) {
  if (ps_status st = require(db && out, "db and out are required")) return st;
  return guarded([&] {
    auto [text, count] = workflows::validate(db->handle, to_format(format));
    if (violations != nullptr) *violations = count;
    *out = copy_out(text);
  });
}

ps_status ps_session_open(ps_database* db, const ps_prune_options* prune,
                          unsigned jobs, ps_session** out) {
  if (ps_status st = require(db && out, "db and out are required")) return st;
  *out = nullptr;
  return guarded([&] {
    workflows::session_options opt;
    opt.jobs = jobs;
    if (prune != nullptr) {
      opt.min_inclusive_share = prune->min_inclusive_share;
      opt.drop_line_contexts = prune->drop_line_contexts != 0;
      for (size_t i = 0; i < prune->collapse_count; ++i)
        opt.collapse_globs.emplace_back(prune->collapse_globs[i]);
    }
    auto session = std::make_unique<ps_session>();
    session->session = workflows::open_session(db->handle, opt);
    *out = session.release();
  });
}

void ps_session_close(ps_session* session) { delete session; }

ps_status ps_query(ps_session* session, const char* exec, const char* ctx,
                   const char* metric, ps_format format, char** out) {
  if (ps_status st = require(session && exec && ctx && metric && out,
                             "session, query strings, and out are required"))
    return st;
  return guarded([&] {
    *out = copy_out(workflows::run_query(*session->session, exec, ctx, metric,
                                         to_format(format)));
  });
}

ps_status ps_imbalance(ps_session* session, const char* metric_name,
                       double min_share, ps_format format, char** out) {
  if (ps_status st = require(session && metric_name && out,
                             "session, metric_name, and out are required"))
    return st;
  return guarded([&] {
    *out = copy_out(workflows::imbalance_report(*session->session, metric_name,
                                                min_share, to_format(format)));
  });
}

ps_status ps_iterations(ps_session* session, const char* anchor,
                        double total_time_s, ps_format format, char** out) {
  if (ps_status st = require(session && anchor && out,
                             "session, anchor, and out are required"))
    return st;
  return guarded([&] {
    workflows::iterations_options opt;
    opt.anchor = anchor;
    opt.total_time_s = total_time_s;
    *out = copy_out(workflows::iterations_report(*session->session, opt,
                                                 to_format(format)));
  });
}

ps_status ps_congestion(ps_session* session, const char* callsite_glob,
                        const char* method, unsigned k, double eps,
                        ps_format format, char** out) {
  if (ps_status st = require(session && callsite_glob && method && out,
                             "session, callsite_glob, method, and out are "
                             "required"))
    return st;
  return guarded([&] {
    workflows::congestion_options opt;
    opt.callsite_glob = callsite_glob;
    opt.method = method;
    opt.k = k;
    opt.eps = eps;
    *out = copy_out(workflows::congestion_report(*session->session, opt,
                                                 to_format(format)));
  });
}

ps_status ps_bench(ps_database* db, const char* suite, const uint64_t* sizes,
                   size_t n_sizes, unsigned repeat, unsigned jobs,
                   uint64_t seed, char** out) {
  if (ps_status st = require(db && suite && out,
                             "db, suite, and out are required"))
    return st;
  return guarded([&] {
    workflows::bench_options opt;
    opt.suite = suite;
    if (sizes != nullptr) opt.sizes.assign(sizes, sizes + n_sizes);
    opt.repeat = repeat;
    opt.jobs = jobs;
    opt.seed = seed;
    *out = copy_out(workflows::bench(db->handle, opt));
  });
}

}  // extern "C"
