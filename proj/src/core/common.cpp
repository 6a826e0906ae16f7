#include "common.hpp"

namespace perfslice {

const char* errc_name(errc c) {
  switch (c) {
    case errc::ok: return "ok";
    case errc::io_error: return "io_error";
    case errc::format_error: return "format_error";
    case errc::invalid_image: return "invalid_image";
    case errc::invalid_config: return "invalid_config";
    case errc::invalid_argument: return "invalid_argument";
    case errc::not_found: return "not_found";
    case errc::no_summary: return "no_summary";
    case errc::degenerate_summary: return "degenerate_summary";
    case errc::parse_error: return "parse_error";
    case errc::no_such_metric: return "no_such_metric";
    case errc::no_such_column: return "no_such_column";
    case errc::type_mismatch: return "type_mismatch";
    case errc::length_mismatch: return "length_mismatch";
    case errc::no_periodicity: return "no_periodicity";
    case errc::no_iterations: return "no_iterations";
    case errc::dangling_context: return "dangling_context";
    case errc::insufficient_data: return "insufficient_data";
    case errc::invalid_k: return "invalid_k";
    case errc::empty_input: return "empty_input";
    case errc::undefined_cv: return "undefined_cv";
    case errc::invalid_total: return "invalid_total";
    case errc::no_outliers: return "no_outliers";
    case errc::internal: return "internal";
  }
  return "unknown";
}

}  // namespace perfslice
