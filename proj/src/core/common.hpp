//
// Shared error type and small helpers used across the perfslice core.
//
#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace perfslice {

enum class errc {
  ok = 0,
  io_error,
  format_error,
  invalid_image,
  invalid_config,
  invalid_argument,
  not_found,
  no_summary,
  degenerate_summary,
  parse_error,
  no_such_metric,
  no_such_column,
  type_mismatch,
  length_mismatch,
  no_periodicity,
  no_iterations,
  dangling_context,
  insufficient_data,
  invalid_k,
  empty_input,
  undefined_cv,
  invalid_total,
  no_outliers,
  internal,
};

const char* errc_name(errc c);

class error : public std::runtime_error {
 public:
  error(errc code, std::string message)
      : std::runtime_error(std::move(message)), code_(code) {}
  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void raise(errc code, const std::string& message) {
  throw error(code, message);
}

}  // namespace perfslice
