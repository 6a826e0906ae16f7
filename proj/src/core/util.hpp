//
// Cross-module utilities: the deterministic PRNG every generator shares,
// a bounded worker pool, anchored glob matching, and CSV field quoting.
//
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>

namespace perfslice::util {

// xorshift64* with the low state bit forced on so a zero seed is usable.
// All synthetic-data jitter is drawn from this generator so identical
// configs reproduce identical databases.
class xorshift64s {
 public:
  explicit xorshift64s(uint64_t seed) : state_(seed | 1u) {}

  uint64_t next() {
    uint64_t x = state_;
    x ^= x >> 12;
    x ^= x << 25;
    x ^= x >> 27;
    state_ = x;
    return x * 0x2545F4914F6CDD1DULL;
  }

  // Uniform in [0, 1).
  double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform in [-1, 1).
  double next_signed_unit() { return 2.0 * next_unit() - 1.0; }

  // Uniform in [0, n).
  uint64_t next_below(uint64_t n) { return n == 0 ? 0 : next() % n; }

 private:
  uint64_t state_;
};

// Runs fn(i) for i in [0, n) on up to `jobs` threads. Work is handed out in
// chunks through an atomic cursor; callers own output determinism by writing
// to index-addressed slots. The first exception thrown by any worker is
// rethrown on the calling thread after all workers join.
void parallel_for(std::size_t n, unsigned jobs,
                  const std::function<void(std::size_t)>& fn);

unsigned default_jobs();

// Anchored glob match supporting '*' and '?'. Case-sensitive; the pattern
// must cover the whole name.
bool glob_match(std::string_view pattern, std::string_view name);

// RFC 4180 field quoting: wraps in quotes when the field contains a comma,
// quote, or newline, doubling embedded quotes.
std::string csv_field(std::string_view field);

std::string format_double(double v);

}  // namespace perfslice::util
