//
// Columnar table engine with a sequential reference backend and a parallel
// backend that must produce bit-identical results.
//
// Determinism contract: every operation defines one canonical result.
// Floating-point aggregation order is fixed: group sums accumulate in
// ascending original row index, and reductions/scans use fold-left within
// 4096-element blocks combined fold-left across blocks. The parallel
// backend therefore reproduces the sequential bits exactly, and reduce_sum
// equals the last element of cumulative_sum.
//
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "common.hpp"

namespace perfslice::frame {

enum class dtype { i64 = 0, u64 = 1, f64 = 2, str = 3 };

class column {
 public:
  using storage = std::variant<std::vector<int64_t>, std::vector<uint64_t>,
                               std::vector<double>, std::vector<std::string>>;

  column() = default;
  column(std::string name, storage data)
      : name_(std::move(name)), data_(std::move(data)) {}

  static column of_i64(std::string name, std::vector<int64_t> v);
  static column of_u64(std::string name, std::vector<uint64_t> v);
  static column of_f64(std::string name, std::vector<double> v);
  static column of_str(std::string name, std::vector<std::string> v);

  const std::string& name() const { return name_; }
  void rename(std::string name) { name_ = std::move(name); }
  dtype type() const { return static_cast<dtype>(data_.index()); }
  std::size_t size() const;

  const std::vector<int64_t>& i64s() const;
  const std::vector<uint64_t>& u64s() const;
  const std::vector<double>& f64s() const;
  const std::vector<std::string>& strs() const;
  std::vector<double>& f64s_mut();

  const storage& data() const { return data_; }

  friend bool operator==(const column&, const column&) = default;

 private:
  std::string name_;
  storage data_;
};

class table {
 public:
  table() = default;

  void add(column c);  // enforces unique names and equal lengths
  std::size_t n_rows() const;
  std::size_t n_cols() const { return columns_.size(); }
  const std::vector<column>& columns() const { return columns_; }
  const column& col(std::string_view name) const;  // throws no_such_column
  const column* find(std::string_view name) const;

  std::string to_csv() const;  // header row + RFC 4180 quoting

  friend bool operator==(const table&, const table&) = default;

 private:
  std::vector<column> columns_;
};

struct backend {
  enum class kind { sequential, parallel };
  kind mode = kind::sequential;
  unsigned workers = 1;

  static backend seq() { return {kind::sequential, 1}; }
  static backend par(unsigned workers);
};

enum class agg_fn { sum, mean, min, max, count };
const char* agg_fn_name(agg_fn fn);

struct agg_spec {
  std::string column;
  agg_fn fn = agg_fn::sum;
};

enum class cmp_op { lt, le, eq, ge, gt, ne };

using literal = std::variant<int64_t, uint64_t, double, std::string>;

// One row per distinct key tuple, sorted ascending by key tuple. Aggregate
// columns are named "<column>_<fn>"; float sums accumulate in ascending
// original row index.
table group_aggregate(const table& t, const std::vector<std::string>& keys,
                      const std::vector<agg_spec>& aggs, backend b);

// Stable multi-key sort; `ascending` has one flag per key (empty = all
// ascending).
table sort(const table& t, const std::vector<std::string>& keys,
           const std::vector<bool>& ascending, backend b);

// Rows satisfying (col <op> literal), original order preserved.
table filter(const table& t, const std::string& column, cmp_op op,
             const literal& lit, backend b);

// Inner join on `on`; output ordered by (left row index, right row index);
// right non-key columns are appended, suffixed "_r" on name collision.
table merge(const table& left, const table& right,
            const std::vector<std::string>& on, backend b);

column vector_add(const column& a, const column& b, backend be);
column in_place_multiply(const column& a, double scalar, backend be);
double reduce_sum(const column& a, backend be);
column cumulative_sum(const column& a, backend be);
// i64 column of 0/1 flags.
column scalar_compare(const column& a, cmp_op op, double s, backend be);

constexpr std::size_t k_reduce_block = 4096;

}  // namespace perfslice::frame
