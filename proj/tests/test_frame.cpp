#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <bit>
#include <cmath>

#include "core/frame.hpp"
#include "core/util.hpp"

using namespace perfslice;
using frame::agg_fn;
using frame::backend;
using frame::cmp_op;
using frame::column;
using frame::dtype;
using frame::table;

namespace {

// Bitwise table equality: doubles compare by bit pattern, not by value.
bool bit_equal(const column& a, const column& b) {
  if (a.name() != b.name() || a.type() != b.type() || a.size() != b.size())
    return false;
  if (a.type() == dtype::f64) {
    for (std::size_t i = 0; i < a.size(); ++i)
      if (std::bit_cast<uint64_t>(a.f64s()[i]) !=
          std::bit_cast<uint64_t>(b.f64s()[i]))
        return false;
    return true;
  }
  return a == b;
}

bool bit_equal(const table& a, const table& b) {
  if (a.n_cols() != b.n_cols()) return false;
  for (std::size_t c = 0; c < a.n_cols(); ++c)
    if (!bit_equal(a.columns()[c], b.columns()[c])) return false;
  return true;
}

// Random table with mixed dtypes and low-cardinality keys.
table random_table(util::xorshift64s& rng, std::size_t n) {
  std::vector<uint64_t> key(n);
  std::vector<int64_t> group(n);
  std::vector<double> value(n);
  std::vector<std::string> tag(n);
  uint64_t cardinality = 1 + rng.next_below(std::max<uint64_t>(1, n / 4 + 1));
  for (std::size_t i = 0; i < n; ++i) {
    key[i] = rng.next_below(cardinality);
    group[i] = static_cast<int64_t>(rng.next_below(7)) - 3;
    value[i] = rng.next_unit() * 100.0 - 50.0;
    tag[i] = "t" + std::to_string(rng.next_below(5));
  }
  table t;
  t.add(column::of_u64("key", std::move(key)));
  t.add(column::of_i64("group", std::move(group)));
  t.add(column::of_f64("value", std::move(value)));
  t.add(column::of_str("tag", std::move(tag)));
  return t;
}

const backend seq = backend::seq();
const backend par = backend::par(4);

}  // namespace

TEST_CASE("group sum over a two-row group") {
  table t;
  t.add(column::of_u64("ctx", {1, 1}));
  t.add(column::of_f64("v", {2.0, 3.0}));
  table g = frame::group_aggregate(t, {"ctx"}, {{"v", agg_fn::sum}}, seq);
  REQUIRE(g.n_rows() == 1);
  CHECK(g.col("ctx").u64s()[0] == 1);
  CHECK(g.col("v_sum").f64s()[0] == 5.0);
}

TEST_CASE("grouping single-row groups sorts by key") {
  table t;
  t.add(column::of_u64("k", {3, 1, 2}));
  t.add(column::of_f64("v", {30.0, 10.0, 20.0}));
  table g = frame::group_aggregate(t, {"k"}, {{"v", agg_fn::sum}}, seq);
  CHECK(g.col("k").u64s() == std::vector<uint64_t>{1, 2, 3});
  CHECK(g.col("v_sum").f64s() == std::vector<double>{10.0, 20.0, 30.0});
}

TEST_CASE("count totals equal the input row count") {
  util::xorshift64s rng(17);
  table t = random_table(rng, 500);
  table g = frame::group_aggregate(t, {"key"}, {{"value", agg_fn::count}}, seq);
  uint64_t total = 0;
  for (uint64_t c : g.col("value_count").u64s()) total += c;
  CHECK(total == t.n_rows());
}

TEST_CASE("NaN in an aggregate column is rejected") {
  table t;
  t.add(column::of_u64("k", {1, 1}));
  t.add(column::of_f64("v", {1.0, std::nan("")}));
  CHECK_THROWS_AS(frame::group_aggregate(t, {"k"}, {{"v", agg_fn::sum}}, seq),
                  error);
}

TEST_CASE("missing column and non-numeric aggregate raise typed errors") {
  table t;
  t.add(column::of_str("s", {"a"}));
  try {
    frame::group_aggregate(t, {"nope"}, {}, seq);
    FAIL("expected no_such_column");
  } catch (const error& e) {
    CHECK(e.code() == errc::no_such_column);
  }
  try {
    frame::group_aggregate(t, {"s"}, {{"s", agg_fn::sum}}, seq);
    FAIL("expected type_mismatch");
  } catch (const error& e) {
    CHECK(e.code() == errc::type_mismatch);
  }
}

TEST_CASE("sort is stable and matches a reference sort") {
  table t;
  t.add(column::of_u64("k", {2, 1, 2, 1, 2}));
  t.add(column::of_i64("order", {0, 1, 2, 3, 4}));
  table s = frame::sort(t, {"k"}, {}, seq);
  CHECK(s.col("order").i64s() == std::vector<int64_t>{1, 3, 0, 2, 4});

  // Sorting by a constant key is the identity.
  table c;
  c.add(column::of_u64("k", {7, 7, 7}));
  c.add(column::of_i64("v", {3, 1, 2}));
  table cs = frame::sort(c, {"k"}, {}, seq);
  CHECK(cs.col("v").i64s() == std::vector<int64_t>{3, 1, 2});
}

TEST_CASE("descending sort of unique keys reverses ascending") {
  table t;
  t.add(column::of_f64("v", {3.5, -1.0, 2.0, 10.0}));
  table asc = frame::sort(t, {"v"}, {true}, seq);
  table desc = frame::sort(t, {"v"}, {false}, seq);
  auto rev = desc.col("v").f64s();
  std::reverse(rev.begin(), rev.end());
  CHECK(asc.col("v").f64s() == rev);
}

TEST_CASE("filter keeps matching rows in order") {
  table t;
  t.add(column::of_f64("v", {1.0, 5.0, 3.0, 5.0}));
  t.add(column::of_i64("i", {0, 1, 2, 3}));
  table f = frame::filter(t, "v", cmp_op::eq, frame::literal(5.0), seq);
  CHECK(f.col("i").i64s() == std::vector<int64_t>{1, 3});

  table all = frame::filter(t, "v", cmp_op::ge, frame::literal(-100.0), seq);
  CHECK(bit_equal(all, t));
  table none = frame::filter(t, "v", cmp_op::gt, frame::literal(100.0), seq);
  CHECK(none.n_rows() == 0);

  CHECK_THROWS_AS(
      frame::filter(t, "v", cmp_op::eq, frame::literal(int64_t{5}), seq),
      error);
}

TEST_CASE("merge: inner join semantics") {
  table left;
  left.add(column::of_u64("k", {1, 2, 3, 2}));
  left.add(column::of_f64("lv", {10, 20, 30, 21}));
  table right;
  right.add(column::of_u64("k", {2, 4, 2}));
  right.add(column::of_f64("rv", {200, 400, 201}));

  table j = frame::merge(left, right, {"k"}, seq);
  // Left rows 1 and 3 match right rows 0 and 2, ordered by (left, right).
  CHECK(j.n_rows() == 4);
  CHECK(j.col("k").u64s() == std::vector<uint64_t>{2, 2, 2, 2});
  CHECK(j.col("lv").f64s() == std::vector<double>{20, 20, 21, 21});
  CHECK(j.col("rv").f64s() == std::vector<double>{200, 201, 200, 201});

  // Self-join on a unique key keeps the row count.
  table uniq;
  uniq.add(column::of_u64("k", {5, 6, 7}));
  uniq.add(column::of_f64("v", {1, 2, 3}));
  table selfj = frame::merge(uniq, uniq, {"k"}, seq);
  CHECK(selfj.n_rows() == 3);
  CHECK(selfj.find("v_r") != nullptr);  // collision suffix

  table empty;
  empty.add(column::of_u64("k", {}));
  CHECK(frame::merge(uniq, empty, {"k"}, seq).n_rows() == 0);
}

TEST_CASE("vector ops: identities and algebraic oracle") {
  column v = column::of_f64("v", [] {
    util::xorshift64s rng(4);
    std::vector<double> out(10'000);
    for (auto& x : out) x = rng.next_unit() - 0.5;
    return out;
  }());

  CHECK_THROWS_AS(frame::vector_add(v, column::of_f64("w", {1.0}), seq), error);
  column same = frame::vector_add(
      v, column::of_f64("z", std::vector<double>(v.size(), 0.0)), seq);
  CHECK(bit_equal(same, column::of_f64("v", v.f64s())));

  column cs = frame::cumulative_sum(column::of_f64("c", {1.0, 1.0, 1.0}), seq);
  CHECK(cs.f64s() == std::vector<double>{1.0, 2.0, 3.0});

  // reduce_sum equals the last cumulative element bit-exactly, block math
  // crossing multiple 4096 blocks included.
  column cum = frame::cumulative_sum(v, seq);
  double red = frame::reduce_sum(v, seq);
  CHECK(std::bit_cast<uint64_t>(red) ==
        std::bit_cast<uint64_t>(cum.f64s().back()));

  CHECK(frame::reduce_sum(column::of_f64("e", {}), seq) == 0.0);

  column scaled = frame::in_place_multiply(v, 2.0, seq);
  for (std::size_t i = 0; i < 10; ++i)
    CHECK(scaled.f64s()[i] == v.f64s()[i] * 2.0);

  column flags = frame::scalar_compare(v, cmp_op::lt, 0.0, seq);
  for (std::size_t i = 0; i < v.size(); ++i)
    CHECK(flags.i64s()[i] == (v.f64s()[i] < 0.0 ? 1 : 0));
}

TEST_CASE("parallel backend is bit-identical to sequential across all ops") {
  util::xorshift64s rng(2024);
  for (int trial = 0; trial < 120; ++trial) {
    // Log-uniform sizes up to ~20k keep the suite quick; the acceptance
    // binary runs the full-size sweep.
    std::size_t n = static_cast<std::size_t>(
        std::exp(rng.next_unit() * std::log(20'000.0)));
    if (rng.next_below(10) == 0) n = 0;
    table t = random_table(rng, n);
    table u = random_table(rng, n / 2 + 1);

    CHECK(bit_equal(
        frame::group_aggregate(t, {"key", "group"},
                               {{"value", agg_fn::sum},
                                {"value", agg_fn::mean},
                                {"value", agg_fn::min},
                                {"value", agg_fn::max},
                                {"value", agg_fn::count}},
                               seq),
        frame::group_aggregate(t, {"key", "group"},
                               {{"value", agg_fn::sum},
                                {"value", agg_fn::mean},
                                {"value", agg_fn::min},
                                {"value", agg_fn::max},
                                {"value", agg_fn::count}},
                               par)));
    CHECK(bit_equal(frame::sort(t, {"value", "key"}, {true, false}, seq),
                    frame::sort(t, {"value", "key"}, {true, false}, par)));
    CHECK(bit_equal(
        frame::filter(t, "value", cmp_op::lt, frame::literal(0.0), seq),
        frame::filter(t, "value", cmp_op::lt, frame::literal(0.0), par)));
    CHECK(bit_equal(frame::merge(t, u, {"key"}, seq),
                    frame::merge(t, u, {"key"}, par)));

    if (n > 0) {
      const column& v = t.col("value");
      CHECK(bit_equal(frame::vector_add(v, v, seq),
                      frame::vector_add(v, v, par)));
      CHECK(bit_equal(frame::in_place_multiply(v, 1.0001, seq),
                      frame::in_place_multiply(v, 1.0001, par)));
      CHECK(std::bit_cast<uint64_t>(frame::reduce_sum(v, seq)) ==
            std::bit_cast<uint64_t>(frame::reduce_sum(v, par)));
      CHECK(bit_equal(frame::cumulative_sum(v, seq),
                      frame::cumulative_sum(v, par)));
      CHECK(bit_equal(frame::scalar_compare(v, cmp_op::ge, 0.0, seq),
                      frame::scalar_compare(v, cmp_op::ge, 0.0, par)));
    }
  }
}

TEST_CASE("csv rendering quotes per RFC 4180") {
  table t;
  t.add(column::of_str("name", {"plain", "with,comma", "with\"quote"}));
  t.add(column::of_i64("n", {1, 2, 3}));
  CHECK(t.to_csv() ==
        "name,n\nplain,1\n\"with,comma\",2\n\"with\"\"quote\",3\n");
}
