#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "tsbench/error.hpp"
#include "tsbench/rng.hpp"
#include "tsbench/series.hpp"

using namespace tsbench;

TEST_CASE("printed precision switches at magnitude 100") {
  CHECK(format_value(0.0587) == "0.05870");
  CHECK(format_value(99.999994) == "99.99999");
  CHECK(format_value(100.0) == "100.000");
  CHECK(format_value(-1234.56789) == "-1234.568");
  CHECK(format_value(-0.000001) == "0.00000");
  CHECK(printed_decimals(-99.5) == 5);
  CHECK(printed_decimals(-100.0) == 3);
}

TEST_CASE("printed() is the value of the printed text") {
  Rng rng(7);
  for (int i = 0; i < 2000; ++i) {
    const double v = rng.uniform(-5000.0, 5000.0) * std::pow(10.0, -static_cast<int>(rng.index(5)));
    const double p = printed(v);
    CHECK(std::fabs(p - v) <= printed_tolerance(printed_decimals(v)) + 1e-12);
    CHECK(format_value(p) == format_value(v));
  }
}

TEST_CASE("parse_number is strict") {
  double v = 0.0;
  CHECK(parse_number("0.0587", v));
  CHECK(v == 0.0587);
  CHECK(parse_number("+3", v));
  CHECK(v == 3.0);
  CHECK(parse_number("-1e-3", v));
  CHECK(v == -0.001);
  CHECK_FALSE(parse_number("", v));
  CHECK_FALSE(parse_number("1.0x", v));
  CHECK_FALSE(parse_number(" 1.0", v));
  CHECK_FALSE(parse_number("nan", v));
  CHECK_FALSE(parse_number("inf", v));
}

TEST_CASE("validate_series rejects short and non-finite input") {
  Series s;
  s.values = {1.0};
  CHECK_THROWS_AS(validate_series(s), Error);
  s.values = {1.0, NAN, 2.0};
  try {
    validate_series(s);
    FAIL("expected a throw");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::invalid_series);
  }
  s.values = {1.0, 2.0};
  CHECK_NOTHROW(validate_series(s));
}

TEST_CASE("rng streams are reproducible and independent") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next() == b.next());

  const Rng parent(42);
  Rng s1 = parent.stream("minmax"), s2 = parent.stream("minmax"), s3 = parent.stream("start_end");
  CHECK(s1.next() == s2.next());
  CHECK(s1.next() != s3.next());
  CHECK(derive_seed(1, 0) != derive_seed(2, 0));
  CHECK(derive_seed(1, "a") != derive_seed(1, "b"));
}

TEST_CASE("uniform_int stays in bounds and hits every value") {
  Rng rng(3);
  std::set<std::int64_t> seen;
  for (int i = 0; i < 5000; ++i) {
    const auto v = rng.uniform_int(-3, 3);
    REQUIRE(v >= -3);
    REQUIRE(v <= 3);
    seen.insert(v);
  }
  CHECK(seen.size() == 7);
  CHECK(rng.uniform_int(5, 5) == 5);
  CHECK(rng.index(0) == 0);
}

TEST_CASE("index draws are close to uniform") {
  Rng rng(11);
  std::array<int, 4> counts{};
  const int n = 40000;
  for (int i = 0; i < n; ++i) ++counts[rng.index(4)];
  for (int c : counts) CHECK(std::fabs(c / static_cast<double>(n) - 0.25) < 0.01);
}

TEST_CASE("normal draws have unit moments") {
  Rng rng(5);
  double sum = 0.0, sq = 0.0;
  const int n = 50000;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  CHECK(std::fabs(sum / n) < 0.02);
  CHECK(std::fabs(sq / n - 1.0) < 0.03);
}

TEST_CASE("shuffle is a seeded permutation") {
  std::vector<int> a(50);
  std::iota(a.begin(), a.end(), 0);
  std::vector<int> b(a);
  Rng(9).shuffle(std::span(a));
  Rng(9).shuffle(std::span(b));
  CHECK(a == b);
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  std::vector<int> expected(50);
  std::iota(expected.begin(), expected.end(), 0);
  CHECK(sorted == expected);
}
