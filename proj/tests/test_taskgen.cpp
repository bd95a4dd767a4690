#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fixtures.hpp"
#include "tsbench/error.hpp"
#include "tsbench/features.hpp"
#include "tsbench/rng.hpp"
#include "tsbench/scoring.hpp"
#include "tsbench/synth.hpp"
#include "tsbench/taskgen.hpp"

using namespace tsbench;
using namespace tsbench::taskgen;
using tsbench::testing::make_series;

namespace {

Series synth_series(std::uint64_t seed, std::size_t length) {
  auto s = synth::synthesize(synth::sample_spec(seed, length)).series;
  s.id = "s" + std::to_string(seed);
  return s;
}

double naive_pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

// The declared continuation score, written out from its definition.
double score_oracle(const std::vector<double>& ctx, const std::vector<double>& cand, double wg = 0.5, double wd = 0.5) {
  auto mean_slope = [](const std::vector<double>& v, std::size_t from, std::size_t count) {
    double sum = 0;
    for (std::size_t i = from + 1; i < from + count; ++i) sum += v[i] - v[i - 1];
    return sum / static_cast<double>(count - 1);
  };
  const double g_tail = mean_slope(ctx, ctx.size() - 5, 5);
  const double g_head = mean_slope(cand, 0, 5);
  const double range = *std::max_element(ctx.begin(), ctx.end()) - *std::min_element(ctx.begin(), ctx.end());
  const double s = range > 0 ? range : 1.0;
  const double s_g = std::fabs(g_tail) + 0.01 * s;
  return wg * std::exp(-std::fabs(cand[0] - (ctx.back() + g_tail)) / s) + wd * std::exp(-std::fabs(g_head - g_tail) / s_g);
}

}  // namespace

TEST_CASE("minmax item from the worked example") {
  std::vector<double> v(128);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.03 + 0.01 * std::sin(0.3 * static_cast<double>(i));
  v[60] = 0.0587;
  v[97] = 0.0025;
  const auto g = gen_minmax(make_series("ex", v), 1);
  REQUIRE(g);
  const auto& key = std::get<MinMaxKey>(g.item->key);
  CHECK(key.max.index == 60);
  CHECK(key.max.value.text == "0.05870");
  CHECK(key.min.index == 97);
  CHECK(key.order == features::ExtremaOrder::max_first);
  CHECK(scoring::format_answer(*g.item).find("The max value appears first.") != std::string::npos);
  CHECK(g.item->question == kMinMaxQuestion);
}

TEST_CASE("minmax skips ties") {
  CHECK_FALSE(gen_minmax(make_series("flat", std::vector<double>(64, 3.0)), 1));
}

TEST_CASE("emitted L1 keys equal brute-force recomputation") {
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const auto s = synth_series(seed, 64 + seed % 449);
    if (const auto g = gen_minmax(s, seed)) {
      const auto& key = std::get<MinMaxKey>(g.item->key);
      std::size_t hi = 0, lo = 0;
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (s.values[i] > s.values[hi]) hi = i;
        if (s.values[i] < s.values[lo]) lo = i;
      }
      CHECK(key.max.index == hi);
      CHECK(key.min.index == lo);
      CHECK(key.max.value.text == format_value(s.values[hi]));
      CHECK(verify_uniqueness(*g.item).passed());
    }
    if (const auto g = gen_start_end(s, seed)) {
      const auto& key = std::get<StartEndKey>(g.item->key);
      CHECK(key.start.index == 0);
      CHECK(key.end.index == s.size() - 1);
      const double a = s.values.front(), b = s.values.back();
      CHECK(key.verdict == (a > b ? features::StartEndVerdict::larger
                                  : a < b ? features::StartEndVerdict::smaller : features::StartEndVerdict::equal));
    }
  }
}

TEST_CASE("start/end verdict flips under reversal") {
  std::vector<double> v(318, 5.0);
  v.front() = 4.713;
  v.back() = 5.206;
  const auto g = gen_start_end(make_series("se", v), 3);
  REQUIRE(g);
  CHECK(std::get<StartEndKey>(g.item->key).verdict == features::StartEndVerdict::smaller);
  CHECK(scoring::format_answer(*g.item).find("The start value is smaller than the value at the end.") != std::string::npos);
  std::reverse(v.begin(), v.end());
  const auto r = gen_start_end(make_series("se", v), 3);
  REQUIRE(r);
  CHECK(std::get<StartEndKey>(r.item->key).verdict == features::StartEndVerdict::larger);
}

TEST_CASE("multiseries key is the brute-force extreme across series") {
  int emitted = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const std::size_t n = 2 + seed % 4;
    std::vector<Series> group;
    for (std::size_t k = 0; k < n; ++k) group.push_back(synth_series(seed * 10 + k, 128));
    const auto g = gen_multiseries(group, seed);
    if (!g) continue;
    ++emitted;
    const auto& key = std::get<MultiSeriesKey>(g.item->key);
    std::size_t best_s = 0, best_i = 0;
    for (std::size_t k = 0; k < n; ++k) {
      for (std::size_t i = 0; i < group[k].size(); ++i) {
        const double v = group[k].values[i], cur = group[best_s].values[best_i];
        if (key.lowest ? v < cur : v > cur) {
          best_s = k;
          best_i = i;
        }
      }
    }
    CHECK(key.series_number == best_s + 1);
    CHECK(key.pair.index == best_i);
    CHECK(verify_uniqueness(*g.item).passed());
  }
  CHECK(emitted > 150);
}

TEST_CASE("identical series give no multiseries item") {
  const auto s = synth_series(5, 100);
  const std::vector<Series> twins{s, s};
  CHECK_FALSE(gen_multiseries(twins, 1));
}

TEST_CASE("subseries key is an exact slice") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::vector<Series> group;
    for (std::size_t k = 0; k < 1 + seed % 5; ++k) group.push_back(synth_series(seed * 7 + k, 256));
    const auto g = gen_subseries(group, seed);
    REQUIRE(g);
    const auto& key = std::get<SubseriesKey>(g.item->key);
    const std::size_t width = key.to - key.from + 1;
    CHECK(width >= 8);
    CHECK(width <= 32);
    const auto& src = group.at(key.series_number - 1).values;
    REQUIRE(key.values.size() == width);
    for (std::size_t i = 0; i < width; ++i) CHECK(key.values[i].text == format_value(src[key.from + i]));
  }
  const std::vector<Series> flat{make_series("c", std::vector<double>(64, 0.518))};
  const auto g = gen_subseries(flat, 2);
  REQUIRE(g);
  for (const auto& v : std::get<SubseriesKey>(g.item->key).values) CHECK(v.text == "0.51800");
}

TEST_CASE("perception options parse back and exactly one holds") {
  int emitted = 0;
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const auto s = synth_series(seed, 64 + seed % 193);
    const auto g = gen_numerical_perception(s, seed);
    if (!g) continue;
    ++emitted;
    REQUIRE(g.item->options.size() == 4);
    int holding = 0;
    char holder = '?';
    for (const auto& opt : g.item->options) {
      const auto claim = parse_perception_option(opt.text);
      REQUIRE(claim.has_value());
      CHECK(perception_option_text(*claim) == opt.text);
      if (perception_claim_holds(*claim, s.values)) {
        ++holding;
        holder = opt.letter;
      }
    }
    CHECK(holding == 1);
    CHECK(std::get<ChoiceKey>(g.item->key).letter == holder);
    CHECK(verify_uniqueness(*g.item).passed());
  }
  CHECK(emitted > 200);
}

TEST_CASE("perception option wording") {
  PerceptionClaim c;
  c.feature = PerceptionClaim::Feature::minimum;
  c.value = 3.016;
  c.value_text = perception_number(3.016);
  c.index = 90;
  c.trend = features::OverallTrend::increasing;
  CHECK(perception_option_text(c) == "The minimum value is 3.016 at index 90, and the overall trend is increasing.");
  CHECK(perception_number(0.0123456) == "0.01235");
  CHECK(perception_number(-1234.5678) == "-1234.568");
}

TEST_CASE("a duplicated true option fails verification") {
  std::vector<double> v(100);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 3.0 + 0.05 * static_cast<double>(i);
  v[90] = 1.0;
  const auto s = make_series("dup", v);
  std::optional<QAItem> item;
  for (std::uint64_t seed = 0; seed < 50 && !item; ++seed) {
    if (auto g = gen_numerical_perception(s, seed)) item = *g.item;
  }
  REQUIRE(item);
  const char key = std::get<ChoiceKey>(item->key).letter;
  auto& other = item->options[key == 'A' ? 1 : 0];
  other.text = item->options[static_cast<std::size_t>(key - 'A')].text;
  const auto result = verify_uniqueness(*item);
  CHECK_FALSE(result.passed());
  CHECK(result.status == VerificationResult::Status::fail);
  CHECK(result.offending.size() >= 1);
}

TEST_CASE("pearson against the textbook formula") {
  Rng rng(1);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> a(64), b(64);
    for (auto& x : a) x = rng.uniform(-10, 10);
    for (auto& x : b) x = rng.uniform(-10, 10);
    CHECK(std::fabs(pearson(a, b) - naive_pearson(a, b)) < 1e-12);
  }
  const std::vector<double> a{1, 2, 4, 8, 3};
  std::vector<double> neg;
  for (double x : a) neg.push_back(7.0 - x);
  CHECK(pearson(a, a) == Catch::Approx(1.0));
  CHECK(pearson(a, neg) == Catch::Approx(-1.0));
  try {
    (void)pearson(a, std::vector<double>(5, 2.0));
    FAIL("zero variance accepted");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::undefined_correlation);
  }
  CHECK_THROWS_AS(pearson(a, std::vector<double>{1, 2}), Error);
}

TEST_CASE("continuation score follows its definition") {
  const std::vector<double> ctx{1, 2, 3, 4, 5};
  CHECK(continuation_score(ctx, std::vector<double>{6, 7, 8}) == Catch::Approx(1.0));
  CHECK(continuation_score(ctx, std::vector<double>{6, 5, 4}) < 1.0);

  Rng rng(8);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> c(32);
    for (auto& x : c) x = rng.uniform(-5, 5);
    std::vector<std::vector<double>> cands(4, std::vector<double>(12));
    for (auto& cand : cands) {
      for (auto& x : cand) x = rng.uniform(-5, 5);
    }
    std::vector<std::size_t> got(4), want(4);
    std::iota(got.begin(), got.end(), 0);
    std::iota(want.begin(), want.end(), 0);
    std::sort(got.begin(), got.end(), [&](auto x, auto y) { return continuation_score(c, cands[x]) > continuation_score(c, cands[y]); });
    std::sort(want.begin(), want.end(), [&](auto x, auto y) { return score_oracle(c, cands[x]) > score_oracle(c, cands[y]); });
    CHECK(got == want);
    for (const auto& cand : cands) CHECK(continuation_score(c, cand) == Catch::Approx(score_oracle(c, cand)).epsilon(1e-12));
  }
}

TEST_CASE("successor filters hold on emitted items") {
  std::vector<Series> pool;
  for (std::uint64_t k = 0; k < 12; ++k) pool.push_back(synth_series(500 + k, 256));
  SuccessorConfig cfg;
  int emitted = 0;
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    const auto g = gen_successor_mcq(pool, cfg, seed);
    if (!g) continue;
    ++emitted;
    const auto& item = *g.item;
    REQUIRE(item.series.size() == 5);
    const char key = std::get<ChoiceKey>(item.key).letter;
    const auto& positive = item.series[static_cast<std::size_t>(key - 'A') + 1].values;
    const double best = continuation_score(item.series[0].values, positive);
    for (std::size_t k = 1; k <= 4; ++k) {
      if (k == static_cast<std::size_t>(key - 'A') + 1) continue;
      const auto& neg = item.series[k].values;
      CHECK(pearson(neg, positive) < cfg.r_reject);
      CHECK(continuation_score(item.series[0].values, neg) < best);
      CHECK(item.series[k].origin != item.provenance.extra.at("host"));
    }
  }
  CHECK(emitted > 40);
}

TEST_CASE("candidates identical to the positive are rejected") {
  // Every window of a ramp rescales onto the positive patch exactly.
  std::vector<Series> pool;
  for (int k = 0; k < 6; ++k) {
    std::vector<double> v(256);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = (1.0 + k) * static_cast<double>(i);
    pool.push_back(make_series("ramp" + std::to_string(k), v));
  }
  const auto g = gen_successor_mcq(pool, SuccessorConfig{}, 1);
  REQUIRE_FALSE(g);
  CHECK(g.reason == SkipReason::pool_exhausted);
}

TEST_CASE("rescale_to maps onto the target band") {
  const auto r = rescale_to(std::vector<double>{2, 4, 6}, -1, 1);
  REQUIRE(r);
  CHECK((*r)[0] == Catch::Approx(-1));
  CHECK((*r)[1] == Catch::Approx(0));
  CHECK((*r)[2] == Catch::Approx(1));
  CHECK_FALSE(rescale_to(std::vector<double>{3, 3}, 0, 1));
}
