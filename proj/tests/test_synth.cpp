#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "tsbench/error.hpp"
#include "tsbench/features.hpp"
#include "tsbench/synth.hpp"

using namespace tsbench;
using namespace tsbench::synth;

namespace {

AttributeSet flat_spec(std::size_t length = 64) {
  AttributeSet s;
  s.trend = TrendKind::steady;
  s.slopes = {0.0};
  s.seasonality = SeasonalityKind::none;
  s.noise_class = NoiseClass::clean;
  s.base_level = 5.0;
  s.length = length;
  return s;
}

Errc code_of(const AttributeSet& s) {
  try {
    validate(s);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("spec unexpectedly valid");
  return Errc::io_error;
}

}  // namespace

TEST_CASE("flat spec gives a constant series") {
  const auto out = synthesize(flat_spec());
  REQUIRE(out.series.size() == 64);
  for (double v : out.series.values) CHECK(v == 5.0);
}

TEST_CASE("single linear trend is exact") {
  auto spec = flat_spec();
  spec.trend = TrendKind::increase;
  spec.slopes = {0.5};
  const auto out = synthesize(spec);
  for (std::size_t k = 0; k < 64; ++k) CHECK(out.series.values[k] == Catch::Approx(5.0 + 0.5 * k).margin(1e-12));
}

TEST_CASE("sine seasonality of period 16 shows four cycles") {
  auto spec = flat_spec();
  spec.seasonality = SeasonalityKind::sin;
  spec.period = 16.0;
  spec.amplitude = 2.0;
  spec.frequency_class = FrequencyClass::low;
  const auto out = synthesize(spec);
  // Oracle: sign changes of the detrended series, halved.
  const auto& v = out.series.values;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  // Samples that sit on the mean (to rounding) carry no sign.
  int changes = 0, last = 0;
  for (double x : v) {
    const double d = x - mean;
    const int sign = std::fabs(d) < 1e-9 ? 0 : (d > 0 ? 1 : -1);
    if (sign != 0 && last != 0 && sign != last) ++changes;
    if (sign != 0) last = sign;
  }
  CHECK(std::fabs(changes / 2.0 - 4.0) <= 0.5);
  const auto ann = features::annotate(out.series);
  REQUIRE(ann.cycles.has_value());
  CHECK(std::fabs(ann.cycles->cycle_count - 4.0) <= 0.5);
}

TEST_CASE("components add up to the series") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto spec = sample_spec(seed, 64 + seed * 7);
    const auto out = synthesize(spec);
    const auto clean = out.trace.clean();
    REQUIRE(clean.size() == out.series.size());
    for (std::size_t i = 0; i < clean.size(); ++i) {
      CHECK(out.series.values[i] == Catch::Approx(clean[i] + out.trace.noise[i]).margin(1e-9));
    }
  }
}

TEST_CASE("sample_spec is deterministic and honours masks") {
  CHECK(sample_spec(7, 128) == sample_spec(7, 128));
  AttributeMask mask;
  mask.seasonalities = std::vector{SeasonalityKind::none};
  const auto spec = sample_spec(7, 128, mask);
  CHECK(spec.seasonality == SeasonalityKind::none);
  CHECK_FALSE(spec.period.has_value());

  AttributeMask empty;
  empty.trends = std::vector<TrendKind>{};
  try {
    (void)sample_spec(1, 128, empty);
    FAIL("empty mask accepted");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::unsatisfiable_constraints);
  }
}

TEST_CASE("sampled specs never carry two spikes and always validate") {
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    const auto spec = sample_spec(seed, 64 + seed % 961);
    const auto spikes = std::count_if(spec.events.begin(), spec.events.end(), [](const Event& e) { return is_spike(e.kind); });
    REQUIRE(spikes <= 1);
    REQUIRE_NOTHROW(validate(spec));
  }
}

TEST_CASE("synthesis is reproducible from its parameters") {
  const auto spec = sample_spec(99, 300);
  CHECK(synthesize(spec).series == synthesize(spec).series);
}

TEST_CASE("invalid specs name their violation") {
  auto s = flat_spec();
  s.seasonality = SeasonalityKind::sin;  // period missing
  CHECK(code_of(s) == Errc::invalid_spec);

  s = flat_spec();
  s.events = {{EventKind::spike_up, 0.3, 1.0}, {EventKind::spike_down, 0.7, 1.0}};
  CHECK(code_of(s) == Errc::invalid_spec);

  s = flat_spec();
  s.length = 1;
  CHECK(code_of(s) == Errc::invalid_spec);
}

TEST_CASE("crop windows are exact slices") {
  Series src;
  src.id = "src";
  for (int i = 0; i < 96; ++i) src.values.push_back(i * 0.25);
  const std::size_t only96[] = {96};
  const auto same = crop(src, only96, 1);
  CHECK(same.values == src.values);
  CHECK(same.origin_offset == 0);

  src.values.resize(100);
  for (int i = 0; i < 100; ++i) src.values[i] = std::sin(i * 0.1);
  const std::size_t ett[] = {96, 192, 336, 720};
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto w = crop(src, ett, seed);
    REQUIRE(w.size() == 96);
    REQUIRE(w.origin_offset <= 4);
    CHECK(w.origin == "src");
    CHECK(std::equal(w.values.begin(), w.values.end(), src.values.begin() + static_cast<std::ptrdiff_t>(w.origin_offset)));
  }

  const std::size_t too_long[] = {200};
  try {
    (void)crop(src, too_long, 0);
    FAIL("infeasible crop accepted");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::infeasible_crop);
  }
}

TEST_CASE("spike events land at their realized index") {
  auto spec = flat_spec(200);
  spec.events = {{EventKind::spike_up, 0.4, 10.0}};
  const auto out = synthesize(spec);
  REQUIRE(out.trace.event_indices.size() == 1);
  const auto at = out.trace.event_indices[0];
  CHECK(at == event_index(0.4, 200));
  const auto peak = std::max_element(out.series.values.begin(), out.series.values.end()) - out.series.values.begin();
  CHECK(static_cast<std::size_t>(peak) == at);
}
