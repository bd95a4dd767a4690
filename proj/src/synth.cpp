#include "tsbench/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <numbers>
#include <numeric>

#include "tsbench/error.hpp"
#include "tsbench/rng.hpp"

namespace tsbench::synth {

std::string_view to_string(TrendKind kind) noexcept {
  switch (kind) {
    case TrendKind::increase: return "increase";
    case TrendKind::decrease: return "decrease";
    case TrendKind::steady: return "steady";
    case TrendKind::multi_stage: return "multi_stage";
  }
  return "?";
}

std::string_view to_string(SeasonalityKind kind) noexcept {
  switch (kind) {
    case SeasonalityKind::sin: return "sin";
    case SeasonalityKind::square: return "square";
    case SeasonalityKind::triangle: return "triangle";
    case SeasonalityKind::none: return "none";
  }
  return "?";
}

std::string_view to_string(FrequencyClass kind) noexcept {
  return kind == FrequencyClass::high ? "high" : "low";
}

std::string_view to_string(NoiseClass kind) noexcept {
  return kind == NoiseClass::noisy ? "noisy" : "clean";
}

std::string_view to_string(EventKind kind) noexcept {
  switch (kind) {
    case EventKind::spike_up: return "spike_up";
    case EventKind::spike_down: return "spike_down";
    case EventKind::rises_then_falls: return "rises_then_falls";
    case EventKind::falls_then_rises: return "falls_then_rises";
  }
  return "?";
}

namespace {

[[noreturn]] void invalid(const std::string& what) { throw Error(Errc::invalid_spec, what); }

std::size_t bump_half_width(std::size_t length) noexcept {
  return std::max<std::size_t>(3, static_cast<std::size_t>(std::lround(0.06 * static_cast<double>(length))));
}

double seasonal_shape(SeasonalityKind kind, double cycles) {
  const double u = cycles - std::floor(cycles);
  switch (kind) {
    case SeasonalityKind::sin: return std::sin(2.0 * std::numbers::pi * cycles);
    case SeasonalityKind::square: return u < 0.5 ? 1.0 : -1.0;
    case SeasonalityKind::triangle: return 1.0 - 4.0 * std::fabs(u - 0.5);
    case SeasonalityKind::none: return 0.0;
  }
  return 0.0;
}

template <typename T>
T pick(Rng& rng, const std::vector<T>& choices) {
  return choices[rng.index(choices.size())];
}

template <typename T>
std::vector<T> allowed(const std::optional<std::vector<T>>& masked, std::vector<T> all,
                       std::string_view what) {
  if (!masked) return all;
  if (masked->empty()) {
    throw Error(Errc::unsatisfiable_constraints, fmt::format("mask allows no {}", what));
  }
  return *masked;
}

double stddev(std::span<const double> values) {
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / n);
}

}  // namespace

std::size_t event_index(double position_frac, std::size_t length) noexcept {
  return static_cast<std::size_t>(std::lround(position_frac * static_cast<double>(length - 1)));
}

void validate(const AttributeSet& spec) {
  const std::size_t len = spec.length;
  if (len < 2) invalid("length must be >= 2");
  if (spec.slopes.empty()) invalid("trend needs at least one slope");
  for (double s : spec.slopes) {
    if (!std::isfinite(s)) invalid("non-finite trend slope");
  }
  if (!std::isfinite(spec.base_level)) invalid("non-finite base level");

  switch (spec.trend) {
    case TrendKind::increase:
      if (spec.slopes.size() != 1 || spec.slopes[0] <= 0.0) invalid("increase needs one positive slope");
      break;
    case TrendKind::decrease:
      if (spec.slopes.size() != 1 || spec.slopes[0] >= 0.0) invalid("decrease needs one negative slope");
      break;
    case TrendKind::steady:
      if (spec.slopes.size() != 1 || spec.slopes[0] != 0.0) invalid("steady needs slope 0");
      break;
    case TrendKind::multi_stage: {
      const std::size_t stages = spec.slopes.size();
      if (stages < 2 || stages > 4) invalid("multi_stage needs 2-4 stages");
      if (spec.breakpoints.size() != stages - 1) invalid("multi_stage needs stages-1 breakpoints");
      const double min_stage = kMinStageFraction * static_cast<double>(len);
      std::size_t prev = 0;
      for (std::size_t i = 0; i <= spec.breakpoints.size(); ++i) {
        const std::size_t next = i < spec.breakpoints.size() ? spec.breakpoints[i] : len;
        if (next <= prev || static_cast<double>(next - prev) < min_stage) {
          invalid("multi_stage breakpoints must be >= 15% of length apart");
        }
        prev = next;
      }
      break;
    }
  }
  if (spec.trend != TrendKind::multi_stage && !spec.breakpoints.empty()) {
    invalid("breakpoints are only valid for multi_stage");
  }

  if (spec.seasonality == SeasonalityKind::none) {
    if (spec.period) invalid("period must be absent without seasonality");
  } else {
    if (!spec.period || !std::isfinite(*spec.period)) invalid("seasonality needs a period");
    const double p = *spec.period;
    if (p <= 1.0) invalid("period must be > 1");
    if (p > static_cast<double>(len) / 2.0) invalid("period must be <= length/2");
    const double cycles = static_cast<double>(len) / p;
    if (spec.frequency_class == FrequencyClass::high && cycles < kHighFrequencyMinCycles) {
      invalid("high frequency needs >= 6 cycles");
    }
    if (spec.frequency_class == FrequencyClass::low && cycles >= kHighFrequencyMinCycles) {
      invalid("low frequency needs < 6 cycles");
    }
    if (!std::isfinite(spec.amplitude) || spec.amplitude < 0.0) invalid("amplitude must be >= 0");
  }
  if (!std::isfinite(spec.noise_scale) || spec.noise_scale < 0.0) invalid("noise_scale must be >= 0");

  int spikes = 0;
  int turns = 0;
  for (std::size_t i = 0; i < spec.events.size(); ++i) {
    const Event& e = spec.events[i];
    if (!(e.position_frac > 0.05 && e.position_frac < 0.95)) invalid("event position must lie in (0.05, 0.95)");
    if (!std::isfinite(e.magnitude) || e.magnitude <= 0.0) invalid("event magnitude must be > 0");
    (is_spike(e.kind) ? spikes : turns) += 1;
    for (std::size_t j = 0; j < i; ++j) {
      if (std::fabs(spec.events[j].position_frac - e.position_frac) < kEventMinGapFraction) {
        invalid("events closer than 5% of length");
      }
    }
  }
  if (spikes > 1 || turns > 1) invalid("at most one spike and one turning event");
}

std::vector<double> ComponentTrace::clean() const {
  std::vector<double> out(trend.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = (trend[k] + seasonal[k]) + events[k];
  return out;
}

Synthesized synthesize(const AttributeSet& spec) {
  validate(spec);
  const std::size_t len = spec.length;
  ComponentTrace trace;
  trace.trend.resize(len);
  trace.seasonal.assign(len, 0.0);
  trace.events.assign(len, 0.0);
  trace.noise.assign(len, 0.0);
  trace.breakpoints = spec.breakpoints;

  double level = spec.base_level;
  std::size_t stage = 0;
  for (std::size_t k = 0; k < len; ++k) {
    trace.trend[k] = level;
    while (stage < spec.breakpoints.size() && k >= spec.breakpoints[stage]) ++stage;
    level += spec.slopes[std::min(stage, spec.slopes.size() - 1)];
  }

  if (spec.seasonality != SeasonalityKind::none) {
    for (std::size_t k = 0; k < len; ++k) {
      const double cycles = static_cast<double>(k) / *spec.period + spec.phase;
      trace.seasonal[k] = spec.amplitude * seasonal_shape(spec.seasonality, cycles);
    }
  }

  double lo = trace.trend[0] + trace.seasonal[0];
  double hi = lo;
  for (std::size_t k = 0; k < len; ++k) {
    lo = std::min(lo, trace.trend[k] + trace.seasonal[k]);
    hi = std::max(hi, trace.trend[k] + trace.seasonal[k]);
  }
  trace.signal_amplitude = 0.5 * (hi - lo);

  for (const Event& e : spec.events) {
    const std::size_t at = event_index(e.position_frac, len);
    trace.event_indices.push_back(at);
    switch (e.kind) {
      case EventKind::spike_up: trace.events[at] += e.magnitude; break;
      case EventKind::spike_down: trace.events[at] -= e.magnitude; break;
      case EventKind::rises_then_falls:
      case EventKind::falls_then_rises: {
        const double sign = e.kind == EventKind::rises_then_falls ? 1.0 : -1.0;
        const std::size_t h = bump_half_width(len);
        const std::size_t from = at >= h ? at - h : 0;
        const std::size_t to = std::min(len - 1, at + h);
        for (std::size_t k = from; k <= to; ++k) {
          const double dist = std::fabs(static_cast<double>(k) - static_cast<double>(at));
          trace.events[k] += sign * e.magnitude * (1.0 - dist / static_cast<double>(h));
        }
        break;
      }
    }
  }

  const double sigma = spec.noise_scale * trace.signal_amplitude;
  if (sigma > 0.0) {
    Rng rng = Rng(spec.seed).stream("noise");
    for (double& n : trace.noise) n = sigma * rng.normal();
  }

  Series series;
  series.id = fmt::format("syn-{:016x}", spec.seed);
  series.values.resize(len);
  for (std::size_t k = 0; k < len; ++k) {
    series.values[k] = ((trace.trend[k] + trace.seasonal[k]) + trace.events[k]) + trace.noise[k];
  }
  series.sampling_label = "synthetic";
  series.source = SeriesSource::synthetic;
  return {std::move(series), std::move(trace)};
}

AttributeSet sample_spec(std::uint64_t seed, std::size_t length, const AttributeMask& mask) {
  if (length < kMinSampleLength) {
    throw Error(Errc::invalid_spec, fmt::format("length {} below supported minimum {}", length, kMinSampleLength));
  }
  const auto trends = allowed(mask.trends,
                              {TrendKind::increase, TrendKind::decrease, TrendKind::steady, TrendKind::multi_stage},
                              "trends");
  const auto seasonalities = allowed(mask.seasonalities,
                                     {SeasonalityKind::sin, SeasonalityKind::square, SeasonalityKind::triangle,
                                      SeasonalityKind::none},
                                     "seasonalities");
  const auto frequencies = allowed(mask.frequencies, {FrequencyClass::high, FrequencyClass::low}, "frequencies");
  const auto noises = allowed(mask.noises, {NoiseClass::noisy, NoiseClass::clean}, "noise classes");
  if (mask.min_events > mask.max_events || mask.min_events > 2) {
    throw Error(Errc::unsatisfiable_constraints,
                fmt::format("event count range [{}, {}] not realizable (max 2)", mask.min_events, mask.max_events));
  }

  Rng rng = Rng(seed).stream("spec");
  const double len = static_cast<double>(length);
  AttributeSet spec;
  spec.length = length;
  spec.seed = seed;

  const double scale = std::pow(10.0, rng.uniform(-2.0, 3.0));
  spec.base_level = scale * rng.uniform(-3.0, 3.0);

  spec.trend = pick(rng, trends);
  switch (spec.trend) {
    case TrendKind::increase:
    case TrendKind::decrease: {
      const double change = scale * rng.uniform(1.0, 4.0);
      const double slope = change / (len - 1.0);
      spec.slopes = {spec.trend == TrendKind::increase ? slope : -slope};
      break;
    }
    case TrendKind::steady: spec.slopes = {0.0}; break;
    case TrendKind::multi_stage: {
      const std::size_t stages = static_cast<std::size_t>(rng.uniform_int(2, 4));
      const double min_stage = kMinStageFraction * len;
      std::vector<std::size_t> cuts;
      for (;;) {
        cuts.clear();
        for (std::size_t i = 0; i + 1 < stages; ++i) {
          cuts.push_back(static_cast<std::size_t>(rng.uniform_int(1, static_cast<std::int64_t>(length) - 1)));
        }
        std::sort(cuts.begin(), cuts.end());
        bool ok = true;
        std::size_t prev = 0;
        for (std::size_t i = 0; i <= cuts.size(); ++i) {
          const std::size_t next = i < cuts.size() ? cuts[i] : length;
          if (next <= prev || static_cast<double>(next - prev) < min_stage) ok = false;
          prev = next;
        }
        if (ok) break;
      }
      spec.breakpoints = cuts;
      // Random signs with at least one direction change between stages.
      std::vector<double> signs(stages);
      do {
        for (double& s : signs) s = rng.bernoulli(0.5) ? 1.0 : -1.0;
      } while (std::all_of(signs.begin(), signs.end(), [&](double s) { return s == signs[0]; }));
      spec.slopes.clear();
      std::size_t prev = 0;
      for (std::size_t i = 0; i < stages; ++i) {
        const std::size_t next = i < cuts.size() ? cuts[i] : length;
        const double steps = static_cast<double>(next - prev);
        spec.slopes.push_back(signs[i] * scale * rng.uniform(1.0, 3.0) / steps);
        prev = next;
      }
      break;
    }
  }

  spec.seasonality = pick(rng, seasonalities);
  spec.frequency_class = pick(rng, frequencies);
  if (spec.seasonality != SeasonalityKind::none) {
    double cycles = 0.0;
    if (spec.frequency_class == FrequencyClass::high) {
      const double hi = std::max(kHighFrequencyMinCycles, std::min(16.0, len / 8.0));
      cycles = rng.uniform(kHighFrequencyMinCycles, hi);
    } else {
      cycles = rng.uniform(2.5, 5.0);
    }
    spec.period = len / cycles;
    spec.amplitude = scale * rng.uniform(0.3, 1.5);
    spec.phase = rng.uniform();
  }

  spec.noise_class = pick(rng, noises);
  spec.noise_scale = spec.noise_class == NoiseClass::clean ? 0.005 : rng.uniform(0.05, 0.15);

  const auto n_events =
      static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(mask.min_events),
                                               static_cast<std::int64_t>(std::min<std::size_t>(mask.max_events, 2))));
  if (n_events > 0) {
    AttributeSet quiet = spec;
    double sigma = stddev(synthesize(quiet).series.values);
    if (!(sigma > 1e-9 * scale)) sigma = 0.1 * scale;

    std::vector<EventKind> kinds;
    const EventKind spike = rng.bernoulli(0.5) ? EventKind::spike_up : EventKind::spike_down;
    const EventKind turn = rng.bernoulli(0.5) ? EventKind::rises_then_falls : EventKind::falls_then_rises;
    if (n_events == 2) {
      kinds = {spike, turn};
    } else {
      kinds = {rng.bernoulli(0.5) ? spike : turn};
    }
    std::vector<double> positions;
    do {
      positions.clear();
      for (std::size_t i = 0; i < kinds.size(); ++i) positions.push_back(rng.uniform(0.1, 0.9));
    } while (positions.size() == 2 && std::fabs(positions[0] - positions[1]) < 0.1);
    for (std::size_t i = 0; i < kinds.size(); ++i) {
      spec.events.push_back({kinds[i], positions[i], rng.uniform(3.0, 8.0) * sigma});
    }
  }

  validate(spec);
  return spec;
}

Series crop(const Series& series, std::span<const std::size_t> allowed_lengths, std::uint64_t seed) {
  std::vector<std::size_t> feasible;
  for (std::size_t n : allowed_lengths) {
    if (n >= 2 && n <= series.size()) feasible.push_back(n);
  }
  if (feasible.empty()) {
    throw Error(Errc::infeasible_crop,
                fmt::format("no allowed length fits series '{}' of length {}", series.id, series.size()));
  }
  Rng rng = Rng(seed).stream("crop");
  const std::size_t len = feasible[rng.index(feasible.size())];
  const std::size_t start = rng.index(series.size() - len + 1);

  Series out;
  out.id = fmt::format("{}@{}+{}", series.id, start, len);
  out.values.assign(series.values.begin() + static_cast<std::ptrdiff_t>(start),
                    series.values.begin() + static_cast<std::ptrdiff_t>(start + len));
  out.sampling_label = series.sampling_label;
  out.source = SeriesSource::real_crop;
  out.origin = series.id;
  out.origin_offset = start;
  return out;
}

}  // namespace tsbench::synth
