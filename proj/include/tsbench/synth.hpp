#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "tsbench/series.hpp"

namespace tsbench::synth {

enum class TrendKind { increase, decrease, steady, multi_stage };
enum class SeasonalityKind { sin, square, triangle, none };
enum class FrequencyClass { high, low };
enum class NoiseClass { noisy, clean };
enum class EventKind { spike_up, spike_down, rises_then_falls, falls_then_rises };

std::string_view to_string(TrendKind) noexcept;
std::string_view to_string(SeasonalityKind) noexcept;
std::string_view to_string(FrequencyClass) noexcept;
std::string_view to_string(NoiseClass) noexcept;
std::string_view to_string(EventKind) noexcept;

constexpr bool is_spike(EventKind kind) noexcept {
  return kind == EventKind::spike_up || kind == EventKind::spike_down;
}

struct Event {
  EventKind kind = EventKind::spike_up;
  double position_frac = 0.5;
  double magnitude = 0.0;  // value units, > 0; sign follows the kind

  friend bool operator==(const Event&, const Event&) = default;
};

/// Generative recipe for one synthetic series.
struct AttributeSet {
  TrendKind trend = TrendKind::steady;
  // One slope for increase/decrease/steady; one per stage for multi_stage.
  std::vector<double> slopes{0.0};
  // Stage boundaries (first index of stages 2..n) for multi_stage.
  std::vector<std::size_t> breakpoints;

  SeasonalityKind seasonality = SeasonalityKind::none;
  std::optional<double> period;  // steps; absent when seasonality == none
  double amplitude = 0.0;
  double phase = 0.0;  // cycles, in [0, 1)
  FrequencyClass frequency_class = FrequencyClass::low;

  NoiseClass noise_class = NoiseClass::clean;
  double noise_scale = 0.0;  // fraction of signal amplitude

  std::vector<Event> events;
  double base_level = 0.0;
  std::size_t length = 64;
  std::uint64_t seed = 0;

  friend bool operator==(const AttributeSet&, const AttributeSet&) = default;
};

/// Cycle count bounds implied by a frequency class (high: >= 6 cycles).
constexpr double kHighFrequencyMinCycles = 6.0;
constexpr double kMinStageFraction = 0.15;
constexpr double kEventMinGapFraction = 0.05;

/// Throws Errc::invalid_spec naming the first violated invariant.
void validate(const AttributeSet& spec);

/// Restricts what sample_spec may draw. An engaged but empty list is unsatisfiable.
struct AttributeMask {
  std::optional<std::vector<TrendKind>> trends;
  std::optional<std::vector<SeasonalityKind>> seasonalities;
  std::optional<std::vector<FrequencyClass>> frequencies;
  std::optional<std::vector<NoiseClass>> noises;
  std::size_t min_events = 0;
  std::size_t max_events = 2;
};

constexpr std::size_t kMinSampleLength = 64;

AttributeSet sample_spec(std::uint64_t seed, std::size_t length, const AttributeMask& mask = {});

/// Additive components of a synthesized series.
struct ComponentTrace {
  std::vector<double> trend;  // includes base level
  std::vector<double> seasonal;
  std::vector<double> events;
  std::vector<double> noise;
  std::vector<std::size_t> event_indices;  // realized index per spec event
  std::vector<std::size_t> breakpoints;
  double signal_amplitude = 0.0;

  /// trend + seasonal + events, summed in the same order as the series.
  std::vector<double> clean() const;
};

struct Synthesized {
  Series series;
  ComponentTrace trace;
};

Synthesized synthesize(const AttributeSet& spec);

/// Contiguous random window; length uniform over feasible allowed_lengths.
Series crop(const Series& series, std::span<const std::size_t> allowed_lengths, std::uint64_t seed);

/// Realized index of an event position for a series of the given length.
std::size_t event_index(double position_frac, std::size_t length) noexcept;

}  // namespace tsbench::synth
