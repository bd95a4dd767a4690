#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "tsbench/series.hpp"
#include "tsbench/synth.hpp"

namespace tsbench::features {

struct IndexValue {
  std::size_t index = 0;
  double value = 0.0;

  friend bool operator==(const IndexValue&, const IndexValue&) = default;
};

enum class ExtremaOrder { max_first, min_first, tie };
enum class Direction { up, down, flat };
enum class Volatility { low, medium, high };
enum class OverallTrend { increasing, decreasing, steady };
enum class StartEndVerdict { larger, smaller, equal };

std::string_view to_string(ExtremaOrder) noexcept;
std::string_view to_string(Direction) noexcept;
std::string_view to_string(Volatility) noexcept;
std::string_view to_string(OverallTrend) noexcept;
std::string_view to_string(StartEndVerdict) noexcept;

struct Extrema {
  IndexValue max;
  IndexValue min;
  ExtremaOrder order = ExtremaOrder::tie;

  friend bool operator==(const Extrema&, const Extrema&) = default;
};

/// First-occurrence max/min from a single left-to-right scan.
Extrema extrema(std::span<const double> values);

struct StartEnd {
  IndexValue start;
  IndexValue end;
  StartEndVerdict verdict = StartEndVerdict::equal;
};

/// `relative_tolerance` 0 is an exact compare (synthetic data); real data uses 1e-9.
StartEnd start_end_compare(std::span<const double> values, double relative_tolerance = 0.0);

struct TrendSegment {
  std::size_t start_idx = 0;
  std::size_t end_idx = 0;  // inclusive; the next segment starts at end_idx + 1
  Direction direction = Direction::flat;
  double start_value = 0.0;
  double end_value = 0.0;
};

struct CycleStats {
  double estimated_period = 0.0;
  double cycle_count = 0.0;  // length / period, one decimal
  std::pair<double, double> peak_range;
  std::pair<double, double> valley_range;
  double mean_amplitude = 0.0;
};

struct DetectedEvent {
  synth::EventKind kind = synth::EventKind::spike_up;
  std::size_t index = 0;
  double value = 0.0;
};

struct SeriesAnnotation {
  std::size_t length = 0;
  Extrema ext;
  IndexValue start;
  IndexValue end;
  std::vector<TrendSegment> segments;
  std::size_t turning_point_count = 0;
  std::vector<std::size_t> turning_points;
  std::optional<CycleStats> cycles;
  Volatility volatility = Volatility::low;
  double volatility_ratio = 0.0;
  std::vector<DetectedEvent> events;
  OverallTrend overall_trend = OverallTrend::steady;
  // Least-squares change over the series relative to its range, in [-inf, inf].
  double trend_strength = 0.0;
  std::size_t smoothing_window = 3;
};

struct AnnotationParams {
  double min_segment_fraction = 0.10;  // shorter direction runs are not significant
  double flat_fraction = 0.05;         // |segment change| below this share of range is flat
  double volatility_low = 0.02;
  double volatility_high = 0.10;
  double acf_min_peak = 0.3;
  double spike_threshold = 6.0;  // robust z-score of the median-filter residual
  double steady_strength = 0.10;
};

SeriesAnnotation annotate(const Series& series, const AnnotationParams& params = {});
SeriesAnnotation annotate(std::span<const double> values, const AnnotationParams& params = {});

// Building blocks, exposed for tests and for the task generators.
double least_squares_slope(std::span<const double> values);
std::size_t base_smoothing_window(std::size_t length) noexcept;
/// Centered moving average of real width `width` (fractional end weights),
/// linearly extrapolated where the window does not fit.
std::vector<double> trend_smooth(std::span<const double> values, double width);
/// Dominant autocorrelation period (lag >= 2) of the linearly detrended series.
std::optional<double> estimate_period(std::span<const double> values, double min_peak = 0.3);
Volatility classify_volatility(double ratio, const AnnotationParams& params = {}) noexcept;
double volatility_ratio(std::span<const double> values);
OverallTrend classify_trend(double strength, double steady_threshold = 0.10) noexcept;
double trend_strength(std::span<const double> values);

}  // namespace tsbench::features
