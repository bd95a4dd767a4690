#include "tsbench/features.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tsbench/error.hpp"

namespace tsbench::features {

std::string_view to_string(ExtremaOrder order) noexcept {
  switch (order) {
    case ExtremaOrder::max_first: return "max_first";
    case ExtremaOrder::min_first: return "min_first";
    case ExtremaOrder::tie: return "tie";
  }
  return "?";
}

std::string_view to_string(Direction d) noexcept {
  switch (d) {
    case Direction::up: return "up";
    case Direction::down: return "down";
    case Direction::flat: return "flat";
  }
  return "?";
}

std::string_view to_string(Volatility v) noexcept {
  switch (v) {
    case Volatility::low: return "low";
    case Volatility::medium: return "medium";
    case Volatility::high: return "high";
  }
  return "?";
}

std::string_view to_string(OverallTrend t) noexcept {
  switch (t) {
    case OverallTrend::increasing: return "increasing";
    case OverallTrend::decreasing: return "decreasing";
    case OverallTrend::steady: return "steady";
  }
  return "?";
}

std::string_view to_string(StartEndVerdict v) noexcept {
  switch (v) {
    case StartEndVerdict::larger: return "larger";
    case StartEndVerdict::smaller: return "smaller";
    case StartEndVerdict::equal: return "equal";
  }
  return "?";
}

Extrema extrema(std::span<const double> values) {
  if (values.empty()) throw Error(Errc::empty_input, "extrema of an empty series");
  Extrema out;
  out.max = {0, values[0]};
  out.min = {0, values[0]};
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > out.max.value) out.max = {i, values[i]};
    if (values[i] < out.min.value) out.min = {i, values[i]};
  }
  if (out.max.index == out.min.index) {
    out.order = ExtremaOrder::tie;
  } else {
    out.order = out.max.index < out.min.index ? ExtremaOrder::max_first : ExtremaOrder::min_first;
  }
  return out;
}

StartEnd start_end_compare(std::span<const double> values, double relative_tolerance) {
  if (values.empty()) throw Error(Errc::empty_input, "start/end of an empty series");
  StartEnd out;
  out.start = {0, values.front()};
  out.end = {values.size() - 1, values.back()};
  const double a = out.start.value;
  const double b = out.end.value;
  const double tol = relative_tolerance * std::max(std::fabs(a), std::fabs(b));
  if (std::fabs(a - b) <= tol) {
    out.verdict = StartEndVerdict::equal;
  } else {
    out.verdict = a > b ? StartEndVerdict::larger : StartEndVerdict::smaller;
  }
  return out;
}

double least_squares_slope(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 2) return 0.0;
  const double xbar = 0.5 * static_cast<double>(n - 1);
  const double ybar = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = static_cast<double>(i) - xbar;
    sxy += dx * (values[i] - ybar);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

namespace {

double value_range(std::span<const double> values) {
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  return *hi - *lo;
}

std::vector<double> detrended(std::span<const double> values) {
  const double slope = least_squares_slope(values);
  const double n = static_cast<double>(values.size());
  const double ybar = std::accumulate(values.begin(), values.end(), 0.0) / n;
  const double xbar = 0.5 * (n - 1.0);
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    out[i] = values[i] - (ybar + slope * (static_cast<double>(i) - xbar));
  }
  return out;
}

double median(std::vector<double> v) {
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  double m = v[mid];
  if (v.size() % 2 == 0) {
    m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid)));
  }
  return m;
}

double round1(double x) { return std::round(x * 10.0) / 10.0; }

struct Segment {
  std::size_t start;
  std::size_t end;
  Direction direction;
};

Direction label(std::span<const double> smooth, std::size_t start, std::size_t end, double flat_band) {
  const double delta = smooth[end] - smooth[start > 0 ? start - 1 : 0];
  if (std::fabs(delta) <= flat_band) return Direction::flat;
  return delta > 0.0 ? Direction::up : Direction::down;
}

std::vector<Segment> segment_trend(std::span<const double> smooth, double range,
                                   const AnnotationParams& params) {
  const std::size_t n = smooth.size();
  const double flat_band = params.flat_fraction * range;
  const double step_eps = 1e-12 * std::max(range, 1e-300);

  std::vector<Segment> segs;
  auto step_dir = [&](std::size_t k) {
    const double d = smooth[k + 1] - smooth[k];
    if (d > step_eps) return Direction::up;
    if (d < -step_eps) return Direction::down;
    return Direction::flat;
  };
  std::size_t run_start = 0;
  for (std::size_t k = 1; k + 1 < n; ++k) {
    if (step_dir(k) != step_dir(run_start)) {
      segs.push_back({segs.empty() ? 0 : segs.back().end + 1, k, Direction::flat});
      run_start = k;
    }
  }
  segs.push_back({segs.empty() ? 0 : segs.back().end + 1, n - 1, Direction::flat});
  for (auto& s : segs) s.direction = label(smooth, s.start, s.end, flat_band);

  const std::size_t min_len = std::max<std::size_t>(
      2, static_cast<std::size_t>(std::ceil(params.min_segment_fraction * static_cast<double>(n))));
  auto length = [](const Segment& s) { return s.end - s.start + 1; };

  for (;;) {
    std::vector<Segment> merged;
    for (const auto& s : segs) {
      if (!merged.empty() && merged.back().direction == s.direction) {
        merged.back().end = s.end;
      } else {
        merged.push_back(s);
      }
    }
    segs = std::move(merged);
    if (segs.size() < 2) break;

    std::size_t victim = segs.size();
    for (std::size_t i = 0; i < segs.size(); ++i) {
      if (length(segs[i]) < min_len && (victim == segs.size() || length(segs[i]) < length(segs[victim]))) {
        victim = i;
      }
    }
    if (victim == segs.size()) break;

    std::size_t into = 0;
    if (victim == 0) {
      into = 1;
    } else if (victim + 1 == segs.size()) {
      into = victim - 1;
    } else {
      into = length(segs[victim + 1]) > length(segs[victim - 1]) ? victim + 1 : victim - 1;
    }
    const std::size_t lo = std::min(victim, into);
    Segment joined{segs[lo].start, segs[lo + 1].end, Direction::flat};
    joined.direction = label(smooth, joined.start, joined.end, flat_band);
    segs[lo] = joined;
    segs.erase(segs.begin() + static_cast<std::ptrdiff_t>(lo + 1));
  }
  return segs;
}

std::vector<DetectedEvent> detect_spikes(std::span<const double> values, double range, double threshold) {
  const std::size_t n = values.size();
  std::vector<DetectedEvent> out;
  if (n < 7 || range <= 0.0) return out;
  constexpr std::size_t half = 3;
  std::vector<double> resid(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t lo = k >= half ? k - half : 0;
    const std::size_t hi = std::min(n - 1, k + half);
    resid[k] = values[k] - median({values.begin() + static_cast<std::ptrdiff_t>(lo),
                                   values.begin() + static_cast<std::ptrdiff_t>(hi + 1)});
  }
  const double center = median(resid);
  std::vector<double> dev(n);
  for (std::size_t k = 0; k < n; ++k) dev[k] = std::fabs(resid[k] - center);
  const double scale = std::max(1.4826 * median(dev), 0.01 * range);
  for (std::size_t k = 1; k + 1 < n; ++k) {
    const double e = resid[k] - center;
    if (std::fabs(e) <= threshold * scale || std::fabs(e) < 0.05 * range) continue;
    if (e > 0.0 && values[k] > values[k - 1] && values[k] > values[k + 1]) {
      out.push_back({synth::EventKind::spike_up, k, values[k]});
    } else if (e < 0.0 && values[k] < values[k - 1] && values[k] < values[k + 1]) {
      out.push_back({synth::EventKind::spike_down, k, values[k]});
    }
  }
  return out;
}

}  // namespace

std::size_t base_smoothing_window(std::size_t length) noexcept {
  return std::max<std::size_t>(3, length / 50);
}

std::vector<double> trend_smooth(std::span<const double> values, double width) {
  const std::size_t n = values.size();
  std::vector<double> out(n);
  if (n == 0) return out;
  const double half = 0.5 * std::max(width, 1.0);
  std::vector<double> weights;
  for (std::size_t j = 0;; ++j) {
    const double w = std::clamp(half + 0.5 - static_cast<double>(j), 0.0, 1.0);
    if (w <= 0.0) break;
    weights.push_back(w);
  }
  const std::size_t reach = weights.size() - 1;
  if (n < 2 * reach + 1) {
    const double slope = least_squares_slope(values);
    const double ybar = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
    const double xbar = 0.5 * static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) out[i] = ybar + slope * (static_cast<double>(i) - xbar);
    return out;
  }
  double norm = weights[0];
  for (std::size_t j = 1; j <= reach; ++j) norm += 2.0 * weights[j];
  const std::size_t first = reach;
  const std::size_t last = n - 1 - reach;
  for (std::size_t k = first; k <= last; ++k) {
    double acc = weights[0] * values[k];
    for (std::size_t j = 1; j <= reach; ++j) acc += weights[j] * (values[k - j] + values[k + j]);
    out[k] = acc / norm;
  }
  const std::size_t valid = last - first + 1;
  const std::size_t fit = std::min(valid, std::max<std::size_t>(2, reach));
  if (first > 0) {
    const double slope = fit >= 2 ? least_squares_slope({out.data() + first, fit}) : 0.0;
    for (std::size_t k = 0; k < first; ++k) out[k] = out[first] - slope * static_cast<double>(first - k);
  }
  if (last + 1 < n) {
    const double slope = fit >= 2 ? least_squares_slope({out.data() + last + 1 - fit, fit}) : 0.0;
    for (std::size_t k = last + 1; k < n; ++k) out[k] = out[last] + slope * static_cast<double>(k - last);
  }
  return out;
}

std::optional<double> estimate_period(std::span<const double> values, double min_peak) {
  const std::size_t n = values.size();
  if (n < 8) return std::nullopt;
  const auto r = detrended(values);
  double energy = 0.0;
  for (double v : r) energy += v * v;
  if (!(energy > 0.0)) return std::nullopt;
  const std::size_t max_lag = n / 2;
  std::vector<double> acf(max_lag + 2, 0.0);
  for (std::size_t lag = 0; lag < acf.size() && lag < n; ++lag) {
    double acc = 0.0;
    for (std::size_t t = 0; t + lag < n; ++t) acc += r[t] * r[t + lag];
    acf[lag] = acc / energy;
  }
  std::optional<std::size_t> best;
  bool dipped = false;
  for (std::size_t lag = 1; lag <= max_lag && lag + 1 < acf.size(); ++lag) {
    if (acf[lag] < 0.0) dipped = true;
    if (lag < 2 || !dipped) continue;
    if (acf[lag] > acf[lag - 1] && acf[lag] >= acf[lag + 1] && acf[lag] >= min_peak) {
      if (!best || acf[lag] > acf[*best]) best = lag;
    }
  }
  if (!best) return std::nullopt;
  const std::size_t k = *best;
  const double a = acf[k - 1];
  const double b = acf[k];
  const double c = acf[k + 1];
  const double denom = a - 2.0 * b + c;
  double shift = denom != 0.0 ? 0.5 * (a - c) / denom : 0.0;
  shift = std::clamp(shift, -0.5, 0.5);
  return static_cast<double>(k) + shift;
}

double volatility_ratio(std::span<const double> values) {
  const std::size_t n = values.size();
  if (n < 3) return 0.0;
  const double range = value_range(values);
  if (!(range > 0.0)) return 0.0;
  std::vector<double> r(n - 2);
  for (std::size_t k = 1; k + 1 < n; ++k) r[k - 1] = values[k] - 0.5 * (values[k - 1] + values[k + 1]);
  const double mean = std::accumulate(r.begin(), r.end(), 0.0) / static_cast<double>(r.size());
  double ss = 0.0;
  for (double v : r) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(r.size())) / range;
}

Volatility classify_volatility(double ratio, const AnnotationParams& params) noexcept {
  if (ratio < params.volatility_low) return Volatility::low;
  if (ratio <= params.volatility_high) return Volatility::medium;
  return Volatility::high;
}

double trend_strength(std::span<const double> values) {
  if (values.size() < 2) return 0.0;
  const double range = value_range(values);
  if (!(range > 0.0)) return 0.0;
  return least_squares_slope(values) * static_cast<double>(values.size() - 1) / range;
}

OverallTrend classify_trend(double strength, double steady_threshold) noexcept {
  if (std::fabs(strength) < steady_threshold) return OverallTrend::steady;
  return strength > 0.0 ? OverallTrend::increasing : OverallTrend::decreasing;
}

SeriesAnnotation annotate(const Series& series, const AnnotationParams& params) {
  validate_series(series, 1);
  return annotate(series.view(), params);
}

SeriesAnnotation annotate(std::span<const double> values, const AnnotationParams& params) {
  validate_values(values, 1);
  const std::size_t n = values.size();
  SeriesAnnotation a;
  a.length = n;
  a.ext = extrema(values);
  const auto se = start_end_compare(values);
  a.start = se.start;
  a.end = se.end;
  const double range = a.ext.max.value - a.ext.min.value;

  std::optional<double> period;
  if (n >= 8) period = estimate_period(values, params.acf_min_peak);
  if (period) {
    CycleStats cs;
    cs.estimated_period = *period;
    cs.cycle_count = round1(static_cast<double>(n) / *period);
    std::vector<double> peaks;
    std::vector<double> valleys;
    for (std::size_t w = 0;; ++w) {
      const auto from = static_cast<std::size_t>(std::lround(static_cast<double>(w) * *period));
      if (from >= n) break;
      const auto to = std::min(n, static_cast<std::size_t>(std::lround(static_cast<double>(w + 1) * *period)));
      if (static_cast<double>(to - from) < 0.5 * *period) break;
      const auto [lo, hi] = std::minmax_element(values.begin() + static_cast<std::ptrdiff_t>(from),
                                                values.begin() + static_cast<std::ptrdiff_t>(to));
      peaks.push_back(*hi);
      valleys.push_back(*lo);
    }
    cs.peak_range = {*std::min_element(peaks.begin(), peaks.end()), *std::max_element(peaks.begin(), peaks.end())};
    cs.valley_range = {*std::min_element(valleys.begin(), valleys.end()),
                       *std::max_element(valleys.begin(), valleys.end())};
    double amp = 0.0;
    for (std::size_t i = 0; i < peaks.size(); ++i) amp += 0.5 * (peaks[i] - valleys[i]);
    cs.mean_amplitude = amp / static_cast<double>(peaks.size());
    a.cycles = cs;
  }

  a.smoothing_window = base_smoothing_window(n);
  if (n >= 8) {
    const double width = std::max(static_cast<double>(a.smoothing_window), period.value_or(0.0));
    a.smoothing_window = static_cast<std::size_t>(std::lround(width));
    const auto smooth = trend_smooth(values, width);
    for (const auto& s : segment_trend(smooth, range, params)) {
      a.segments.push_back({s.start, s.end, s.direction, values[s.start], values[s.end]});
    }
  } else {
    const Direction d = range <= 0.0 ? Direction::flat
                        : values.back() > values.front() ? Direction::up
                        : values.back() < values.front() ? Direction::down
                                                         : Direction::flat;
    a.segments.push_back({0, n - 1, d, values.front(), values.back()});
  }

  const TrendSegment* prev = nullptr;
  for (const auto& s : a.segments) {
    if (s.direction == Direction::flat) continue;
    if (prev && prev->direction != s.direction) {
      a.turning_points.push_back(prev->end_idx);
      a.events.push_back({prev->direction == Direction::up ? synth::EventKind::rises_then_falls
                                                           : synth::EventKind::falls_then_rises,
                          prev->end_idx, values[prev->end_idx]});
    }
    prev = &s;
  }
  a.turning_point_count = a.turning_points.size();

  for (const auto& e : detect_spikes(values, range, params.spike_threshold)) a.events.push_back(e);
  std::sort(a.events.begin(), a.events.end(),
            [](const DetectedEvent& x, const DetectedEvent& y) { return x.index < y.index; });

  a.volatility_ratio = volatility_ratio(values);
  a.volatility = classify_volatility(a.volatility_ratio, params);
  a.trend_strength = trend_strength(values);
  a.overall_trend = classify_trend(a.trend_strength, params.steady_strength);
  return a;
}

}  // namespace tsbench::features
