#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tsbench/features.hpp"
#include "tsbench/qa_item.hpp"
#include "tsbench/series.hpp"

namespace tsbench::taskgen {

enum class SkipReason {
  tie,
  printed_tie,
  ambiguous_precision,
  unresolvable_tie,
  perturbation_collision,
  ambiguous_trend,
  pool_exhausted,
  split_infeasible,
  insufficient_pool,
  duplicate_description,
  verification_failed,
};

std::string_view to_string(SkipReason) noexcept;

/// Either an item or the reason none could be built from these inputs.
struct Generated {
  std::optional<QAItem> item;
  SkipReason reason = SkipReason::tie;
  std::string detail;

  explicit operator bool() const noexcept { return item.has_value(); }
  static Generated ok(QAItem item) { return {std::move(item), SkipReason::tie, {}}; }
  static Generated skip(SkipReason reason, std::string detail = {}) {
    return {std::nullopt, reason, std::move(detail)};
  }
};

// Question bodies. L1 bodies are reproduced verbatim; the leading
// "Given the time series: <ts>, " is produced by the encoding strategy.
extern const std::string_view kMinMaxQuestion;
extern const std::string_view kStartEndQuestion;
std::string multiseries_question(bool lowest);
std::string subseries_question(std::size_t series_number, std::size_t from, std::size_t to);

Generated gen_minmax(const Series& series, std::uint64_t seed);
Generated gen_start_end(const Series& series, std::uint64_t seed, double relative_tolerance = 0.0);
Generated gen_multiseries(std::span<const Series> series, std::uint64_t seed);
Generated gen_subseries(std::span<const Series> series, std::uint64_t seed);

// Numerical perception -------------------------------------------------------

/// Trend strength band in which the overall-trend label is considered unsafe.
struct TrendBand {
  double steady_below = 0.05;
  double trend_above = 0.20;
};

/// Clear-cut trend label, or nothing when the strength sits inside the band.
std::optional<features::OverallTrend> unambiguous_trend(std::span<const double> values, TrendBand band = {});

/// Value text used in perception options: 3 decimals from 1 upward, four
/// significant digits below.
std::string perception_number(double value);

struct PerceptionClaim {
  enum class Feature { minimum, maximum, starting, ending } feature = Feature::minimum;
  double value = 0.0;
  std::string value_text;
  std::optional<std::size_t> index;  // min/max claims only
  features::OverallTrend trend = features::OverallTrend::steady;
};

std::string perception_option_text(const PerceptionClaim& claim);
std::optional<PerceptionClaim> parse_perception_option(std::string_view text);
/// Both the numeric and the shape claim hold for the series.
bool perception_claim_holds(const PerceptionClaim& claim, std::span<const double> values, TrendBand band = {});

Generated gen_numerical_perception(const Series& series, std::uint64_t seed, TrendBand band = {});

// Uniqueness -----------------------------------------------------------------

struct VerificationResult {
  enum class Status { pass, fail, not_applicable } status = Status::not_applicable;
  std::vector<char> offending;  // letters of options consistent with ground truth besides the key, or the key itself when it is not
  std::string detail;

  bool passed() const noexcept { return status == Status::pass; }
};

std::string_view to_string(VerificationResult::Status) noexcept;

/// Checks that exactly one option (or the structured key) agrees with
/// ground truth recomputed from the item's own series.
VerificationResult verify_uniqueness(const QAItem& item);

// Successor MCQ ---------------------------------------------------------------

/// Sample Pearson correlation; throws Errc::undefined_correlation on zero variance.
double pearson(std::span<const double> a, std::span<const double> b);
double euclidean(std::span<const double> a, std::span<const double> b);

struct ScoreWeights {
  double gap = 0.5;
  double grad = 0.5;
};

double continuation_score(std::span<const double> context, std::span<const double> candidate,
                          ScoreWeights weights = {});

struct SuccessorConfig {
  std::size_t context_len = 96;
  std::size_t patch_len = 24;
  double r_reject = 0.8;
  double r_mutual_max = 0.5;
  // Absolute distance floor; when unset, 0.1 x RMS about the mean of the positive patch.
  std::optional<double> d_min;
  std::optional<std::size_t> safety_window;  // default max(5, patch_len / 8)
  ScoreWeights weights;
  std::size_t max_draws = 200;
  std::size_t max_split_attempts = 64;

  std::size_t effective_safety_window() const noexcept;
  double effective_d_min(std::span<const double> positive) const;
};

void validate(const SuccessorConfig& cfg);

/// Min-max rescale of `values` onto [lo, hi]; empty when `values` is constant.
std::optional<std::vector<double>> rescale_to(std::span<const double> values, double lo, double hi);

/// Indices of annotated high-variance events (spikes and turning points).
std::vector<std::size_t> unstable_points(std::span<const double> values);

extern const std::string_view kSuccessorQuestionHead;

Generated gen_successor_mcq(std::span<const Series> pool, const SuccessorConfig& cfg, std::uint64_t seed);

}  // namespace tsbench::taskgen
