#include "tsbench/taskgen.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fmt/format.h>
#include <numeric>
#include <regex>
#include <set>

#include "tsbench/error.hpp"
#include "tsbench/rng.hpp"

namespace tsbench::taskgen {

using features::ExtremaOrder;
using features::OverallTrend;
using features::StartEndVerdict;

std::string_view to_string(SkipReason reason) noexcept {
  switch (reason) {
    case SkipReason::tie: return "tie";
    case SkipReason::printed_tie: return "printed_tie";
    case SkipReason::ambiguous_precision: return "ambiguous_precision";
    case SkipReason::unresolvable_tie: return "unresolvable_tie";
    case SkipReason::perturbation_collision: return "perturbation_collision";
    case SkipReason::ambiguous_trend: return "ambiguous_trend";
    case SkipReason::pool_exhausted: return "pool_exhausted";
    case SkipReason::split_infeasible: return "split_infeasible";
    case SkipReason::insufficient_pool: return "insufficient_pool";
    case SkipReason::duplicate_description: return "duplicate_description";
    case SkipReason::verification_failed: return "verification_failed";
  }
  return "?";
}

std::string_view to_string(VerificationResult::Status status) noexcept {
  switch (status) {
    case VerificationResult::Status::pass: return "pass";
    case VerificationResult::Status::fail: return "fail";
    case VerificationResult::Status::not_applicable: return "not_applicable";
  }
  return "?";
}

const std::string_view kMinMaxQuestion =
    "Find the maximum and minimum values in the time series and report their first occurrence indices "
    "(if max/min repeats, use the earliest index). Provide the exact values and state which appears first. "
    "The first index is 0.\n"
    "\n"
    "You MUST exactly follow the output format as:\n"
    "\n"
    "<max>[index, value]</max>\n"
    "\n"
    "<min>[index, value]</min>\n"
    "\n"
    "The max value appears first.\n"
    "\n"
    "OR\n"
    "\n"
    "The min value appears first.";

const std::string_view kStartEndQuestion =
    "Compare the value at the start of the time series (index 0) and the value at the end (last index). "
    "Report both [index, value] pairs and then state the comparison result.\n"
    "\n"
    "Output format (MUST follow exactly):\n"
    "\n"
    "<start>[index, value]</start>\n"
    "\n"
    "<end>[index, value]</end>\n"
    "\n"
    "The start value is larger than the value at the end.\n"
    "\n"
    "OR\n"
    "\n"
    "The start value is smaller than the value at the end.\n"
    "\n"
    "OR\n"
    "\n"
    "The start value is equal to the value at the end.";

std::string multiseries_question(bool lowest) {
  return fmt::format(
      "Answer the question based on the provided multiple time series.\n"
      "\n"
      "You MUST exactly follow the output format as:\n"
      "\n"
      "<answer>[index, value]</answer>\n"
      "\n"
      "<series>X</series>, \n"
      "\n"
      "where X refers to the index of the time series.\n"
      "\n"
      "Question: Compare the {0} values of the multiple given time series. Which series has the {1} {0} value, "
      "and what is that specific value?",
      lowest ? "minimum" : "maximum", lowest ? "lowest" : "highest");
}

std::string subseries_question(std::size_t series_number, std::size_t from, std::size_t to) {
  return fmt::format(
      "Answer the question based on the provided multiple time series.\n"
      "\n"
      "You MUST exactly follow the output format as:\n"
      "\n"
      "<answer>[v1, v2, ..., vk]</answer>\n"
      "\n"
      "Recover the values of series {} from index {} to index {} (inclusive). Return the values as a list in the "
      "exact order.",
      series_number, from, to);
}

const std::string_view kSuccessorQuestionHead =
    "The time series above is a lookback window. Exactly one of the four candidate patches below is its true "
    "chronological successor, continuing the series immediately after its last index. The other candidates come "
    "from different series. Identify the successor.\n"
    "\n"
    "Options:";

namespace {

std::string item_id(TaskKind kind, std::uint64_t seed) { return fmt::format("{}-{:016x}", to_string(kind), seed); }

QAItem base_item(TaskKind kind, std::uint64_t seed) {
  QAItem item;
  item.id = item_id(kind, seed);
  item.task_kind = kind;
  item.level = level_of(kind);
  item.provenance.seed = seed;
  return item;
}

/// An index before `index` whose printed value reads the same as values[index].
bool earlier_printed_twin(std::span<const double> values, std::size_t index) {
  const std::string target = format_value(values[index]);
  for (std::size_t j = 0; j < index; ++j) {
    if (format_value(values[j]) == target) return true;
  }
  return false;
}

PrintedPair pair_at(std::span<const double> values, std::size_t index) {
  return {index, PrintedValue::of(values[index])};
}

void require_equal_lengths(std::span<const Series> series, std::size_t lo, std::size_t hi, std::string_view what) {
  if (series.size() < lo || series.size() > hi) {
    throw Error(Errc::invalid_series, fmt::format("{} needs {}-{} series, got {}", what, lo, hi, series.size()));
  }
  for (const auto& s : series) {
    validate_series(s, 2);
    if (s.size() != series.front().size()) {
      throw Error(Errc::length_mismatch, fmt::format("{}: series '{}' has length {}, expected {}", what, s.id,
                                                     s.size(), series.front().size()));
    }
  }
}

std::optional<MinMaxKey> minmax_key(std::span<const double> values, SkipReason& why) {
  const auto ext = features::extrema(values);
  if (ext.order == ExtremaOrder::tie) {
    why = SkipReason::tie;
    return std::nullopt;
  }
  if (earlier_printed_twin(values, ext.max.index) || earlier_printed_twin(values, ext.min.index)) {
    why = SkipReason::printed_tie;
    return std::nullopt;
  }
  if (format_value(ext.max.value) == format_value(ext.min.value)) {
    why = SkipReason::ambiguous_precision;
    return std::nullopt;
  }
  return MinMaxKey{pair_at(values, ext.max.index), pair_at(values, ext.min.index), ext.order};
}

std::optional<StartEndKey> start_end_key(std::span<const double> values, double tolerance, SkipReason& why) {
  const auto se = features::start_end_compare(values, tolerance);
  const bool printed_equal = format_value(se.start.value) == format_value(se.end.value);
  if (printed_equal != (se.verdict == StartEndVerdict::equal)) {
    why = SkipReason::ambiguous_precision;
    return std::nullopt;
  }
  return StartEndKey{pair_at(values, 0), pair_at(values, values.size() - 1), se.verdict};
}

/// Winning series for the lowest-minimum / highest-maximum query, unique at printed precision.
std::optional<MultiSeriesKey> multiseries_key(std::span<const Series> series, bool lowest, SkipReason& why) {
  std::vector<features::IndexValue> extremes;
  for (const auto& s : series) {
    const auto ext = features::extrema(s.view());
    extremes.push_back(lowest ? ext.min : ext.max);
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < extremes.size(); ++i) {
    if (lowest ? extremes[i].value < extremes[best].value : extremes[i].value > extremes[best].value) best = i;
  }
  const std::string text = format_value(extremes[best].value);
  for (std::size_t i = 0; i < extremes.size(); ++i) {
    if (i != best && format_value(extremes[i].value) == text) {
      why = SkipReason::unresolvable_tie;
      return std::nullopt;
    }
  }
  if (earlier_printed_twin(series[best].view(), extremes[best].index)) {
    why = SkipReason::printed_tie;
    return std::nullopt;
  }
  return MultiSeriesKey{best + 1, pair_at(series[best].view(), extremes[best].index), lowest};
}

}  // namespace

Generated gen_minmax(const Series& series, std::uint64_t seed) {
  validate_series(series, 2);
  SkipReason why{};
  auto key = minmax_key(series.view(), why);
  if (!key) return Generated::skip(why, series.id);
  QAItem item = base_item(TaskKind::minmax, seed);
  item.series = {series};
  item.question = std::string(kMinMaxQuestion);
  item.key = *key;
  return Generated::ok(std::move(item));
}

Generated gen_start_end(const Series& series, std::uint64_t seed, double relative_tolerance) {
  validate_series(series, 2);
  SkipReason why{};
  auto key = start_end_key(series.view(), relative_tolerance, why);
  if (!key) return Generated::skip(why, series.id);
  QAItem item = base_item(TaskKind::start_end, seed);
  item.series = {series};
  item.question = std::string(kStartEndQuestion);
  item.key = *key;
  if (relative_tolerance > 0.0) item.provenance.extra["start_end_tolerance"] = fmt::format("{}", relative_tolerance);
  return Generated::ok(std::move(item));
}

Generated gen_multiseries(std::span<const Series> series, std::uint64_t seed) {
  require_equal_lengths(series, 2, 5, "multi-series comparison");
  Rng rng = Rng(seed).stream("multiseries");
  const bool first_choice = rng.bernoulli(0.5);
  SkipReason why{};
  for (bool lowest : {first_choice, !first_choice}) {
    auto key = multiseries_key(series, lowest, why);
    if (!key) continue;
    QAItem item = base_item(TaskKind::multiseries_compare, seed);
    item.series.assign(series.begin(), series.end());
    item.question = multiseries_question(lowest);
    item.key = *key;
    if (lowest != first_choice) item.provenance.flags.push_back("query_switched");
    return Generated::ok(std::move(item));
  }
  return Generated::skip(SkipReason::unresolvable_tie, "both extreme queries tie across series");
}

Generated gen_subseries(std::span<const Series> series, std::uint64_t seed) {
  require_equal_lengths(series, 1, 5, "subseries localization");
  const std::size_t n = series.front().size();
  if (n < 8) throw Error(Errc::invalid_series, "subseries localization needs at least 8 points");
  Rng rng = Rng(seed).stream("subseries");
  const std::size_t which = rng.index(series.size());
  const auto width = static_cast<std::size_t>(rng.uniform_int(8, static_cast<std::int64_t>(std::min<std::size_t>(32, n))));
  const auto from = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n - width)));
  const std::size_t to = from + width - 1;
  if (to >= n || width < 8 || width > 32) throw std::logic_error("subseries window out of range");

  SubseriesKey key{which + 1, from, to, {}};
  for (std::size_t k = from; k <= to; ++k) key.values.push_back(PrintedValue::of(series[which].values[k]));
  QAItem item = base_item(TaskKind::subseries_localize, seed);
  item.series.assign(series.begin(), series.end());
  item.question = subseries_question(which + 1, from, to);
  item.key = std::move(key);
  return Generated::ok(std::move(item));
}

// Numerical perception ---------------------------------------------------------

std::optional<OverallTrend> unambiguous_trend(std::span<const double> values, TrendBand band) {
  const double s = features::trend_strength(values);
  if (std::fabs(s) < band.steady_below) return OverallTrend::steady;
  if (std::fabs(s) < band.trend_above) return std::nullopt;
  return s > 0.0 ? OverallTrend::increasing : OverallTrend::decreasing;
}

std::string perception_number(double value) {
  const double mag = std::fabs(value);
  int decimals = 3;
  if (mag > 0.0 && mag < 1.0) decimals = 4 + static_cast<int>(std::floor(-std::log10(mag)));
  return format_fixed(value, decimals);
}

namespace {

std::string_view feature_word(PerceptionClaim::Feature f) {
  switch (f) {
    case PerceptionClaim::Feature::minimum: return "minimum";
    case PerceptionClaim::Feature::maximum: return "maximum";
    case PerceptionClaim::Feature::starting: return "starting";
    case PerceptionClaim::Feature::ending: return "ending";
  }
  return "?";
}

std::string_view feature_short(PerceptionClaim::Feature f) {
  switch (f) {
    case PerceptionClaim::Feature::minimum: return "min";
    case PerceptionClaim::Feature::maximum: return "max";
    case PerceptionClaim::Feature::starting: return "start";
    case PerceptionClaim::Feature::ending: return "end";
  }
  return "?";
}

std::optional<OverallTrend> trend_from_word(std::string_view w) {
  for (auto t : {OverallTrend::increasing, OverallTrend::decreasing, OverallTrend::steady}) {
    if (features::to_string(t) == w) return t;
  }
  return std::nullopt;
}

int text_decimals(std::string_view text) {
  const auto dot = text.find('.');
  return dot == std::string_view::npos ? 0 : static_cast<int>(text.size() - dot - 1);
}

}  // namespace

std::string perception_option_text(const PerceptionClaim& claim) {
  using F = PerceptionClaim::Feature;
  const auto trend = features::to_string(claim.trend);
  if (claim.feature == F::minimum || claim.feature == F::maximum) {
    return fmt::format("The {} value is {} at index {}, and the overall trend is {}.", feature_word(claim.feature),
                       claim.value_text, claim.index.value_or(0), trend);
  }
  return fmt::format("The {} value is {}, and the overall trend is {}.", feature_word(claim.feature), claim.value_text,
                     trend);
}

std::optional<PerceptionClaim> parse_perception_option(std::string_view text) {
  static const std::regex extreme(
      R"(^The (minimum|maximum) value is ([-+]?[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?) at index ([0-9]+), and the overall trend is (increasing|decreasing|steady)\.$)");
  static const std::regex boundary(
      R"(^The (starting|ending) value is ([-+]?[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?), and the overall trend is (increasing|decreasing|steady)\.$)");
  const std::string s(text);
  std::smatch m;
  PerceptionClaim claim;
  std::string trend_word;
  if (std::regex_match(s, m, extreme)) {
    claim.feature = m[1] == "minimum" ? PerceptionClaim::Feature::minimum : PerceptionClaim::Feature::maximum;
    claim.value_text = m[2];
    claim.index = static_cast<std::size_t>(std::stoull(m[3]));
    trend_word = m[4];
  } else if (std::regex_match(s, m, boundary)) {
    claim.feature = m[1] == "starting" ? PerceptionClaim::Feature::starting : PerceptionClaim::Feature::ending;
    claim.value_text = m[2];
    trend_word = m[3];
  } else {
    return std::nullopt;
  }
  if (!parse_number(claim.value_text, claim.value)) return std::nullopt;
  claim.trend = *trend_from_word(trend_word);
  return claim;
}

bool perception_claim_holds(const PerceptionClaim& claim, std::span<const double> values, TrendBand band) {
  if (values.empty()) return false;
  const auto trend = unambiguous_trend(values, band);
  if (!trend || *trend != claim.trend) return false;
  double actual = 0.0;
  using F = PerceptionClaim::Feature;
  switch (claim.feature) {
    case F::minimum:
    case F::maximum: {
      const auto ext = features::extrema(values);
      const auto& truth = claim.feature == F::minimum ? ext.min : ext.max;
      if (!claim.index || *claim.index != truth.index) return false;
      actual = truth.value;
      break;
    }
    case F::starting: actual = values.front(); break;
    case F::ending: actual = values.back(); break;
  }
  const double tol = printed_tolerance(text_decimals(claim.value_text));
  return std::fabs(claim.value - actual) <= tol * (1.0 + 1e-9);
}

Generated gen_numerical_perception(const Series& series, std::uint64_t seed, TrendBand band) {
  using F = PerceptionClaim::Feature;
  validate_series(series, 8);
  const auto values = series.view();
  const auto trend = unambiguous_trend(values, band);
  if (!trend) return Generated::skip(SkipReason::ambiguous_trend, series.id);
  const auto ext = features::extrema(values);
  if (ext.order == ExtremaOrder::tie) return Generated::skip(SkipReason::tie, series.id);

  Rng rng = Rng(seed).stream("perception");
  const F feature = rng.bernoulli(0.5) ? F::minimum : F::maximum;
  const auto& truth_pair = feature == F::minimum ? ext.min : ext.max;
  const std::string truth_text = perception_number(truth_pair.value);
  for (std::size_t j = 0; j < truth_pair.index; ++j) {
    if (perception_number(values[j]) == truth_text) return Generated::skip(SkipReason::printed_tie, series.id);
  }

  const double range = ext.max.value - ext.min.value;
  PerceptionClaim truth{feature, truth_pair.value, truth_text, truth_pair.index, *trend};
  std::vector<PerceptionClaim> claims{truth};
  std::set<std::string> texts{perception_option_text(truth)};

  auto perturbed = [&](PerceptionClaim base, double actual) -> std::optional<PerceptionClaim> {
    for (int attempt = 0; attempt < 16; ++attempt) {
      const double rel = rng.uniform(0.03, 0.15) * (rng.bernoulli(0.5) ? 1.0 : -1.0);
      const double v = actual != 0.0 ? actual * (1.0 + rel) : rel * range;
      base.value_text = perception_number(v);
      parse_number(base.value_text, base.value);
      if (base.value_text == perception_number(actual)) continue;
      if (perception_claim_holds(base, values, band)) continue;
      if (texts.contains(perception_option_text(base))) continue;
      return base;
    }
    return std::nullopt;
  };

  auto d1 = perturbed(truth, truth_pair.value);
  if (!d1) return Generated::skip(SkipReason::perturbation_collision, "same-feature perturbation");
  claims.push_back(*d1);
  texts.insert(perception_option_text(*d1));

  PerceptionClaim other{rng.bernoulli(0.5) ? F::starting : F::ending, 0.0, {}, std::nullopt, *trend};
  const double other_actual = other.feature == F::starting ? values.front() : values.back();
  auto d2 = perturbed(other, other_actual);
  if (!d2) return Generated::skip(SkipReason::perturbation_collision, "boundary-value perturbation");
  claims.push_back(*d2);
  texts.insert(perception_option_text(*d2));

  std::vector<OverallTrend> wrong;
  for (auto t : {OverallTrend::increasing, OverallTrend::decreasing, OverallTrend::steady}) {
    if (t != *trend) wrong.push_back(t);
  }
  PerceptionClaim d3 = truth;
  d3.trend = wrong[rng.index(wrong.size())];
  claims.push_back(d3);

  // 0 = correct, 1/2 = value errors, 3 = shape error
  std::array<std::size_t, 4> order{0, 1, 2, 3};
  rng.shuffle(std::span<std::size_t>(order));

  QAItem item = base_item(TaskKind::numerical_perception, seed);
  item.series = {series};
  std::string question =
      "Carefully analyze each option, choose the option that correctly describes BOTH the numerical features and "
      "the overall shape.\n"
      "\n"
      "Constraint: You must select the option with the most precise numerical value.\n"
      "\n"
      "Options:";
  std::string cot;
  char key = 'A';
  for (std::size_t slot = 0; slot < 4; ++slot) {
    const char letter = static_cast<char>('A' + slot);
    const auto& claim = claims[order[slot]];
    const std::string text = perception_option_text(claim);
    item.options.push_back({letter, text});
    question += fmt::format("\n\n{}. {}", letter, text);
    if (order[slot] == 0) {
      key = letter;
      continue;
    }
    if (order[slot] == 3) {
      cot += fmt::format(
          "Option {}: incorrect. While the numerical value is correct, the shape description 'the overall trend is "
          "{}' contradicts the visual plot. The actual trend is that the overall trend is {}.\n\n",
          letter, features::to_string(claim.trend), features::to_string(*trend));
    } else {
      cot += fmt::format(
          "Option {}: incorrect. Although the shape description matches, the numerical value {} is imprecise. "
          "According to the numerical information, the correct value for {} is {}.\n\n",
          letter, claim.value_text, feature_short(feature), truth_text);
    }
  }
  cot += fmt::format("The correct answer is {}.", key);
  item.question = std::move(question);
  item.key = ChoiceKey{key};
  item.cot = std::move(cot);
  item.provenance.extra["truth_feature"] = std::string(feature_word(feature));

  const auto check = verify_uniqueness(item);
  if (!check.passed()) return Generated::skip(SkipReason::verification_failed, check.detail);
  item.provenance.flags.push_back("verified");
  return Generated::ok(std::move(item));
}

// Successor ----------------------------------------------------------------------

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw Error(Errc::length_mismatch, fmt::format("pearson over lengths {} and {}", a.size(), b.size()));
  }
  if (a.size() < 2) throw Error(Errc::undefined_correlation, "pearson needs at least two points");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) throw Error(Errc::undefined_correlation, "zero variance");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double euclidean(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(Errc::length_mismatch, "euclidean distance over unequal lengths");
  double ss = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) ss += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(ss);
}

double continuation_score(std::span<const double> context, std::span<const double> candidate, ScoreWeights w) {
  if (context.empty() || candidate.empty()) throw Error(Errc::empty_input, "continuation score of an empty window");
  const std::size_t n = context.size();
  const std::size_t tail = std::min<std::size_t>(4, n - 1);
  const double g_tail = tail > 0 ? (context[n - 1] - context[n - 1 - tail]) / static_cast<double>(tail) : 0.0;
  const std::size_t head = std::min<std::size_t>(4, candidate.size() - 1);
  const double g_head = head > 0 ? (candidate[head] - candidate[0]) / static_cast<double>(head)
                                 : candidate[0] - context[n - 1];
  const auto [lo, hi] = std::minmax_element(context.begin(), context.end());
  const double s = *hi > *lo ? *hi - *lo : 1.0;
  const double s_g = std::fabs(g_tail) + 0.01 * s;
  const double gap = std::fabs(candidate[0] - (context[n - 1] + g_tail));
  return w.gap * std::exp(-gap / s) + w.grad * std::exp(-std::fabs(g_head - g_tail) / s_g);
}

std::size_t SuccessorConfig::effective_safety_window() const noexcept {
  return safety_window.value_or(std::max<std::size_t>(5, patch_len / 8));
}

double SuccessorConfig::effective_d_min(std::span<const double> positive) const {
  if (d_min) return *d_min;
  const double n = static_cast<double>(positive.size());
  const double mean = std::accumulate(positive.begin(), positive.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : positive) ss += (v - mean) * (v - mean);
  return 0.1 * std::sqrt(ss / n);
}

void validate(const SuccessorConfig& cfg) {
  auto bad = [](std::string what) { throw Error(Errc::invalid_config, std::move(what)); };
  if (cfg.context_len < 8 || cfg.patch_len < 8) bad("context_len and patch_len must be >= 8");
  if (!(cfg.r_mutual_max > 0.0 && cfg.r_mutual_max <= cfg.r_reject && cfg.r_reject <= 1.0)) {
    bad("need 0 < r_mutual_max <= r_reject <= 1");
  }
  if (std::fabs(cfg.weights.gap + cfg.weights.grad - 1.0) > 1e-9 || cfg.weights.gap < 0.0 || cfg.weights.grad < 0.0) {
    bad("score weights must be non-negative and sum to 1");
  }
  if (cfg.d_min && *cfg.d_min < 0.0) bad("d_min must be non-negative");
}

std::optional<std::vector<double>> rescale_to(std::span<const double> values, double lo, double hi) {
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  if (!(*mx > *mn)) return std::nullopt;
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = lo + (values[i] - *mn) / (*mx - *mn) * (hi - lo);
  return out;
}

std::vector<std::size_t> unstable_points(std::span<const double> values) {
  const auto a = features::annotate(values);
  std::vector<std::size_t> out = a.turning_points;
  for (const auto& e : a.events) out.push_back(e.index);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

namespace {

std::string bracketed(std::span<const double> values) {
  std::string out = "[";
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ", ";
    out += format_value(values[i]);
  }
  return out + "]";
}

Series window_of(const Series& host, std::size_t start, std::size_t length) {
  Series s;
  s.id = fmt::format("{}@{}+{}", host.id, start, length);
  s.values.assign(host.values.begin() + static_cast<std::ptrdiff_t>(start),
                  host.values.begin() + static_cast<std::ptrdiff_t>(start + length));
  s.sampling_label = host.sampling_label;
  s.source = host.source;
  s.origin = host.id;
  s.origin_offset = start;
  return s;
}

}  // namespace

Generated gen_successor_mcq(std::span<const Series> pool, const SuccessorConfig& cfg, std::uint64_t seed) {
  validate(cfg);
  if (pool.size() < 4) return Generated::skip(SkipReason::insufficient_pool, "need at least 4 series");
  const std::size_t need = cfg.context_len + cfg.patch_len;
  std::vector<std::size_t> hosts;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (pool[i].size() >= need) hosts.push_back(i);
  }
  if (hosts.empty()) return Generated::skip(SkipReason::insufficient_pool, "no series long enough to host a split");

  Rng rng = Rng(seed).stream("successor");
  const Series& host = pool[hosts[rng.index(hosts.size())]];
  validate_series(host, need);
  const auto unstable = unstable_points(host.view());
  const std::size_t window = cfg.effective_safety_window();

  std::optional<std::size_t> split;
  for (std::size_t attempt = 0; attempt < cfg.max_split_attempts && !split; ++attempt) {
    const auto s = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(cfg.context_len),
                                                            static_cast<std::int64_t>(host.size() - cfg.patch_len)));
    const bool safe = std::none_of(unstable.begin(), unstable.end(), [&](std::size_t u) {
      const std::size_t dist = u < s ? s - 1 - u : u - s;
      return dist <= window;
    });
    if (safe) split = s;
  }
  if (!split) return Generated::skip(SkipReason::split_infeasible, host.id);

  const Series context = window_of(host, *split - cfg.context_len, cfg.context_len);
  const Series positive = window_of(host, *split, cfg.patch_len);
  const auto [plo, phi] = std::minmax_element(positive.values.begin(), positive.values.end());
  const double d_min = cfg.effective_d_min(positive.view());
  const double positive_score = continuation_score(context.view(), positive.view(), cfg.weights);

  std::vector<Series> negatives;
  std::set<std::string> used{host.id};
  for (std::size_t draw = 0; draw < cfg.max_draws && negatives.size() < 3; ++draw) {
    const Series& source = pool[rng.index(pool.size())];
    if (used.contains(source.id) || source.size() < cfg.patch_len) continue;
    const auto start = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(source.size() - cfg.patch_len)));
    Series candidate = window_of(source, start, cfg.patch_len);
    auto rescaled = rescale_to(candidate.view(), *plo, *phi);
    if (!rescaled) continue;
    candidate.values = std::move(*rescaled);
    candidate.id += "~rescaled";
    try {
      if (pearson(candidate.view(), positive.view()) >= cfg.r_reject) continue;
      if (euclidean(candidate.view(), positive.view()) < d_min) continue;
      bool mutual_ok = true;
      for (const auto& other : negatives) {
        if (pearson(candidate.view(), other.view()) >= cfg.r_mutual_max) {
          mutual_ok = false;
          break;
        }
      }
      if (!mutual_ok) continue;
    } catch (const Error& e) {
      if (e.code() != Errc::undefined_correlation) throw;
      continue;
    }
    if (continuation_score(context.view(), candidate.view(), cfg.weights) >= positive_score) continue;
    used.insert(source.id);
    negatives.push_back(std::move(candidate));
  }
  if (negatives.size() < 3) {
    return Generated::skip(SkipReason::pool_exhausted, fmt::format("{} admissible negatives", negatives.size()));
  }

  std::array<std::size_t, 4> order{0, 1, 2, 3};  // 0 is the positive
  rng.shuffle(std::span<std::size_t>(order));

  QAItem item = base_item(TaskKind::successor, seed);
  item.series.push_back(context);
  std::string question(kSuccessorQuestionHead);
  std::string sources;
  char key = 'A';
  for (std::size_t slot = 0; slot < 4; ++slot) {
    const char letter = static_cast<char>('A' + slot);
    const Series& patch = order[slot] == 0 ? positive : negatives[order[slot] - 1];
    if (order[slot] == 0) key = letter;
    item.series.push_back(patch);
    const std::string text = bracketed(patch.view());
    item.options.push_back({letter, text});
    question += fmt::format("\n\n{}. {}", letter, text);
    sources += fmt::format("{}{}={}", slot ? "," : "", letter, patch.origin);
  }
  question += "\n\nAfter you have analyzed all options, output the best answer in the format: \"The correct answer is X\".";
  item.question = std::move(question);
  item.key = ChoiceKey{key};
  item.provenance.extra["host"] = host.id;
  item.provenance.extra["split"] = std::to_string(*split);
  item.provenance.extra["option_sources"] = sources;
  item.provenance.extra["d_min"] = fmt::format("{}", d_min);
  item.provenance.extra["w_gap"] = fmt::format("{}", cfg.weights.gap);

  const auto check = verify_uniqueness(item);
  if (!check.passed()) return Generated::skip(SkipReason::verification_failed, check.detail);
  item.provenance.flags.push_back("verified");
  return Generated::ok(std::move(item));
}

// Verification ---------------------------------------------------------------------

namespace {

VerificationResult pass() { return {VerificationResult::Status::pass, {}, {}}; }

VerificationResult fail(std::string detail, std::vector<char> letters = {}) {
  return {VerificationResult::Status::fail, std::move(letters), std::move(detail)};
}

}  // namespace

VerificationResult verify_uniqueness(const QAItem& item) {
  try {
    switch (item.task_kind) {
      case TaskKind::minmax: {
        SkipReason why{};
        const auto expect = minmax_key(item.series.at(0).view(), why);
        if (!expect) return fail(fmt::format("key not unique ({})", to_string(why)));
        if (std::get<MinMaxKey>(item.key) != *expect) return fail("stored key differs from recomputed extrema");
        return pass();
      }
      case TaskKind::start_end: {
        SkipReason why{};
        double tol = 0.0;
        if (auto it = item.provenance.extra.find("start_end_tolerance"); it != item.provenance.extra.end()) {
          parse_number(it->second, tol);
        }
        const auto expect = start_end_key(item.series.at(0).view(), tol, why);
        if (!expect) return fail(fmt::format("key not unique ({})", to_string(why)));
        if (std::get<StartEndKey>(item.key) != *expect) return fail("stored key differs from recomputed start/end");
        return pass();
      }
      case TaskKind::multiseries_compare: {
        const auto& key = std::get<MultiSeriesKey>(item.key);
        SkipReason why{};
        const auto expect = multiseries_key(item.series, key.lowest, why);
        if (!expect) return fail(fmt::format("key not unique ({})", to_string(why)));
        if (key != *expect) return fail("stored key differs from recomputed cross-series extreme");
        return pass();
      }
      case TaskKind::subseries_localize: {
        const auto& key = std::get<SubseriesKey>(item.key);
        const auto& values = item.series.at(key.series_number - 1).values;
        for (std::size_t k = key.from; k <= key.to; ++k) {
          if (key.values.at(k - key.from) != PrintedValue::of(values.at(k))) {
            return fail(fmt::format("value at index {} differs from the stored series", k));
          }
        }
        return pass();
      }
      case TaskKind::numerical_perception: {
        const char key = std::get<ChoiceKey>(item.key).letter;
        std::vector<char> consistent;
        for (const auto& opt : item.options) {
          const auto claim = parse_perception_option(opt.text);
          if (!claim) return fail(fmt::format("option {} is not rule-checkable", opt.letter), {opt.letter});
          if (perception_claim_holds(*claim, item.series.at(0).view())) consistent.push_back(opt.letter);
        }
        if (consistent.size() == 1 && consistent.front() == key) return pass();
        std::vector<char> offending;
        for (char c : consistent) {
          if (c != key) offending.push_back(c);
        }
        if (std::find(consistent.begin(), consistent.end(), key) == consistent.end()) offending.push_back(key);
        return fail(fmt::format("{} options consistent with ground truth", consistent.size()), offending);
      }
      case TaskKind::successor: {
        const char key = std::get<ChoiceKey>(item.key).letter;
        const auto& context = item.series.at(0);
        ScoreWeights weights;
        if (auto it = item.provenance.extra.find("w_gap"); it != item.provenance.extra.end()) {
          parse_number(it->second, weights.gap);
          weights.grad = 1.0 - weights.gap;
        }
        std::array<double, 4> scores{};
        for (std::size_t i = 0; i < 4; ++i) {
          scores[i] = continuation_score(context.view(), item.series.at(i + 1).view(), weights);
        }
        const double best = scores[static_cast<std::size_t>(key - 'A')];
        std::vector<char> offending;
        for (std::size_t i = 0; i < 4; ++i) {
          const char letter = static_cast<char>('A' + i);
          if (letter != key && scores[i] >= best) offending.push_back(letter);
        }
        if (offending.empty()) return pass();
        return fail("key patch is not the strict continuation-score argmax", offending);
      }
      default: return {VerificationResult::Status::not_applicable, {}, "task kind is not rule-checkable"};
    }
  } catch (const std::exception& e) {
    return fail(e.what());
  }
}

}  // namespace tsbench::taskgen
