#include "tsbench/series.hpp"

#include <charconv>
#include <cmath>
#include <fmt/format.h>

#include "tsbench/error.hpp"

namespace tsbench {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::empty_input: return "empty_input";
    case Errc::invalid_series: return "invalid_series";
    case Errc::invalid_spec: return "invalid_spec";
    case Errc::unsatisfiable_constraints: return "unsatisfiable_constraints";
    case Errc::infeasible_crop: return "infeasible_crop";
    case Errc::length_mismatch: return "length_mismatch";
    case Errc::undefined_correlation: return "undefined_correlation";
    case Errc::invalid_config: return "invalid_config";
    case Errc::template_incomplete: return "template_incomplete";
    case Errc::auth_failure: return "auth_failure";
    case Errc::rate_limited: return "rate_limited";
    case Errc::timeout: return "timeout";
    case Errc::transport: return "transport";
    case Errc::l3_unparseable: return "l3_unparseable";
    case Errc::l3_missing_field: return "l3_missing_field";
    case Errc::l3_duplicate_correct: return "l3_duplicate_correct";
    case Errc::l3_invariant: return "l3_invariant";
    case Errc::malformed_verdict: return "malformed_verdict";
    case Errc::schema_violation: return "schema_violation";
    case Errc::unsupported_version: return "unsupported_version";
    case Errc::strategy_rejected: return "strategy_rejected";
    case Errc::encoding_error: return "encoding_error";
    case Errc::scoring_error: return "scoring_error";
    case Errc::empty_run: return "empty_run";
    case Errc::render_error: return "render_error";
    case Errc::io_error: return "io_error";
  }
  return "unknown";
}

std::string_view to_string(SeriesSource source) noexcept {
  return source == SeriesSource::synthetic ? "synthetic" : "real_crop";
}

SeriesSource series_source_from_string(std::string_view name) {
  if (name == "synthetic") return SeriesSource::synthetic;
  if (name == "real_crop") return SeriesSource::real_crop;
  throw Error(Errc::schema_violation, "unknown series source '" + std::string(name) + "'");
}

void validate_values(std::span<const double> values, std::size_t min_length) {
  if (values.empty() && min_length > 0) throw Error(Errc::empty_input, "series is empty");
  if (values.size() < min_length) {
    throw Error(Errc::invalid_series, fmt::format("length {} < required {}", values.size(), min_length));
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      throw Error(Errc::invalid_series, fmt::format("non-finite value at index {}", i));
    }
  }
}

void validate_series(const Series& series, std::size_t min_length) {
  try {
    validate_values(series.values, min_length);
  } catch (const Error& e) {
    throw Error(e.code() == Errc::empty_input ? Errc::empty_input : Errc::invalid_series,
                "series '" + series.id + "': " + e.what());
  }
}

int printed_decimals(double value) noexcept { return std::fabs(value) < 100.0 ? 5 : 3; }

std::string format_fixed(double value, int decimals) {
  std::string text = fmt::format("{:.{}f}", value, decimals);
  // Negative values that round to zero print without the sign.
  if (text.front() == '-' && text.find_first_not_of("-0.") == std::string::npos) text.erase(0, 1);
  return text;
}

std::string format_value(double value) { return format_fixed(value, printed_decimals(value)); }

double printed(double value) {
  double out = 0.0;
  parse_number(format_value(value), out);
  return out;
}

double printed_tolerance(int decimals) noexcept { return 0.5 * std::pow(10.0, -decimals); }

bool parse_number(std::string_view text, double& out) noexcept {
  if (text.empty()) return false;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out, std::chars_format::general);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

}  // namespace tsbench
