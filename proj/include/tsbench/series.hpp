#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace tsbench {

enum class SeriesSource { synthetic, real_crop };

std::string_view to_string(SeriesSource source) noexcept;
SeriesSource series_source_from_string(std::string_view name);

struct Series {
  std::string id;
  std::vector<double> values;
  std::string sampling_label;
  SeriesSource source = SeriesSource::synthetic;
  // Crop provenance: id of the source series and window offset within it.
  std::string origin;
  std::size_t origin_offset = 0;

  std::size_t size() const noexcept { return values.size(); }
  std::span<const double> view() const noexcept { return values; }

  friend bool operator==(const Series&, const Series&) = default;
};

/// Throws Errc::invalid_series unless the series has >= min_length finite values.
void validate_series(const Series& series, std::size_t min_length = 2);
void validate_values(std::span<const double> values, std::size_t min_length = 1);

// Printed precision: 5 decimals for |v| < 100, 3 decimals otherwise. Keys,
// grid cells and textual arrays all share this rule so that a value read off
// any view matches the key exactly.
int printed_decimals(double value) noexcept;
std::string format_fixed(double value, int decimals);
std::string format_value(double value);
/// The numeric value of format_value(value).
double printed(double value);
/// Half a unit in the last printed place.
double printed_tolerance(int decimals) noexcept;

/// Strict decimal/scientific parse of a whole token; false on any junk.
bool parse_number(std::string_view text, double& out) noexcept;

}  // namespace tsbench
