#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "tsbench/features.hpp"
#include "tsbench/series.hpp"

namespace tsbench {

enum class Level { L1, L2, L3, L4 };

enum class TaskKind {
  minmax,
  start_end,
  multiseries_compare,
  subseries_localize,
  numerical_perception,
  local_pattern,
  global_pattern,
  semantic,
  successor,
};

std::string_view to_string(Level) noexcept;
std::string_view to_string(TaskKind) noexcept;
Level level_from_string(std::string_view);
TaskKind task_kind_from_string(std::string_view);
Level level_of(TaskKind) noexcept;
bool is_multiple_choice(TaskKind) noexcept;

inline constexpr std::string_view kGeneratorVersion = "tsbench-gen/1";

/// A key value together with the exact text the key prints.
struct PrintedValue {
  double value = 0.0;
  std::string text;

  static PrintedValue of(double v);
  int decimals() const noexcept;
  friend bool operator==(const PrintedValue&, const PrintedValue&) = default;
};

struct PrintedPair {
  std::size_t index = 0;
  PrintedValue value;
  friend bool operator==(const PrintedPair&, const PrintedPair&) = default;
};

struct MinMaxKey {
  PrintedPair max;
  PrintedPair min;
  features::ExtremaOrder order = features::ExtremaOrder::max_first;
  friend bool operator==(const MinMaxKey&, const MinMaxKey&) = default;
};

struct StartEndKey {
  PrintedPair start;
  PrintedPair end;
  features::StartEndVerdict verdict = features::StartEndVerdict::equal;
  friend bool operator==(const StartEndKey&, const StartEndKey&) = default;
};

struct MultiSeriesKey {
  std::size_t series_number = 1;  // 1-based, as the question numbers series
  PrintedPair pair;
  bool lowest = true;  // lowest minimum vs highest maximum
  friend bool operator==(const MultiSeriesKey&, const MultiSeriesKey&) = default;
};

struct SubseriesKey {
  std::size_t series_number = 1;
  std::size_t from = 0;
  std::size_t to = 0;  // inclusive
  std::vector<PrintedValue> values;
  friend bool operator==(const SubseriesKey&, const SubseriesKey&) = default;
};

struct ChoiceKey {
  char letter = 'A';
  friend bool operator==(const ChoiceKey&, const ChoiceKey&) = default;
};

using AnswerKey = std::variant<MinMaxKey, StartEndKey, MultiSeriesKey, SubseriesKey, ChoiceKey>;

struct Option {
  char letter = 'A';
  std::string text;
  friend bool operator==(const Option&, const Option&) = default;
};

struct Provenance {
  std::string generator_version{kGeneratorVersion};
  std::uint64_t seed = 0;
  std::vector<std::string> flags;
  std::map<std::string, std::string> extra;
  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct QAItem {
  std::string id;
  Level level = Level::L1;
  TaskKind task_kind = TaskKind::minmax;
  // Inline series. Successor items hold the lookback window first and the
  // four candidate patches after it in option order.
  std::vector<Series> series;
  std::string question;  // body that follows the serialized series
  std::vector<Option> options;
  AnswerKey key;
  std::optional<std::string> cot;
  std::map<std::string, std::string> assets;  // role -> path
  Provenance provenance;

  friend bool operator==(const QAItem&, const QAItem&) = default;
};

/// Series shown to the model as "the time series" (successor patches are options).
std::size_t input_series_count(const QAItem& item) noexcept;

/// Throws Errc::schema_violation on the first broken item invariant.
void validate_item(const QAItem& item);

}  // namespace tsbench
