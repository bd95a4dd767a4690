#include "tsbench/qa_item.hpp"

#include <fmt/format.h>

#include "tsbench/error.hpp"

namespace tsbench {

std::string_view to_string(Level level) noexcept {
  switch (level) {
    case Level::L1: return "L1";
    case Level::L2: return "L2";
    case Level::L3: return "L3";
    case Level::L4: return "L4";
  }
  return "?";
}

std::string_view to_string(TaskKind kind) noexcept {
  switch (kind) {
    case TaskKind::minmax: return "minmax";
    case TaskKind::start_end: return "start_end";
    case TaskKind::multiseries_compare: return "multiseries_compare";
    case TaskKind::subseries_localize: return "subseries_localize";
    case TaskKind::numerical_perception: return "numerical_perception";
    case TaskKind::local_pattern: return "local_pattern";
    case TaskKind::global_pattern: return "global_pattern";
    case TaskKind::semantic: return "semantic";
    case TaskKind::successor: return "successor";
  }
  return "?";
}

Level level_from_string(std::string_view name) {
  for (Level l : {Level::L1, Level::L2, Level::L3, Level::L4}) {
    if (to_string(l) == name) return l;
  }
  throw Error(Errc::schema_violation, fmt::format("unknown level '{}'", name));
}

TaskKind task_kind_from_string(std::string_view name) {
  for (int k = 0; k <= static_cast<int>(TaskKind::successor); ++k) {
    if (to_string(static_cast<TaskKind>(k)) == name) return static_cast<TaskKind>(k);
  }
  throw Error(Errc::schema_violation, fmt::format("unknown task kind '{}'", name));
}

Level level_of(TaskKind kind) noexcept {
  switch (kind) {
    case TaskKind::minmax:
    case TaskKind::start_end:
    case TaskKind::multiseries_compare:
    case TaskKind::subseries_localize: return Level::L1;
    case TaskKind::numerical_perception:
    case TaskKind::local_pattern:
    case TaskKind::global_pattern: return Level::L2;
    case TaskKind::semantic: return Level::L3;
    case TaskKind::successor: return Level::L4;
  }
  return Level::L1;
}

bool is_multiple_choice(TaskKind kind) noexcept { return level_of(kind) != Level::L1; }

PrintedValue PrintedValue::of(double v) { return {v, format_value(v)}; }

int PrintedValue::decimals() const noexcept {
  const auto dot = text.find('.');
  if (dot == std::string::npos) return 0;
  std::size_t end = text.find_first_of("eE", dot);
  if (end == std::string::npos) end = text.size();
  return static_cast<int>(end - dot - 1);
}

std::size_t input_series_count(const QAItem& item) noexcept {
  return item.task_kind == TaskKind::successor ? 1 : item.series.size();
}

namespace {

[[noreturn]] void broken(const QAItem& item, std::string_view what) {
  throw Error(Errc::schema_violation, fmt::format("item '{}': {}", item.id, what));
}

void check_pair(const QAItem& item, const PrintedPair& pair, std::size_t length, std::string_view name) {
  if (pair.index >= length) broken(item, fmt::format("{} index {} outside series of length {}", name, pair.index, length));
  if (pair.value.text.empty()) broken(item, fmt::format("{} value has no printed text", name));
}

}  // namespace

void validate_item(const QAItem& item) {
  if (item.id.empty()) throw Error(Errc::schema_violation, "item without id");
  if (item.level != level_of(item.task_kind)) {
    broken(item, fmt::format("level {} does not match task kind {}", to_string(item.level), to_string(item.task_kind)));
  }
  if (item.series.empty()) broken(item, "no series");
  for (const auto& s : item.series) {
    try {
      validate_series(s, 2);
    } catch (const Error& e) {
      broken(item, e.what());
    }
  }
  if (item.question.empty()) broken(item, "empty question");

  if (is_multiple_choice(item.task_kind)) {
    if (item.options.size() != 4) broken(item, fmt::format("multiple-choice item has {} options, expected 4", item.options.size()));
    for (std::size_t i = 0; i < 4; ++i) {
      if (item.options[i].letter != static_cast<char>('A' + i)) broken(item, "options must be lettered A-D in order");
      if (item.options[i].text.empty()) broken(item, fmt::format("option {} is empty", item.options[i].letter));
    }
    const auto* key = std::get_if<ChoiceKey>(&item.key);
    if (!key) broken(item, "multiple-choice item needs a letter key");
    if (key->letter < 'A' || key->letter > 'D') broken(item, fmt::format("key letter '{}' outside A-D", key->letter));
    if (item.task_kind == TaskKind::successor && item.series.size() != 5) {
      broken(item, "successor item needs a lookback window and four candidate patches");
    }
    return;
  }

  if (!item.options.empty()) broken(item, "open-answer item carries options");
  const std::size_t n = item.series.front().size();
  switch (item.task_kind) {
    case TaskKind::minmax: {
      const auto* key = std::get_if<MinMaxKey>(&item.key);
      if (!key) broken(item, "minmax item needs a max/min key");
      check_pair(item, key->max, n, "max");
      check_pair(item, key->min, n, "min");
      break;
    }
    case TaskKind::start_end: {
      const auto* key = std::get_if<StartEndKey>(&item.key);
      if (!key) broken(item, "start_end item needs a start/end key");
      check_pair(item, key->start, n, "start");
      check_pair(item, key->end, n, "end");
      break;
    }
    case TaskKind::multiseries_compare: {
      const auto* key = std::get_if<MultiSeriesKey>(&item.key);
      if (!key) broken(item, "multiseries item needs a series key");
      if (key->series_number < 1 || key->series_number > item.series.size()) {
        broken(item, fmt::format("series number {} does not resolve", key->series_number));
      }
      check_pair(item, key->pair, item.series[key->series_number - 1].size(), "answer");
      break;
    }
    case TaskKind::subseries_localize: {
      const auto* key = std::get_if<SubseriesKey>(&item.key);
      if (!key) broken(item, "subseries item needs a value-list key");
      if (key->series_number < 1 || key->series_number > item.series.size()) {
        broken(item, fmt::format("series number {} does not resolve", key->series_number));
      }
      if (key->from > key->to || key->to >= item.series[key->series_number - 1].size()) {
        broken(item, fmt::format("window [{}, {}] outside the series", key->from, key->to));
      }
      if (key->values.size() != key->to - key->from + 1) broken(item, "value list length does not match the window");
      break;
    }
    default: broken(item, "unhandled task kind");
  }
}

}  // namespace tsbench
