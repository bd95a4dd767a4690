#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "tsbench/features.hpp"
#include "tsbench/qa_item.hpp"

namespace tsbench::scoring {

struct ParsedPair {
  std::string raw;  // text between the brackets
  std::size_t index = 0;
  double value = 0.0;
  friend bool operator==(const ParsedPair&, const ParsedPair&) = default;
};

struct MinMaxAnswer {
  ParsedPair max;
  ParsedPair min;
  features::ExtremaOrder order = features::ExtremaOrder::max_first;
};

struct StartEndAnswer {
  ParsedPair start;
  ParsedPair end;
  features::StartEndVerdict verdict = features::StartEndVerdict::equal;
};

struct MultiSeriesAnswer {
  ParsedPair pair;
  std::size_t series_number = 0;
};

struct SubseriesAnswer {
  std::vector<std::string> raw;
  std::vector<double> values;
};

struct ChoiceAnswer {
  char letter = 'A';
};

using AnswerPayload =
    std::variant<std::monostate, MinMaxAnswer, StartEndAnswer, MultiSeriesAnswer, SubseriesAnswer, ChoiceAnswer>;

struct ParsedAnswer {
  TaskKind kind = TaskKind::minmax;
  bool parse_ok = false;
  AnswerPayload payload;  // monostate whenever parse_ok is false
  std::vector<std::string> notes;

  template <typename T>
  const T* as() const noexcept {
    return std::get_if<T>(&payload);
  }
};

/// Never throws; failures come back as parse_ok = false with a note.
ParsedAnswer parse_answer(TaskKind kind, std::string_view raw);

/// Multiple-choice letter by precedence: "correct answer is X", then an
/// <answer>X</answer> tag, then the last line holding only a letter, then
/// the first option reference. Conflicts at the deciding level give nothing.
std::optional<char> extract_letter(std::string_view raw, std::string* note = nullptr);

struct ToleranceRule {
  double half_units = 0.5;  // tolerance = half_units x 10^-d, d = printed decimals of the reference
  double of(int decimals) const noexcept;
};

struct ItemScore {
  std::string item_id;
  TaskKind kind = TaskKind::minmax;
  bool acc = false;
  bool half = false;
  bool sr = false;
  std::vector<std::string> notes;
};

/// Throws Errc::scoring_error when the parse was made for another task kind.
ItemScore score_item(const QAItem& item, const ParsedAnswer& parsed, const ToleranceRule& tol = {});

struct MetricCell {
  std::size_t n = 0;
  double acc = 0.0;
  double half_acc = 0.0;
  double sr = 0.0;
};

struct Metrics {
  MetricCell overall;
  std::map<TaskKind, MetricCell> per_task;
  std::map<Level, MetricCell> per_level;
};

/// Throws Errc::empty_run on an empty list.
Metrics aggregate(std::span<const ItemScore> scores);

struct Kappa {
  double value = 0.0;
  double observed = 0.0;
  double expected = 0.0;
  bool degenerate = false;  // expected agreement of 1: both raters constant and equal
};

/// Throws Errc::length_mismatch or Errc::empty_input.
Kappa cohens_kappa(std::span<const std::string> a, std::span<const std::string> b);

/// The key written in the answer format the question asks for.
std::string format_answer(const QAItem& item);

}  // namespace tsbench::scoring
