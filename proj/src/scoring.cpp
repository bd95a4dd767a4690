#include "tsbench/scoring.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fmt/format.h>
#include <regex>

#include "tsbench/error.hpp"

namespace tsbench::scoring {

using features::ExtremaOrder;
using features::StartEndVerdict;

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

/// Inner texts of every <name>...</name>, in order of appearance.
std::vector<std::string> tag_contents(std::string_view raw, std::string_view name) {
  const std::string text = lower(raw);
  const std::string open = fmt::format("<{}>", name);
  const std::string close = fmt::format("</{}>", name);
  std::vector<std::string> out;
  std::size_t pos = 0;
  while ((pos = text.find(open, pos)) != std::string::npos) {
    const std::size_t start = pos + open.size();
    const std::size_t end = text.find(close, start);
    if (end == std::string::npos) break;
    out.emplace_back(raw.substr(start, end - start));
    pos = end + close.size();
  }
  return out;
}

std::optional<std::vector<std::string>> bracket_items(std::string_view inner) {
  inner = trim(inner);
  if (inner.size() < 2 || inner.front() != '[' || inner.back() != ']') return std::nullopt;
  inner = inner.substr(1, inner.size() - 2);
  std::vector<std::string> items;
  std::size_t pos = 0;
  while (true) {
    const auto comma = inner.find(',', pos);
    items.emplace_back(trim(inner.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos)));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return items;
}

std::optional<ParsedPair> parse_pair(std::string_view inner) {
  const auto items = bracket_items(inner);
  if (!items || items->size() != 2) return std::nullopt;
  double index = 0.0, value = 0.0;
  if (!parse_number((*items)[0], index) || !parse_number((*items)[1], value)) return std::nullopt;
  if (index < 0.0 || index != std::floor(index) || index > 1e15) return std::nullopt;
  return ParsedPair{std::string(trim(trim(inner).substr(1, trim(inner).size() - 2))), static_cast<std::size_t>(index), value};
}

/// Last occurrence of the tag that holds a well-formed pair.
std::optional<ParsedPair> last_pair(std::string_view raw, std::string_view tag, std::vector<std::string>& notes) {
  const auto found = tag_contents(raw, tag);
  if (found.empty()) {
    notes.push_back(fmt::format("missing <{}> tag", tag));
    return std::nullopt;
  }
  for (auto it = found.rbegin(); it != found.rend(); ++it) {
    if (auto p = parse_pair(*it)) return p;
  }
  notes.push_back(fmt::format("malformed <{}> pair", tag));
  return std::nullopt;
}

template <typename T>
std::optional<T> last_match(std::string_view raw, const std::regex& re, T (*convert)(const std::string&)) {
  const std::string text(raw);
  std::optional<T> out;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), re); it != std::sregex_iterator(); ++it) {
    out = convert(lower((*it)[1].str()));
  }
  return out;
}

ExtremaOrder order_from(const std::string& w) { return w == "max" ? ExtremaOrder::max_first : ExtremaOrder::min_first; }

StartEndVerdict verdict_from(const std::string& w) {
  return w == "larger" ? StartEndVerdict::larger : w == "smaller" ? StartEndVerdict::smaller : StartEndVerdict::equal;
}

ParsedAnswer fail(ParsedAnswer p) {
  p.parse_ok = false;
  p.payload = std::monostate{};
  return p;
}

ParsedAnswer parse_impl(TaskKind kind, std::string_view raw) {
  ParsedAnswer p;
  p.kind = kind;
  auto& notes = p.notes;
  switch (kind) {
    case TaskKind::minmax: {
      static const std::regex order_re(R"(the\s+(max|min)(?:imum)?\s+value\s+appears\s+first)", std::regex::icase);
      auto mx = last_pair(raw, "max", notes);
      auto mn = last_pair(raw, "min", notes);
      auto order = last_match<ExtremaOrder>(raw, order_re, order_from);
      if (!order) notes.push_back("missing order sentence");
      if (!mx || !mn || !order) return fail(std::move(p));
      p.payload = MinMaxAnswer{*mx, *mn, *order};
      break;
    }
    case TaskKind::start_end: {
      static const std::regex verdict_re(
          R"(the\s+start\s+value\s+is\s+(larger|smaller|equal)\s+(?:than|to)\s+the\s+value\s+at\s+the\s+end)",
          std::regex::icase);
      auto st = last_pair(raw, "start", notes);
      auto en = last_pair(raw, "end", notes);
      auto verdict = last_match<StartEndVerdict>(raw, verdict_re, verdict_from);
      if (!verdict) notes.push_back("missing comparison sentence");
      if (!st || !en || !verdict) return fail(std::move(p));
      p.payload = StartEndAnswer{*st, *en, *verdict};
      break;
    }
    case TaskKind::multiseries_compare: {
      static const std::regex series_re(R"(^\s*(?:time\s+)?(?:series\s*-?\s*)?(\d+)\s*$)", std::regex::icase);
      auto pair = last_pair(raw, "answer", notes);
      std::optional<std::size_t> number;
      const auto tags = tag_contents(raw, "series");
      if (tags.empty()) notes.push_back("missing <series> tag");
      for (auto it = tags.rbegin(); it != tags.rend() && !number; ++it) {
        std::smatch m;
        const std::string inner = *it;
        if (std::regex_match(inner, m, series_re) && m[1].length() < 6) number = std::stoul(m[1].str());
      }
      if (!tags.empty() && !number) notes.push_back("malformed <series> tag");
      if (!pair || !number) return fail(std::move(p));
      p.payload = MultiSeriesAnswer{*pair, *number};
      break;
    }
    case TaskKind::subseries_localize: {
      const auto tags = tag_contents(raw, "answer");
      if (tags.empty()) {
        notes.push_back("missing <answer> tag");
        return fail(std::move(p));
      }
      for (auto it = tags.rbegin(); it != tags.rend(); ++it) {
        const auto items = bracket_items(*it);
        if (!items || items->empty()) continue;
        SubseriesAnswer a;
        bool ok = true;
        for (const auto& s : *items) {
          double v = 0.0;
          if (!parse_number(s, v)) {
            ok = false;
            break;
          }
          a.raw.push_back(s);
          a.values.push_back(v);
        }
        if (ok) {
          p.payload = std::move(a);
          p.parse_ok = true;
          return p;
        }
      }
      notes.push_back("malformed value list");
      return fail(std::move(p));
    }
    default: {
      std::string note;
      const auto letter = extract_letter(raw, &note);
      if (!letter) {
        notes.push_back(note);
        return fail(std::move(p));
      }
      p.payload = ChoiceAnswer{*letter};
    }
  }
  p.parse_ok = true;
  return p;
}

}  // namespace

std::optional<char> extract_letter(std::string_view raw, std::string* note) {
  const std::string text(raw);
  auto decide = [&](const std::vector<char>& found, std::string_view what) -> std::optional<char> {
    if (std::all_of(found.begin(), found.end(), [&](char c) { return c == found.front(); })) return found.front();
    if (note) *note = fmt::format("conflicting letters in {}", what);
    return std::nullopt;
  };

  static const std::regex stated(
      R"([Cc]orrect\s+[Aa]nswer\s*(?:is|:)\s*:?\s*(?:[Oo]ption\s*)?[\*\(\[\s]*([A-D])(?![A-Za-z0-9]))");
  std::vector<char> found;
  for (auto it = std::sregex_iterator(text.begin(), text.end(), stated); it != std::sregex_iterator(); ++it) {
    found.push_back((*it)[1].str()[0]);
  }
  if (!found.empty()) return decide(found, "answer statements");

  static const std::regex tagged(R"(^\s*(?:[Oo]ption\s*)?[\(\[\*]*([A-D])[\)\]\*\.]*\s*$)");
  for (const auto& inner : tag_contents(raw, "answer")) {
    std::smatch m;
    if (std::regex_match(inner, m, tagged)) found.push_back(m[1].str()[0]);
  }
  if (!found.empty()) return decide(found, "answer tags");

  static const std::regex alone(
      R"(^[\s\*\#]*(?:(?:[Ff]inal\s+)?[Aa]nswer\s*:?|[Oo]ption)?[\s\*\(\[]*([A-D])[\)\]\*\.:]*\s*$)");
  std::optional<char> last_alone;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const std::string line = text.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
    std::smatch m;
    if (std::regex_match(line, m, alone)) last_alone = m[1].str()[0];
    if (nl == std::string::npos) break;
    pos = nl + 1;
  }
  if (last_alone) return last_alone;

  static const std::regex mention(R"((?:[Oo]ption\s+|\()([A-D])(?![A-Za-z0-9]))");
  std::smatch m;
  if (std::regex_search(text, m, mention)) return m[1].str()[0];
  if (note) *note = "no option letter found";
  return std::nullopt;
}

ParsedAnswer parse_answer(TaskKind kind, std::string_view raw) {
  try {
    return parse_impl(kind, raw);
  } catch (const std::exception& e) {
    ParsedAnswer p;
    p.kind = kind;
    p.notes.push_back(fmt::format("parser error: {}", e.what()));
    return p;
  }
}

double ToleranceRule::of(int decimals) const noexcept { return half_units * std::pow(10.0, -decimals); }

namespace {

double printed_number(const PrintedValue& v) {
  double out = v.value;
  parse_number(v.text, out);
  return out;
}

bool pair_matches(const ParsedPair& got, const PrintedPair& key, const ToleranceRule& tol) {
  return got.index == key.index && std::fabs(got.value - printed_number(key.value)) <= tol.of(key.value.decimals());
}

/// The claimed pair reads an actual cell of the series.
bool self_consistent(const ParsedPair& got, const Series& s, const ToleranceRule& tol) {
  if (got.index >= s.size()) return false;
  const double v = s.values[got.index];
  return std::fabs(got.value - printed(v)) <= tol.of(printed_decimals(v));
}

[[noreturn]] void wrong_kind(const QAItem& item, const ParsedAnswer& parsed) {
  throw Error(Errc::scoring_error, fmt::format("item '{}' is {} but the answer was parsed as {}", item.id,
                                               to_string(item.task_kind), to_string(parsed.kind)));
}

template <typename K>
const K& key_of(const QAItem& item) {
  const K* k = std::get_if<K>(&item.key);
  if (!k) throw Error(Errc::scoring_error, fmt::format("item '{}' carries a key of the wrong shape", item.id));
  return *k;
}

}  // namespace

ItemScore score_item(const QAItem& item, const ParsedAnswer& parsed, const ToleranceRule& tol) {
  if (parsed.kind != item.task_kind) wrong_kind(item, parsed);
  ItemScore s;
  s.item_id = item.id;
  s.kind = item.task_kind;
  s.notes = parsed.notes;
  if (!parsed.parse_ok) return s;
  const Series& series = item.series.front();

  switch (item.task_kind) {
    case TaskKind::minmax: {
      const auto& key = key_of<MinMaxKey>(item);
      const auto& a = *parsed.as<MinMaxAnswer>();
      const bool max_ok = pair_matches(a.max, key.max, tol);
      const bool min_ok = pair_matches(a.min, key.min, tol);
      const bool order_consistent = a.max.index != a.min.index &&
                                    (a.max.index < a.min.index) == (a.order == ExtremaOrder::max_first);
      s.sr = self_consistent(a.max, series, tol) && self_consistent(a.min, series, tol) && order_consistent;
      if (!order_consistent) s.notes.push_back("order sentence contradicts the claimed indices");
      s.half = max_ok || min_ok;
      s.acc = s.sr && max_ok && min_ok;
      break;
    }
    case TaskKind::start_end: {
      const auto& key = key_of<StartEndKey>(item);
      const auto& a = *parsed.as<StartEndAnswer>();
      const auto claimed = a.start.value > a.end.value   ? StartEndVerdict::larger
                           : a.start.value < a.end.value ? StartEndVerdict::smaller
                                                         : StartEndVerdict::equal;
      s.sr = self_consistent(a.start, series, tol) && self_consistent(a.end, series, tol) && claimed == a.verdict;
      if (claimed != a.verdict) s.notes.push_back("verdict contradicts the claimed values");
      s.acc = s.sr && pair_matches(a.start, key.start, tol) && pair_matches(a.end, key.end, tol) && a.verdict == key.verdict;
      s.half = s.acc;
      break;
    }
    case TaskKind::multiseries_compare: {
      const auto& key = key_of<MultiSeriesKey>(item);
      const auto& a = *parsed.as<MultiSeriesAnswer>();
      const bool resolves = a.series_number >= 1 && a.series_number <= item.series.size();
      s.sr = resolves && self_consistent(a.pair, item.series[a.series_number - 1], tol);
      s.acc = s.sr && a.series_number == key.series_number && pair_matches(a.pair, key.pair, tol);
      s.half = s.acc;
      break;
    }
    case TaskKind::subseries_localize: {
      const auto& key = key_of<SubseriesKey>(item);
      const auto& a = *parsed.as<SubseriesAnswer>();
      s.sr = true;
      bool all = a.values.size() == key.values.size();
      for (std::size_t i = 0; all && i < a.values.size(); ++i) {
        all = std::fabs(a.values[i] - printed_number(key.values[i])) <= tol.of(key.values[i].decimals());
      }
      if (a.values.size() != key.values.size()) {
        s.notes.push_back(fmt::format("{} values for a window of {}", a.values.size(), key.values.size()));
      }
      s.acc = all;
      s.half = s.acc;
      break;
    }
    default: {
      const auto& key = key_of<ChoiceKey>(item);
      s.sr = true;
      s.acc = parsed.as<ChoiceAnswer>()->letter == key.letter;
      s.half = s.acc;
    }
  }
  return s;
}

Metrics aggregate(std::span<const ItemScore> scores) {
  if (scores.empty()) throw Error(Errc::empty_run, "no scores to aggregate");
  struct Sum {
    std::size_t n = 0, acc = 0, half = 0, sr = 0;
    void add(const ItemScore& s) {
      ++n;
      acc += s.acc;
      half += s.half;
      sr += s.sr;
    }
    MetricCell cell() const {
      const auto d = static_cast<double>(n);
      return {n, static_cast<double>(acc) / d, static_cast<double>(half) / d, static_cast<double>(sr) / d};
    }
  };
  Sum all;
  std::map<TaskKind, Sum> tasks;
  std::map<Level, Sum> levels;
  for (const auto& s : scores) {
    if ((s.acc && !s.sr) || (s.acc && !s.half)) {
      throw Error(Errc::scoring_error, fmt::format("score for '{}' breaks the flag implications", s.item_id));
    }
    all.add(s);
    tasks[s.kind].add(s);
    levels[level_of(s.kind)].add(s);
  }
  Metrics m;
  m.overall = all.cell();
  for (const auto& [k, sum] : tasks) m.per_task[k] = sum.cell();
  for (const auto& [l, sum] : levels) m.per_level[l] = sum.cell();
  return m;
}

Kappa cohens_kappa(std::span<const std::string> a, std::span<const std::string> b) {
  if (a.size() != b.size()) throw Error(Errc::length_mismatch, fmt::format("{} vs {} labels", a.size(), b.size()));
  if (a.empty()) throw Error(Errc::empty_input, "no labels");
  std::map<std::string, std::pair<std::size_t, std::size_t>> marginals;
  std::size_t agree = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ++marginals[a[i]].first;
    ++marginals[b[i]].second;
    agree += a[i] == b[i];
  }
  const auto n = static_cast<double>(a.size());
  std::size_t expected_num = 0;
  for (const auto& [label, counts] : marginals) expected_num += counts.first * counts.second;
  Kappa k;
  k.observed = static_cast<double>(agree) / n;
  k.expected = static_cast<double>(expected_num) / (n * n);
  if (expected_num == a.size() * a.size()) {
    k.degenerate = true;
    k.value = 1.0;
    return k;
  }
  k.value = (k.observed - k.expected) / (1.0 - k.expected);
  return k;
}

std::string format_answer(const QAItem& item) {
  auto pair = [](const PrintedPair& p) { return fmt::format("[{}, {}]", p.index, p.value.text); };
  return std::visit(
      [&](const auto& key) -> std::string {
        using K = std::decay_t<decltype(key)>;
        if constexpr (std::is_same_v<K, MinMaxKey>) {
          return fmt::format("<max>{}</max>\n<min>{}</min>\nThe {} value appears first.", pair(key.max), pair(key.min),
                             key.order == ExtremaOrder::min_first ? "min" : "max");
        } else if constexpr (std::is_same_v<K, StartEndKey>) {
          const std::string_view sentence = key.verdict == StartEndVerdict::larger    ? "larger than"
                                            : key.verdict == StartEndVerdict::smaller ? "smaller than"
                                                                                      : "equal to";
          return fmt::format("<start>{}</start>\n<end>{}</end>\nThe start value is {} the value at the end.",
                             pair(key.start), pair(key.end), sentence);
        } else if constexpr (std::is_same_v<K, MultiSeriesKey>) {
          return fmt::format("<answer>{}</answer>\n<series>{}</series>", pair(key.pair), key.series_number);
        } else if constexpr (std::is_same_v<K, SubseriesKey>) {
          std::string list;
          for (std::size_t i = 0; i < key.values.size(); ++i) list += (i ? ", " : "") + key.values[i].text;
          return fmt::format("<answer>[{}]</answer>", list);
        } else {
          return fmt::format("The correct answer is {}", key.letter);
        }
      },
      item.key);
}

}  // namespace tsbench::scoring
