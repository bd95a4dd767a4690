#include "tsbench/llm_bridge.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <nlohmann/json.hpp>
#include <regex>
#include <set>

#include "tsbench/error.hpp"
#include "tsbench/rng.hpp"
#include "tsbench/templates_data.hpp"

namespace tsbench::llm {

using json = nlohmann::json;
using features::Direction;

std::string_view to_string(TemplateId id) noexcept {
  switch (id) {
    case TemplateId::l2_annotate: return "l2_annotate";
    case TemplateId::l2_cot: return "l2_cot";
    case TemplateId::l3_generate: return "l3_generate";
    case TemplateId::l3_examine: return "l3_examine";
    case TemplateId::evaluation: return "evaluation";
  }
  return "?";
}

std::string_view template_text(TemplateId id) noexcept {
  switch (id) {
    case TemplateId::l2_annotate: return embedded::l2_annotate;
    case TemplateId::l2_cot: return embedded::l2_cot;
    case TemplateId::l3_generate: return embedded::l3_generate;
    case TemplateId::l3_examine: return embedded::l3_examine;
    case TemplateId::evaluation: return {};
  }
  return {};
}

std::string fill_template(std::string_view tmpl, const std::map<std::string, std::string>& slots) {
  std::string out;
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    const auto open = tmpl.find("{{", pos);
    if (open == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    const auto close = tmpl.find("}}", open + 2);
    if (close == std::string_view::npos) {
      out.append(tmpl.substr(pos));
      break;
    }
    const std::string name(tmpl.substr(open + 2, close - open - 2));
    const bool is_slot = !name.empty() && std::all_of(name.begin(), name.end(), [](unsigned char c) {
      return std::isalnum(c) || c == '_';
    });
    out.append(tmpl.substr(pos, open - pos));
    if (!is_slot) {
      out.append("{{");
      pos = open + 2;
      continue;
    }
    const auto it = slots.find(name);
    if (it == slots.end()) throw Error(Errc::template_incomplete, fmt::format("no value for slot '{}'", name));
    out.append(it->second);
    pos = close + 2;
  }
  return out;
}

namespace {

std::string_view segment_word(Direction d) {
  switch (d) {
    case Direction::up: return "increase";
    case Direction::down: return "decrease";
    case Direction::flat: return "steady";
  }
  return "?";
}

std::string event_phrase(const features::DetectedEvent& e) {
  switch (e.kind) {
    case synth::EventKind::spike_up: return fmt::format("upward spike at index {} (value {:.7g})", e.index, e.value);
    case synth::EventKind::spike_down: return fmt::format("downward spike at index {} (value {:.7g})", e.index, e.value);
    case synth::EventKind::rises_then_falls: return fmt::format("rise then fall around index {}", e.index);
    case synth::EventKind::falls_then_rises: return fmt::format("fall then rise around index {}", e.index);
  }
  return {};
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::string metadata_block(const Series& series, const features::SeriesAnnotation& a,
                           std::optional<synth::SeasonalityKind> seasonality) {
  std::vector<std::string> lines;
  lines.push_back(fmt::format("- Length: {} points", a.length));
  lines.push_back(fmt::format("- Overall trend: {}", features::to_string(a.overall_trend)));
  if (a.cycles && seasonality && *seasonality != synth::SeasonalityKind::none) {
    lines.push_back(fmt::format("- Seasonality: seasonality pattern of type `{}' with period of {:.1f} points",
                                synth::to_string(*seasonality), a.cycles->estimated_period));
  } else if (a.cycles) {
    lines.push_back(fmt::format("- Seasonality: periodic pattern with period of {:.1f} points", a.cycles->estimated_period));
  } else {
    lines.push_back("- Seasonality: no clear seasonality");
  }
  lines.push_back(fmt::format("- maximum value {:.7g} at position {}", a.ext.max.value, a.ext.max.index));
  lines.push_back(fmt::format("- minimum value {:.7g} at position {}", a.ext.min.value, a.ext.min.index));
  const std::string change = a.end.value > a.start.value ? "up" : a.end.value < a.start.value ? "down" : "flat";
  lines.push_back(fmt::format("- starts at {} and ends at {} (overall change '{}')", a.start.value, a.end.value, change));
  if (a.turning_points.empty()) {
    lines.push_back("- Turning points: no significant turning points");
  } else {
    std::vector<std::string> idx;
    for (auto t : a.turning_points) idx.push_back(std::to_string(t));
    lines.push_back(fmt::format("- Turning points: {} significant turning points at indices {}", a.turning_points.size(),
                                join(idx, ", ")));
  }
  std::vector<std::string> spikes;
  for (const auto& e : a.events) {
    if (synth::is_spike(e.kind)) spikes.push_back(event_phrase(e));
  }
  lines.push_back(spikes.empty() ? std::string("- Local events: no major local events")
                                 : "- Local events: " + join(spikes, "; "));
  std::vector<std::string> segs;
  for (const auto& s : a.segments) {
    segs.push_back(fmt::format("{} from index {} to {} (values {}→{})", segment_word(s.direction), s.start_idx,
                               s.end_idx, s.start_value, s.end_value));
  }
  lines.push_back("- Trend segments: " + join(segs, "; "));
  lines.push_back(fmt::format("- volatility level is `{}'.", features::to_string(a.volatility)));
  if (a.cycles) {
    lines.push_back(fmt::format(
        "- Cycle stats: peaks between {} and {}; \n\n    - valleys between {} and {}; \n\n    - mean amplitude:{}; {:.1f} "
        "cycles in total.",
        a.cycles->peak_range.first, a.cycles->peak_range.second, a.cycles->valley_range.first,
        a.cycles->valley_range.second, a.cycles->mean_amplitude, a.cycles->cycle_count));
  } else {
    lines.push_back("- Cycle stats: no regular cycles");
  }
  (void)series;
  return join(lines, "\n\n");
}

std::string indexed_array(std::span<const double> values) {
  std::string out = "[";
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ",";
    out += fmt::format("[{},{}]", i, values[i]);
  }
  return out + "]";
}

PromptBundle build_prompt(TemplateId id, const Series& series, const features::SeriesAnnotation& annotation,
                          const RenderAssets& renders, const PromptInputs& inputs) {
  PromptBundle bundle;
  bundle.template_id = id;
  const std::string interval = series.sampling_label.empty() ? "unknown" : series.sampling_label;
  std::map<std::string, std::string> slots;
  switch (id) {
    case TemplateId::l2_annotate:
      if (!renders.plot) throw Error(Errc::template_incomplete, "l2_annotate needs the series plot");
      slots["metadata"] = metadata_block(series, annotation, inputs.seasonality);
      break;
    case TemplateId::l2_cot: {
      if (!renders.plot) throw Error(Errc::template_incomplete, "l2_cot needs the series plot");
      if (inputs.options.size() != 4) throw Error(Errc::template_incomplete, "l2_cot needs four options");
      std::vector<std::string> opts;
      for (const auto& o : inputs.options) opts.push_back(fmt::format("{}: {}", o.letter, o.text));
      slots["options"] = join(opts, "\n\n");
      break;
    }
    case TemplateId::l3_generate:
      if (inputs.scenario.empty()) throw Error(Errc::template_incomplete, "l3_generate needs a scenario description");
      slots["length"] = std::to_string(series.size());
      slots["sampling_interval"] = interval;
      slots["series"] = indexed_array(series.view());
      slots["scenario"] = inputs.scenario;
      break;
    case TemplateId::l3_examine:
      if (inputs.item_json.empty()) throw Error(Errc::template_incomplete, "l3_examine needs the item under review");
      slots["series"] = indexed_array(series.view());
      slots["item"] = inputs.item_json;
      slots["sampling_interval"] = interval;
      break;
    case TemplateId::evaluation:
      throw Error(Errc::template_incomplete, "evaluation prompts are built by the harness encoder");
  }
  const std::string filled = fill_template(template_text(id), slots);
  constexpr std::string_view marker = "<<<USER>>>\n";
  if (const auto cut = filled.find(marker); cut != std::string::npos) {
    bundle.system_text = trim(std::string_view(filled).substr(0, cut));
    bundle.user_text = trim(std::string_view(filled).substr(cut + marker.size()));
  } else {
    bundle.user_text = trim(filled);
  }
  if (renders.plot) bundle.images.push_back({*renders.plot});
  return bundle;
}

// L3 parsing ---------------------------------------------------------------------

std::string_view to_string(ErrorType t) noexcept {
  switch (t) {
    case ErrorType::none: return "none";
    case ErrorType::pattern: return "Pattern";
    case ErrorType::value: return "Value";
    case ErrorType::semantic: return "Semantic";
  }
  return "?";
}

namespace {

std::string normalize_key(std::string_view key) {
  std::string out;
  for (unsigned char c : key) {
    if (c == ' ' || c == '_' || c == '-') continue;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

const json* field(const json& obj, std::string_view name) {
  if (!obj.is_object()) return nullptr;
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (normalize_key(it.key()) == name) return &*it;
  }
  return nullptr;
}

const json& require(const json& obj, std::string_view name, std::string_view where) {
  const json* f = field(obj, name);
  if (!f || f->is_null()) throw Error(Errc::l3_missing_field, fmt::format("{}: missing '{}'", where, name));
  return *f;
}

std::string require_string(const json& obj, std::string_view name, std::string_view where) {
  const json& f = require(obj, name, where);
  if (!f.is_string() || f.get<std::string>().empty()) {
    throw Error(Errc::l3_missing_field, fmt::format("{}: '{}' must be a non-empty string", where, name));
  }
  return f.get<std::string>();
}

/// Letter keys may appear as "A", "a" or "Option A".
const json* letter_field(const json& obj, char letter) {
  const std::string plain(1, static_cast<char>(std::tolower(letter)));
  if (const json* f = field(obj, plain)) return f;
  return field(obj, "option" + plain);
}

ErrorType parse_error_type(std::string text) {
  std::string t = normalize_key(text);
  if (t.size() > 5 && t.ends_with("error")) t.resize(t.size() - 5);
  if (t == "none") return ErrorType::none;
  if (t == "pattern") return ErrorType::pattern;
  if (t == "value") return ErrorType::value;
  if (t == "semantic") return ErrorType::semantic;
  throw Error(Errc::l3_invariant, fmt::format("unknown error type '{}'", text));
}

std::optional<char> parse_letter(std::string_view text) {
  std::string t = trim(text);
  if (t.rfind("Option ", 0) == 0 || t.rfind("option ", 0) == 0) t = t.substr(7);
  if (!t.empty() && t.back() == '.') t.pop_back();
  if (t.size() != 1) return std::nullopt;
  const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(t[0])));
  if (c < 'A' || c > 'D') return std::nullopt;
  return c;
}

}  // namespace

L3Parse parse_l3_item(std::string_view raw, std::optional<std::size_t> series_length) {
  const auto open = raw.find('{');
  const auto close = raw.rfind('}');
  if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
    throw Error(Errc::l3_unparseable, "no JSON object in reply");
  }
  L3Parse out;
  out.surrounding_text = !trim(raw.substr(0, open)).empty() || !trim(raw.substr(close + 1)).empty();
  json doc;
  try {
    doc = json::parse(raw.substr(open, close - open + 1));
  } catch (const json::exception& e) {
    throw Error(Errc::l3_unparseable, e.what());
  }
  if (!doc.is_object()) throw Error(Errc::l3_unparseable, "top level is not an object");

  L3Item& item = out.item;
  item.question = require_string(doc, "question", "item");
  const json& options = require(doc, "options", "item");
  const json& cot = require(doc, "chainofthought", "item");
  for (char letter = 'A'; letter <= 'D'; ++letter) {
    const json* opt = letter_field(options, letter);
    if (!opt || !opt->is_string() || opt->get<std::string>().empty()) {
      throw Error(Errc::l3_missing_field, fmt::format("options: missing option {}", letter));
    }
    item.options[letter] = opt->get<std::string>();
    const json* analysis = letter_field(cot, letter);
    if (!analysis || !analysis->is_object()) {
      throw Error(Errc::l3_missing_field, fmt::format("chain of thought: missing option {}", letter));
    }
    const std::string where = fmt::format("chain of thought {}", letter);
    OptionAnalysis a;
    a.evaluation = require_string(*analysis, "evaluation", where);
    a.error_type = parse_error_type(require_string(*analysis, "errortype", where));
    item.chain_of_thought[letter] = std::move(a);
  }

  const json& verification = require(doc, "finalverification", "item");
  const json& checked = require(verification, "checkedvalues", "final verification");
  if (!checked.is_array()) throw Error(Errc::l3_missing_field, "final verification: 'checked values' must be a list");
  for (const auto& pair : checked) {
    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number_integer() || !pair[1].is_number()) {
      throw Error(Errc::l3_invariant, "checked values must be [index, value] pairs");
    }
    const auto index = pair[0].get<std::int64_t>();
    if (index < 0 || (series_length && static_cast<std::size_t>(index) >= *series_length)) {
      throw Error(Errc::l3_invariant, fmt::format("checked index {} outside the series", index));
    }
    item.checked_values.emplace_back(static_cast<std::size_t>(index), pair[1].get<double>());
  }
  const json& neighbor = require(verification, "neighborconsistency", "final verification");
  if (!neighbor.is_boolean()) throw Error(Errc::l3_missing_field, "final verification: 'neighbor consistency' must be boolean");
  item.neighbor_consistency = neighbor.get<bool>();

  const json& answer = require(doc, "finalanswer", "item");
  const auto letter = answer.is_string() ? parse_letter(answer.get<std::string>()) : std::nullopt;
  if (!letter) throw Error(Errc::l3_invariant, "final answer is not one of A-D");
  item.final_answer = *letter;

  std::vector<char> correct;
  for (const auto& [l, a] : item.chain_of_thought) {
    if (a.error_type == ErrorType::none) correct.push_back(l);
  }
  if (correct.size() > 1) {
    throw Error(Errc::l3_duplicate_correct, fmt::format("{} options carry error type none", correct.size()));
  }
  if (correct.empty()) throw Error(Errc::l3_invariant, "no option carries error type none");
  if (correct.front() != item.final_answer) {
    throw Error(Errc::l3_invariant,
                fmt::format("final answer {} but option {} is the error-free one", item.final_answer, correct.front()));
  }
  return out;
}

std::string l3_item_json(const L3Item& item) {
  json options = json::object();
  json cot = json::object();
  for (const auto& [letter, text] : item.options) options[std::string(1, letter)] = text;
  for (const auto& [letter, a] : item.chain_of_thought) {
    cot[std::string(1, letter)] = {{"evaluation", a.evaluation}, {"error type", std::string(to_string(a.error_type))}};
  }
  json checked = json::array();
  for (const auto& [index, value] : item.checked_values) checked.push_back({index, value});
  json doc = {{"question", item.question},
              {"options", options},
              {"chain of thought", cot},
              {"final verification", {{"checked values", checked}, {"neighbor consistency", item.neighbor_consistency}}},
              {"Final answer", std::string(1, item.final_answer)}};
  return doc.dump();
}

QAItem to_qa_item(const L3Item& l3, const Series& series, std::uint64_t seed) {
  QAItem item;
  item.id = fmt::format("semantic-{:016x}", seed);
  item.level = Level::L3;
  item.task_kind = TaskKind::semantic;
  item.series = {series};
  item.provenance.seed = seed;
  std::string question = l3.question;
  std::vector<std::string> cot;
  for (const auto& [letter, text] : l3.options) {
    item.options.push_back({letter, text});
    question += fmt::format("\n\n{}: {}", letter, text);
    const auto& a = l3.chain_of_thought.at(letter);
    cot.push_back(a.error_type == ErrorType::none
                      ? fmt::format("Option {}: {} No errors detected.", letter, a.evaluation)
                      : fmt::format("Option {}: {} This is a {} Error.", letter, a.evaluation, to_string(a.error_type)));
  }
  item.question = std::move(question);
  item.key = ChoiceKey{l3.final_answer};
  item.cot = join(cot, "\n\n") + fmt::format("\n\n<answer>{}</answer>", l3.final_answer);
  return item;
}

Verdict parse_examiner_verdict(std::string_view raw) {
  static const std::regex shape(
      R"re(^\s*"?valid"?\s*:\s*"?(true|false)"?\s*,\s*"?reason"?\s*:\s*([\s\S]*?)\s*$)re", std::regex::icase);
  const std::string text(raw);
  std::smatch m;
  if (!std::regex_match(text, m, shape)) {
    throw Error(Errc::malformed_verdict, fmt::format("unrecognized verdict: '{}'", text.substr(0, 120)));
  }
  Verdict v;
  std::string flag = m[1];
  std::transform(flag.begin(), flag.end(), flag.begin(), [](unsigned char c) { return std::tolower(c); });
  v.valid = flag == "true";
  v.reason = m[2];
  if (v.reason.size() >= 2 && v.reason.front() == '"' && v.reason.back() == '"') v.reason = v.reason.substr(1, v.reason.size() - 2);
  if (v.reason.empty()) throw Error(Errc::malformed_verdict, "verdict without a reason");
  return v;
}

bool held_out(std::string_view item_id, std::uint64_t seed, double fraction) noexcept {
  const std::uint64_t h = derive_seed(seed ^ 0x686f6c646f7574ULL, item_id);
  return static_cast<double>(h >> 11) * 0x1.0p-53 < fraction;
}

// Descriptions ---------------------------------------------------------------------

namespace {

/// Three significant digits, never in exponent notation.
std::string approx(double v) {
  if (v == 0.0 || !std::isfinite(v)) return "0";
  const int e = static_cast<int>(std::floor(std::log10(std::fabs(v))));
  const int decimals = 2 - e;
  if (decimals >= 0) return format_fixed(v, decimals);
  const double unit = std::pow(10.0, -decimals);
  return format_fixed(std::round(v / unit) * unit, 0);
}

std::string_view motion(Direction d) {
  switch (d) {
    case Direction::up: return "rises";
    case Direction::down: return "falls";
    case Direction::flat: return "holds steady";
  }
  return "?";
}

}  // namespace

std::string TemplateDescriber::describe(const Series& series, const features::SeriesAnnotation& a, TaskKind kind,
                                        const PromptInputs& hints, const RenderAssets&) {
  const auto& v = series.values;
  if (kind == TaskKind::local_pattern) {
    std::vector<std::string> parts;
    for (const auto& s : a.segments) {
      parts.push_back(fmt::format("{} from about {} at index {} to about {} at index {}", motion(s.direction),
                                  approx(s.start_value), s.start_idx, approx(s.end_value), s.end_idx));
    }
    std::string text = "The series " + join(parts, ", then ");
    std::vector<std::string> spikes;
    for (const auto& e : a.events) {
      if (synth::is_spike(e.kind)) spikes.push_back(event_phrase(e));
    }
    text += spikes.empty() ? ", with no sharp spikes" : ", with an " + join(spikes, " and an ");
    text += fmt::format(", and its lowest point is about {} at index {}.", approx(a.ext.min.value), a.ext.min.index);
    return text;
  }
  std::string trend = a.overall_trend == features::OverallTrend::increasing   ? "rises overall"
                      : a.overall_trend == features::OverallTrend::decreasing ? "declines overall"
                                                                               : "stays level overall";
  std::string season;
  if (a.cycles) {
    const std::string shape = hints.seasonality && *hints.seasonality != synth::SeasonalityKind::none
                                  ? fmt::format("{}-shaped ", synth::to_string(*hints.seasonality))
                                  : std::string();
    season = fmt::format("a {}periodic fluctuation of roughly {:.0f} points", shape, a.cycles->estimated_period);
  } else {
    season = "no apparent seasonality";
  }
  const std::string turns = a.turning_point_count == 0
                                ? "no significant turning points"
                                : fmt::format("{} trend turning point{}", a.turning_point_count,
                                              a.turning_point_count == 1 ? "" : "s");
  return fmt::format(
      "This time series {} from about {} at index 0 to about {} at index {}, peaking near {} at index {} and "
      "bottoming near {} at index {}, with {} volatility, {} and {}.",
      trend, approx(v.front()), approx(v.back()), v.size() - 1, approx(a.ext.max.value), a.ext.max.index,
      approx(a.ext.min.value), a.ext.min.index, features::to_string(a.volatility), season, turns);
}

std::string EndpointDescriber::describe(const Series& series, const features::SeriesAnnotation& a, TaskKind,
                                        const PromptInputs& hints, const RenderAssets& renders) {
  const auto bundle = build_prompt(TemplateId::l2_annotate, series, a, renders, hints);
  std::string text = trim(client_.complete(bundle).text);
  if (text.empty()) throw Error(Errc::l3_unparseable, fmt::format("empty description for series '{}'", series.id));
  return text;
}

taskgen::Generated distractor_pool_mcq(std::span<const Description> pool, TaskKind kind, std::uint64_t seed,
                                       std::optional<std::size_t> target) {
  using taskgen::Generated;
  using taskgen::SkipReason;
  if (kind != TaskKind::local_pattern && kind != TaskKind::global_pattern) {
    throw Error(Errc::invalid_config, "distractor pools build local or global pattern items only");
  }
  if (pool.size() < 4) return Generated::skip(SkipReason::insufficient_pool, fmt::format("{} descriptions", pool.size()));
  Rng rng = Rng(seed).stream("distractor_pool");
  const std::size_t t = target.value_or(rng.index(pool.size()));
  if (t >= pool.size()) throw Error(Errc::invalid_config, "target outside the description pool");
  const Description& truth = pool[t];

  std::vector<std::size_t> others;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (i != t && pool[i].series.id != truth.series.id) others.push_back(i);
  }
  rng.shuffle(std::span<std::size_t>(others));
  std::vector<std::size_t> chosen;
  std::set<std::string> ids{truth.series.id};
  std::set<std::string> texts{truth.text};
  bool duplicate_seen = false;
  for (std::size_t i : others) {
    if (chosen.size() == 3) break;
    if (ids.contains(pool[i].series.id)) continue;
    if (texts.contains(pool[i].text)) {
      duplicate_seen = true;
      continue;
    }
    chosen.push_back(i);
    ids.insert(pool[i].series.id);
    texts.insert(pool[i].text);
  }
  if (chosen.size() < 3) {
    return Generated::skip(duplicate_seen ? SkipReason::duplicate_description : SkipReason::insufficient_pool,
                           fmt::format("{} usable distractors", chosen.size()));
  }

  std::array<std::size_t, 4> order{t, chosen[0], chosen[1], chosen[2]};
  rng.shuffle(std::span<std::size_t>(order));
  QAItem item;
  item.id = fmt::format("{}-{:016x}", to_string(kind), seed);
  item.task_kind = kind;
  item.level = Level::L2;
  item.series = {truth.series};
  item.provenance.seed = seed;
  const std::string_view sep = kind == TaskKind::local_pattern ? ": " : ". ";
  std::string question =
      "Carefully analyze each option, then choose the single best option that most accurately describes the "
      "pattern.\n\nOptions:";
  std::vector<std::string> sources;
  for (std::size_t slot = 0; slot < 4; ++slot) {
    const char letter = static_cast<char>('A' + slot);
    const auto& d = pool[order[slot]];
    item.options.push_back({letter, d.text});
    question += fmt::format("\n\n{}{}{}", letter, sep, d.text);
    sources.push_back(fmt::format("{}={}", letter, d.series.id));
    if (order[slot] == t) item.key = ChoiceKey{letter};
  }
  item.question = std::move(question);
  item.provenance.extra["option_sources"] = join(sources, ",");
  return Generated::ok(std::move(item));
}

// L3 pipeline ------------------------------------------------------------------------

std::string_view to_string(L3Outcome::Route route) noexcept {
  switch (route) {
    case L3Outcome::Route::accepted: return "accepted";
    case L3Outcome::Route::held_out: return "held_out";
    case L3Outcome::Route::rejected: return "rejected";
    case L3Outcome::Route::quarantined: return "quarantined";
    case L3Outcome::Route::human_review: return "human_review";
  }
  return "?";
}

std::vector<RealSeries> read_real_series(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, fmt::format("cannot open '{}'", path.string()));
  std::vector<RealSeries> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fail = [&](std::string_view what) {
      throw Error(Errc::schema_violation, fmt::format("{}:{}: {}", path.string(), line_no, what));
    };
    json doc;
    try {
      doc = json::parse(line);
    } catch (const json::exception& e) {
      fail(e.what());
    }
    RealSeries rs;
    if (!doc.contains("id") || !doc["id"].is_string()) fail("field 'id' must be a string");
    if (!doc.contains("values") || !doc["values"].is_array()) fail("field 'values' must be a list");
    rs.series.id = doc["id"].get<std::string>();
    for (const auto& v : doc["values"]) {
      if (!v.is_number()) fail("field 'values' must hold numbers");
      rs.series.values.push_back(v.get<double>());
    }
    rs.series.sampling_label = doc.value("sampling_label", "");
    rs.series.source = SeriesSource::real_crop;
    rs.scenario = doc.value("scenario", "");
    if (rs.scenario.empty()) fail("field 'scenario' is required");
    if (doc.contains("crop_lengths")) {
      for (const auto& c : doc["crop_lengths"]) {
        if (c.is_string() && c.get<std::string>() == "full") {
          rs.crop_lengths.push_back(0);
        } else if (c.is_number_unsigned()) {
          rs.crop_lengths.push_back(c.get<std::size_t>());
        } else {
          fail("field 'crop_lengths' holds positive integers or \"full\"");
        }
      }
    } else {
      rs.crop_lengths.push_back(0);
    }
    try {
      validate_series(rs.series, 2);
    } catch (const Error& e) {
      fail(e.what());
    }
    out.push_back(std::move(rs));
  }
  return out;
}

L3Outcome generate_l3_item(ChatClient& client, const RealSeries& source, std::uint64_t seed, const L3Options& options,
                           const RenderAssets& renders) {
  L3Outcome out;
  std::vector<std::size_t> lengths;
  for (std::size_t len : source.crop_lengths) {
    const std::size_t actual = len == 0 ? source.series.size() : len;
    if (actual >= options.min_length && actual <= options.max_length && actual <= source.series.size()) {
      lengths.push_back(actual);
    }
  }
  if (lengths.empty()) {
    out.detail = "no crop length fits the series and the length range";
    return out;
  }
  Series series = synth::crop(source.series, lengths, derive_seed(seed, "l3_crop"));
  series.source = SeriesSource::real_crop;
  const auto annotation = features::annotate(series);

  PromptInputs inputs;
  inputs.scenario = source.scenario;
  const auto reply = client.complete(build_prompt(TemplateId::l3_generate, series, annotation, renders, inputs));
  out.raw = reply.text;

  L3Parse parsed;
  try {
    parsed = parse_l3_item(reply.text, series.size());
  } catch (const Error& e) {
    out.route = L3Outcome::Route::quarantined;
    out.detail = e.what();
    return out;
  }

  QAItem item = to_qa_item(parsed.item, series, seed);
  if (parsed.surrounding_text) item.provenance.flags.push_back("surrounding_text");
  item.provenance.extra["scenario"] = source.scenario;
  item.provenance.extra["generator_audit"] = reply.usage.audit_ref;

  inputs.item_json = l3_item_json(parsed.item);
  const int passes = options.second_examiner_pass ? 2 : 1;
  for (int pass = 0; pass < passes; ++pass) {
    const auto verdict_reply = client.complete(build_prompt(TemplateId::l3_examine, series, annotation, renders, inputs));
    Verdict verdict;
    try {
      verdict = parse_examiner_verdict(verdict_reply.text);
    } catch (const Error& e) {
      out.route = L3Outcome::Route::human_review;
      out.detail = e.what();
      out.item = std::move(item);
      return out;
    }
    if (!verdict.valid) {
      out.route = L3Outcome::Route::rejected;
      out.detail = verdict.reason;
      out.item = std::move(item);
      return out;
    }
  }
  item.provenance.flags.push_back("examiner_valid");
  out.route = held_out(item.id, seed, options.holdout_fraction) ? L3Outcome::Route::held_out : L3Outcome::Route::accepted;
  out.item = std::move(item);
  return out;
}

}  // namespace tsbench::llm
