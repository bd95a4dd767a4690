#include <algorithm>
#include <fmt/format.h>
#include <fstream>
#include <nlohmann/json.hpp>

#include "tsbench/error.hpp"
#include "tsbench/harness.hpp"
#include "tsbench/rng.hpp"

namespace tsbench::harness {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

ordered_json printed_json(const PrintedValue& v) { return {{"value", v.value}, {"text", v.text}}; }

ordered_json pair_json(const PrintedPair& p) { return {{"index", p.index}, {"value", p.value.value}, {"text", p.value.text}}; }

ordered_json key_json(const AnswerKey& key) {
  return std::visit(
      [](const auto& k) -> ordered_json {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, MinMaxKey>) {
          return {{"type", "minmax"}, {"max", pair_json(k.max)}, {"min", pair_json(k.min)},
                  {"order", std::string(features::to_string(k.order))}};
        } else if constexpr (std::is_same_v<K, StartEndKey>) {
          return {{"type", "start_end"}, {"start", pair_json(k.start)}, {"end", pair_json(k.end)},
                  {"verdict", std::string(features::to_string(k.verdict))}};
        } else if constexpr (std::is_same_v<K, MultiSeriesKey>) {
          return {{"type", "multiseries"}, {"series", k.series_number}, {"pair", pair_json(k.pair)}, {"lowest", k.lowest}};
        } else if constexpr (std::is_same_v<K, SubseriesKey>) {
          ordered_json values = ordered_json::array();
          for (const auto& v : k.values) values.push_back(printed_json(v));
          return {{"type", "subseries"}, {"series", k.series_number}, {"from", k.from}, {"to", k.to}, {"values", values}};
        } else {
          return {{"type", "choice"}, {"letter", std::string(1, k.letter)}};
        }
      },
      key);
}

/// Field-path aware accessors so errors name the offending field.
class Reader {
 public:
  explicit Reader(const json& doc) : doc_(doc) {}

  [[noreturn]] static void fail(std::string_view field, std::string_view what) {
    throw Error(Errc::schema_violation, fmt::format("field '{}': {}", field, what));
  }

  static const json& at(const json& obj, std::string_view name, std::string_view path) {
    if (!obj.is_object() || !obj.contains(name)) fail(path, "missing");
    return obj[std::string(name)];
  }
  static std::string str(const json& obj, std::string_view name, std::string_view path) {
    const json& v = at(obj, name, path);
    if (!v.is_string()) fail(path, "expected a string");
    return v.get<std::string>();
  }
  static std::size_t index(const json& obj, std::string_view name, std::string_view path) {
    const json& v = at(obj, name, path);
    if (!v.is_number_unsigned()) fail(path, "expected a non-negative integer");
    return v.get<std::size_t>();
  }
  static double number(const json& obj, std::string_view name, std::string_view path) {
    const json& v = at(obj, name, path);
    if (!v.is_number()) fail(path, "expected a number");
    return v.get<double>();
  }
  static PrintedValue printed_value(const json& obj, std::string_view path) {
    return {number(obj, "value", fmt::format("{}.value", path)), str(obj, "text", fmt::format("{}.text", path))};
  }
  static PrintedPair pair(const json& obj, std::string_view name, std::string_view path) {
    const json& p = at(obj, name, path);
    return {index(p, "index", fmt::format("{}.index", path)), printed_value(p, path)};
  }

 private:
  const json& doc_;
};

template <typename E>
E enum_named(std::string_view name, std::initializer_list<E> values, std::string_view field) {
  for (E v : values) {
    if (features::to_string(v) == name) return v;
  }
  Reader::fail(field, fmt::format("unknown value '{}'", name));
}

AnswerKey key_from(const json& k) {
  using R = Reader;
  const std::string type = R::str(k, "type", "answer_key.type");
  if (type == "minmax") {
    using features::ExtremaOrder;
    return MinMaxKey{R::pair(k, "max", "answer_key.max"), R::pair(k, "min", "answer_key.min"),
                     enum_named(R::str(k, "order", "answer_key.order"),
                                {ExtremaOrder::max_first, ExtremaOrder::min_first, ExtremaOrder::tie}, "answer_key.order")};
  }
  if (type == "start_end") {
    using features::StartEndVerdict;
    return StartEndKey{R::pair(k, "start", "answer_key.start"), R::pair(k, "end", "answer_key.end"),
                       enum_named(R::str(k, "verdict", "answer_key.verdict"),
                                  {StartEndVerdict::larger, StartEndVerdict::smaller, StartEndVerdict::equal},
                                  "answer_key.verdict")};
  }
  if (type == "multiseries") {
    const json& lowest = R::at(k, "lowest", "answer_key.lowest");
    if (!lowest.is_boolean()) R::fail("answer_key.lowest", "expected a boolean");
    return MultiSeriesKey{R::index(k, "series", "answer_key.series"), R::pair(k, "pair", "answer_key.pair"),
                          lowest.get<bool>()};
  }
  if (type == "subseries") {
    SubseriesKey key{R::index(k, "series", "answer_key.series"), R::index(k, "from", "answer_key.from"),
                     R::index(k, "to", "answer_key.to"), {}};
    const json& values = R::at(k, "values", "answer_key.values");
    if (!values.is_array()) R::fail("answer_key.values", "expected a list");
    for (std::size_t i = 0; i < values.size(); ++i) key.values.push_back(R::printed_value(values[i], fmt::format("answer_key.values[{}]", i)));
    return key;
  }
  if (type == "choice") {
    const std::string letter = R::str(k, "letter", "answer_key.letter");
    if (letter.size() != 1) R::fail("answer_key.letter", "expected one letter");
    return ChoiceKey{letter[0]};
  }
  R::fail("answer_key.type", fmt::format("unknown key type '{}'", type));
}

}  // namespace

std::string item_to_json(const QAItem& item) {
  ordered_json series = ordered_json::array();
  for (const auto& s : item.series) {
    series.push_back({{"id", s.id},
                      {"values", s.values},
                      {"sampling_label", s.sampling_label},
                      {"source", std::string(to_string(s.source))},
                      {"origin", s.origin},
                      {"origin_offset", s.origin_offset}});
  }
  ordered_json options = ordered_json::array();
  for (const auto& o : item.options) options.push_back({{"letter", std::string(1, o.letter)}, {"text", o.text}});
  ordered_json assets = ordered_json::object();
  for (const auto& [role, path] : item.assets) assets[role] = path;
  ordered_json extra = ordered_json::object();
  for (const auto& [k, v] : item.provenance.extra) extra[k] = v;
  ordered_json doc = {{"schema_version", kSchemaVersion},
                      {"id", item.id},
                      {"level", std::string(to_string(item.level))},
                      {"task_kind", std::string(to_string(item.task_kind))},
                      {"question", item.question},
                      {"options", options},
                      {"answer_key", key_json(item.key)},
                      {"series", series},
                      {"assets", assets},
                      {"cot", item.cot ? ordered_json(*item.cot) : ordered_json(nullptr)},
                      {"provenance",
                       {{"generator_version", item.provenance.generator_version},
                        {"seed", item.provenance.seed},
                        {"flags", item.provenance.flags},
                        {"extra", extra}}}};
  return doc.dump();
}

QAItem item_from_json(std::string_view line) {
  using R = Reader;
  json doc;
  try {
    doc = json::parse(line);
  } catch (const json::exception& e) {
    throw Error(Errc::schema_violation, fmt::format("not JSON: {}", e.what()));
  }
  if (!doc.is_object()) R::fail("<root>", "expected an object");
  const json& version = R::at(doc, "schema_version", "schema_version");
  if (!version.is_number_integer()) R::fail("schema_version", "expected an integer");
  if (version.get<int>() != kSchemaVersion) {
    throw Error(Errc::unsupported_version,
                fmt::format("schema_version {} (this build reads {})", version.get<int>(), kSchemaVersion));
  }
  QAItem item;
  item.id = R::str(doc, "id", "id");
  try {
    item.level = level_from_string(R::str(doc, "level", "level"));
    item.task_kind = task_kind_from_string(R::str(doc, "task_kind", "task_kind"));
  } catch (const Error& e) {
    R::fail("level/task_kind", e.what());
  }
  item.question = R::str(doc, "question", "question");

  const json& options = R::at(doc, "options", "options");
  if (!options.is_array()) R::fail("options", "expected a list");
  for (std::size_t i = 0; i < options.size(); ++i) {
    const auto path = fmt::format("options[{}]", i);
    const std::string letter = R::str(options[i], "letter", path + ".letter");
    if (letter.size() != 1) R::fail(path + ".letter", "expected one letter");
    item.options.push_back({letter[0], R::str(options[i], "text", path + ".text")});
  }
  item.key = key_from(R::at(doc, "answer_key", "answer_key"));

  const json& series = R::at(doc, "series", "series");
  if (!series.is_array()) R::fail("series", "expected a list");
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto path = fmt::format("series[{}]", i);
    const json& s = series[i];
    Series out;
    out.id = R::str(s, "id", path + ".id");
    const json& values = R::at(s, "values", path + ".values");
    if (!values.is_array()) R::fail(path + ".values", "expected a list");
    for (const auto& v : values) {
      if (!v.is_number()) R::fail(path + ".values", "expected numbers");
      out.values.push_back(v.get<double>());
    }
    out.sampling_label = R::str(s, "sampling_label", path + ".sampling_label");
    try {
      out.source = series_source_from_string(R::str(s, "source", path + ".source"));
    } catch (const Error& e) {
      R::fail(path + ".source", e.what());
    }
    out.origin = R::str(s, "origin", path + ".origin");
    out.origin_offset = R::index(s, "origin_offset", path + ".origin_offset");
    item.series.push_back(std::move(out));
  }

  const json& assets = R::at(doc, "assets", "assets");
  if (!assets.is_object()) R::fail("assets", "expected an object");
  for (auto it = assets.begin(); it != assets.end(); ++it) {
    if (!it->is_string()) R::fail("assets." + it.key(), "expected a path");
    item.assets[it.key()] = it->get<std::string>();
  }
  const json& cot = R::at(doc, "cot", "cot");
  if (cot.is_string()) item.cot = cot.get<std::string>();
  else if (!cot.is_null()) R::fail("cot", "expected a string or null");

  const json& prov = R::at(doc, "provenance", "provenance");
  item.provenance.generator_version = R::str(prov, "generator_version", "provenance.generator_version");
  const json& seed = R::at(prov, "seed", "provenance.seed");
  if (!seed.is_number_unsigned()) R::fail("provenance.seed", "expected a non-negative integer");
  item.provenance.seed = seed.get<std::uint64_t>();
  const json& flags = R::at(prov, "flags", "provenance.flags");
  if (!flags.is_array()) R::fail("provenance.flags", "expected a list");
  for (const auto& f : flags) {
    if (!f.is_string()) R::fail("provenance.flags", "expected strings");
    item.provenance.flags.push_back(f.get<std::string>());
  }
  const json& extra = R::at(prov, "extra", "provenance.extra");
  if (!extra.is_object()) R::fail("provenance.extra", "expected an object");
  for (auto it = extra.begin(); it != extra.end(); ++it) {
    if (!it->is_string()) R::fail("provenance.extra." + it.key(), "expected a string");
    item.provenance.extra[it.key()] = it->get<std::string>();
  }
  validate_item(item);
  return item;
}

void write_dataset(const std::filesystem::path& path, std::span<const QAItem> items) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io_error, fmt::format("cannot write '{}'", tmp));
    for (const auto& item : items) out << item_to_json(item) << '\n';
    if (!out) throw Error(Errc::io_error, fmt::format("write to '{}' failed", tmp));
  }
  std::filesystem::rename(tmp, path);
}

std::vector<QAItem> read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, fmt::format("cannot open dataset '{}'", path.string()));
  std::vector<QAItem> items;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      items.push_back(item_from_json(line));
    } catch (const Error& e) {
      throw Error(e.code(), fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
    }
  }
  return items;
}

std::vector<QAItem> subsample(std::span<const QAItem> items, std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(items.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng = Rng(seed).stream("subsample");
  rng.shuffle(std::span<std::size_t>(idx));
  idx.resize(std::min(n, idx.size()));
  std::sort(idx.begin(), idx.end());
  std::vector<QAItem> out;
  for (std::size_t i : idx) out.push_back(items[i]);
  return out;
}

}  // namespace tsbench::harness
