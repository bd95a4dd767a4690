#include <openssl/sha.h>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "tsbench/error.hpp"
#include "tsbench/harness.hpp"

namespace tsbench::harness {

using nlohmann::ordered_json;

std::string_view to_string(Strategy s) noexcept {
  switch (s) {
    case Strategy::text_no_index: return "text_no_index";
    case Strategy::text_with_index: return "text_with_index";
    case Strategy::vision_plot: return "vision_plot";
    case Strategy::vision_plot_num: return "vision_plot_num";
    case Strategy::vision_plus_text_no_index: return "vision_plus_text_no_index";
    case Strategy::vision_plus_text_with_index: return "vision_plus_text_with_index";
  }
  return "?";
}

const std::vector<Strategy>& all_strategies() {
  static const std::vector<Strategy> all{Strategy::text_no_index,   Strategy::text_with_index,
                                         Strategy::vision_plot,     Strategy::vision_plot_num,
                                         Strategy::vision_plus_text_no_index, Strategy::vision_plus_text_with_index};
  return all;
}

Strategy strategy_from_string(std::string_view name) {
  std::string valid;
  for (Strategy s : all_strategies()) {
    if (to_string(s) == name) return s;
    valid += (valid.empty() ? "" : ", ") + std::string(to_string(s));
  }
  throw Error(Errc::invalid_config, fmt::format("unknown strategy '{}' (valid: {})", name, valid));
}

bool supports(Strategy strategy, TaskKind kind) noexcept {
  return !(strategy == Strategy::vision_plot && level_of(kind) == Level::L1);
}

namespace {

std::string sha256_hex(std::string_view text) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(text.data()), text.size(), digest);
  std::string out;
  for (unsigned char c : digest) out += fmt::format("{:02x}", c);
  return out;
}

constexpr std::string_view kGridRules =
    "You must refer to both of the two time series images to answer the question.\n"
    "\n"
    "The first image plots the visual trends. The second image is a High-Density Numeric Grid that provides precise "
    "values.\n"
    "\n"
    "How to read the second image (Numerical Grid):\n"
    "\n"
    "1. Layout: The data is organized in a multi-column newspaper layout. Read the columns from left to right.\n"
    "\n"
    "2. Vertical Flow: Within each major column, read the data vertically from top to bottom. When a column reaches "
    "the bottom, the sequence continues at the top of the next column to the right.\n"
    "\n"
    "3. Structure: Inside each column block, the leftmost sub-column labeled 'T' represents the time index. The "
    "subsequent sub-columns (e.g., Series-1) represent the values of different time series.";

std::string series_block(const QAItem& item, bool indexed) {
  const std::size_t n = input_series_count(item);
  auto one = [&](const Series& s) { return indexed ? serialize_indexed(s.view()) : serialize_values(s.view()); };
  if (n == 1) return one(item.series.front());
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += "\n\n";
    out += fmt::format("Time Series {}: {}", i + 1, one(item.series[i]));
  }
  return out;
}

std::string data_sentence(const QAItem& item, bool indexed) {
  return fmt::format("{}:\n\n{},\n\n",
                     indexed ? "Given the time series data (element format[index,value]), start from T = 0"
                             : "Given the time series data",
                     series_block(item, indexed));
}

llm::ImageRef asset(const QAItem& item, const std::string& role, const std::filesystem::path& root) {
  const auto it = item.assets.find(role);
  if (it == item.assets.end()) {
    throw Error(Errc::encoding_error, fmt::format("item '{}' has no '{}' image; run render first", item.id, role));
  }
  std::filesystem::path p(it->second);
  if (p.is_relative() && !root.empty()) p = root / p;
  return {p.string(), "image/png"};
}

/// The line plot, or the 2x2 panel for successor items.
llm::ImageRef picture(const QAItem& item, const std::filesystem::path& root) {
  return asset(item, item.task_kind == TaskKind::successor ? "panel" : "plot", root);
}

}  // namespace

std::string serialize_values(std::span<const double> values) {
  std::string out = "[";
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ", ";
    out += format_value(values[i]);
  }
  return out + "]";
}

std::string serialize_indexed(std::span<const double> values) {
  std::string out = "[";
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ", ";
    out += fmt::format("[{},{}]", i, format_value(values[i]));
  }
  return out + "]";
}

std::string ModelRequest::to_json() const {
  ordered_json images_json = ordered_json::array();
  for (const auto& img : images) images_json.push_back(img.path);
  return ordered_json{{"item_id", item_id}, {"strategy", std::string(harness::to_string(strategy))}, {"text", text},
                      {"images", images_json}}
      .dump();
}

std::string ModelRequest::digest() const { return sha256_hex(to_json()); }

ModelRequest encode_instruction(Strategy strategy, const QAItem& item, const std::filesystem::path& root) {
  if (!supports(strategy, item.task_kind)) {
    throw Error(Errc::strategy_rejected, fmt::format("{} cannot carry {} items", to_string(strategy),
                                                     tsbench::to_string(item.task_kind)));
  }
  ModelRequest req;
  req.item_id = item.id;
  req.strategy = strategy;
  switch (strategy) {
    case Strategy::text_no_index: req.text = data_sentence(item, false) + item.question; break;
    case Strategy::text_with_index: req.text = data_sentence(item, true) + item.question; break;
    case Strategy::vision_plot:
      req.images.push_back(picture(item, root));
      req.text = "You must refer to the time series plot to answer the question.\n\n" + item.question;
      break;
    case Strategy::vision_plot_num: {
      req.images.push_back(picture(item, root));
      req.images.push_back(asset(item, "grid", root));
      for (int page = 2; item.assets.contains(fmt::format("grid.{}", page)); ++page) {
        req.images.push_back(asset(item, fmt::format("grid.{}", page), root));
      }
      req.text = std::string(kGridRules) + "\n\n" + item.question;
      break;
    }
    case Strategy::vision_plus_text_no_index:
      req.images.push_back(picture(item, root));
      req.text = "You must refer to the time series' plot and its numerical series to answer the question. " +
                 data_sentence(item, false) + item.question;
      break;
    case Strategy::vision_plus_text_with_index:
      req.images.push_back(picture(item, root));
      req.text = "You must refer to the time series plot and its numerical series to answer the question. " +
                 data_sentence(item, true) + item.question;
      break;
  }
  return req;
}

// Assets ------------------------------------------------------------------------------

RenderSummary render_item_assets(QAItem& item, const std::filesystem::path& dir, const std::filesystem::path& relative_to,
                                 const render::GridParams& grid) {
  RenderSummary summary;
  auto emit = [&](const std::string& role, const std::string& file, std::span<const std::uint8_t> bytes) {
    const auto path = dir / file;
    (render::write_if_changed(path, bytes) ? summary.written : summary.unchanged)++;
    if (!role.empty()) item.assets[role] = std::filesystem::relative(path, relative_to).generic_string();
  };

  const std::span<const Series> inputs(item.series.data(), input_series_count(item));
  ordered_json sidecar;
  sidecar["item_id"] = item.id;

  const auto plot = render::render_plot(inputs);
  emit("plot", item.id + ".plot.png", render::encode_png(plot.image));
  sidecar["plot"] = ordered_json::parse(render::plot_sidecar_json(plot.meta));

  const auto layout = render::layout_grid(inputs, grid);
  const auto pages = render::render_grid(layout);
  for (std::size_t p = 0; p < pages.size(); ++p) {
    const std::string role = p == 0 ? "grid" : fmt::format("grid.{}", p + 1);
    emit(role, p == 0 ? item.id + ".grid.png" : fmt::format("{}.grid.{}.png", item.id, p + 1), render::encode_png(pages[p]));
  }
  sidecar["grid"] = ordered_json::parse(render::grid_sidecar_json(layout));

  if (item.task_kind == TaskKind::successor) {
    std::vector<std::vector<double>> candidates;
    for (std::size_t i = 1; i < item.series.size(); ++i) candidates.push_back(item.series[i].values);
    const auto panel = render::render_successor_panel(item.series.front().view(), candidates);
    emit("panel", item.id + ".panel.png", render::encode_png(panel.image));
    sidecar["panel"] = ordered_json::parse(render::panel_sidecar_json(panel.meta));
  }
  const std::string text = sidecar.dump();
  emit("layout", item.id + ".json",
       std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  return summary;
}

}  // namespace tsbench::harness
