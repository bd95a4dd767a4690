#include "tsbench/render.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "tsbench/error.hpp"

namespace tsbench::render {

using nlohmann::ordered_json;

// Grid ----------------------------------------------------------------------------

namespace {

constexpr int kMargin = 8;

int digits(std::size_t v) { return static_cast<int>(std::to_string(v).size()); }

}  // namespace

GridLayout layout_grid(std::span<const Series> series, const GridParams& params) {
  if (series.empty()) throw Error(Errc::empty_input, "grid needs at least one series");
  if (series.size() > 5) throw Error(Errc::render_error, fmt::format("grid holds at most 5 series, got {}", series.size()));
  const std::size_t n = series.front().size();
  if (n == 0) throw Error(Errc::empty_input, "grid of an empty series");
  for (const auto& s : series) {
    if (s.size() != n) throw Error(Errc::length_mismatch, "grid series must have equal lengths");
    validate_values(s.view());
  }
  if (params.rows_per_column == 0) throw Error(Errc::invalid_config, "rows_per_column must be positive");

  GridLayout g;
  g.n_points = n;
  g.n_series = series.size();
  g.rows_per_column = params.rows_per_column;
  g.n_columns = (n + params.rows_per_column - 1) / params.rows_per_column;
  g.font_pt = params.font_pt;
  g.scale = std::max(1, params.font_pt / 5);
  g.headers.push_back("T");
  for (std::size_t s = 0; s < series.size(); ++s) g.headers.push_back(fmt::format("Series-{}", s + 1));

  const int pad = 4 * g.scale;
  const int char_w = Font::kAdvance * g.scale;
  g.row_height = (Font::kLineH + 3) * g.scale;
  g.index_width = std::max(1, digits(n - 1)) * char_w + 2 * pad;
  std::size_t widest = 0;
  for (std::size_t s = 1; s < g.headers.size(); ++s) widest = std::max(widest, g.headers[s].size());
  std::vector<std::string> texts;
  texts.reserve(n * series.size());
  for (std::size_t t = 0; t < n; ++t) {
    for (const auto& s : series) {
      texts.push_back(format_value(s.values[t]));
      widest = std::max(widest, texts.back().size());
    }
  }
  g.value_width = static_cast<int>(widest) * char_w + 2 * pad;

  const int gap = 4 * g.scale;
  const int block_w = g.index_width + static_cast<int>(series.size()) * g.value_width;
  const int block_h = static_cast<int>(params.rows_per_column + 1) * g.row_height;
  const int per_band = (params.max_width - 2 * kMargin + gap) / (block_w + gap);
  if (per_band < 1) {
    throw Error(Errc::render_error, fmt::format("one block is {} px wide, limit {}", block_w, params.max_width));
  }
  const std::size_t blocks_per_band = std::min<std::size_t>(static_cast<std::size_t>(per_band), g.n_columns);
  const std::size_t n_bands = (g.n_columns + blocks_per_band - 1) / blocks_per_band;
  const int band_gap = 2 * gap;
  const int per_page = (params.max_height - 2 * kMargin + band_gap) / (block_h + band_gap);
  if (per_page < 1) throw Error(Errc::render_error, fmt::format("one band is {} px tall, limit {}", block_h, params.max_height));
  if (n_bands > static_cast<std::size_t>(per_page) && params.overflow == GridParams::Overflow::fail) {
    throw Error(Errc::render_error,
                fmt::format("grid needs {} bands of blocks, only {} fit under {} px", n_bands, per_page, params.max_height));
  }
  const std::size_t bands_per_page = static_cast<std::size_t>(per_page);
  const int page_w = 2 * kMargin + static_cast<int>(blocks_per_band) * (block_w + gap) - gap;

  for (std::size_t b = 0; b < g.n_columns; ++b) {
    const std::size_t band = b / blocks_per_band;
    const std::size_t page = band / bands_per_page;
    const std::size_t band_on_page = band % bands_per_page;
    GridBlock block;
    block.first = b * params.rows_per_column;
    block.rows = std::min(params.rows_per_column, n - block.first);
    block.page = page;
    block.box = {kMargin + static_cast<int>(b % blocks_per_band) * (block_w + gap),
                 kMargin + static_cast<int>(band_on_page) * (block_h + band_gap), block_w,
                 static_cast<int>(block.rows + 1) * g.row_height};
    g.blocks.push_back(block);
  }
  const std::size_t n_pages = (n_bands + bands_per_page - 1) / bands_per_page;
  for (std::size_t p = 0; p < n_pages; ++p) {
    const std::size_t bands_here = std::min(bands_per_page, n_bands - p * bands_per_page);
    g.pages.emplace_back(page_w, 2 * kMargin + static_cast<int>(bands_here) * (block_h + band_gap) - band_gap);
  }

  g.cells.reserve(n * series.size());
  for (std::size_t t = 0; t < n; ++t) {
    const std::size_t b = t / params.rows_per_column;
    const std::size_t row = t % params.rows_per_column;
    const auto& box = g.blocks[b].box;
    for (std::size_t s = 0; s < series.size(); ++s) {
      GridCell c;
      c.t = t;
      c.series = s;
      c.block = b;
      c.row = row;
      c.text = std::move(texts[t * series.size() + s]);
      c.box = {box.x + g.index_width + static_cast<int>(s) * g.value_width, box.y + static_cast<int>(row + 1) * g.row_height,
               g.value_width, g.row_height};
      g.cells.push_back(std::move(c));
    }
  }
  return g;
}

std::vector<Image> render_grid(const GridLayout& g) {
  std::vector<Image> pages;
  for (const auto& [w, h] : g.pages) pages.emplace_back(w, h);
  const int pad = 4 * g.scale;
  const int text_dy = (g.row_height - text_height(g.scale)) / 2;
  const Rgb header_bg{230, 230, 230};
  const Rgb rule{215, 215, 215};

  for (const auto& block : g.blocks) {
    Image& img = pages.at(block.page);
    const Rect& b = block.box;
    img.fill({b.x, b.y, b.w, g.row_height}, header_bg);
    for (std::size_t r = 1; r <= block.rows; ++r) img.hline(b.x, b.x + b.w - 1, b.y + static_cast<int>(r) * g.row_height, rule);
    // Column headers, right-aligned like the values below them.
    draw_text(img, b.x + pad, b.y + text_dy, g.headers[0], kBlack, g.scale);
    for (std::size_t s = 0; s < g.n_series; ++s) {
      const int cx = b.x + g.index_width + static_cast<int>(s) * g.value_width;
      img.vline(cx, b.y, b.y + b.h - 1, s == 0 ? kDarkGray : rule);
      const auto& label = g.headers[s + 1];
      draw_text(img, cx + g.value_width - pad - text_width(label, g.scale), b.y + text_dy, label, kBlack, g.scale);
    }
    for (std::size_t r = 0; r < block.rows; ++r) {
      const std::string idx = std::to_string(block.first + r);
      const int y = b.y + static_cast<int>(r + 1) * g.row_height + text_dy;
      draw_text(img, b.x + g.index_width - pad - text_width(idx, g.scale), y, idx, kDarkGray, g.scale);
    }
    // Block frame doubles as the separator between blocks.
    img.hline(b.x, b.x + b.w - 1, b.y, kBlack);
    img.hline(b.x, b.x + b.w - 1, b.y + b.h - 1, kBlack);
    img.hline(b.x, b.x + b.w - 1, b.y + g.row_height, kBlack);
    img.vline(b.x, b.y, b.y + b.h - 1, kBlack);
    img.vline(b.x + b.w - 1, b.y, b.y + b.h - 1, kBlack);
  }
  for (const auto& c : g.cells) {
    Image& img = pages.at(g.blocks[c.block].page);
    draw_text(img, c.box.x + c.box.w - pad - text_width(c.text, g.scale), c.box.y + text_dy, c.text, kBlack, g.scale);
  }
  return pages;
}

std::string grid_sidecar_json(const GridLayout& g) {
  ordered_json blocks = ordered_json::array();
  for (const auto& b : g.blocks) {
    blocks.push_back({{"first", b.first}, {"rows", b.rows}, {"page", b.page}, {"box", {b.box.x, b.box.y, b.box.w, b.box.h}}});
  }
  ordered_json cells = ordered_json::array();
  for (const auto& c : g.cells) {
    cells.push_back({{"t", c.t}, {"series", c.series}, {"block", c.block}, {"row", c.row}, {"text", c.text},
                     {"box", {c.box.x, c.box.y, c.box.w, c.box.h}}});
  }
  ordered_json pages = ordered_json::array();
  for (const auto& [w, h] : g.pages) pages.push_back({w, h});
  ordered_json doc = {{"kind", "grid"},
                      {"n_points", g.n_points},
                      {"n_series", g.n_series},
                      {"rows_per_column", g.rows_per_column},
                      {"n_columns", g.n_columns},
                      {"headers", g.headers},
                      {"font_pt", g.font_pt},
                      {"font_digest", fmt::format("{:016x}", Font::table_digest())},
                      {"precision", g.precision_rule},
                      {"pages", pages},
                      {"blocks", blocks},
                      {"cells", cells}};
  return doc.dump();
}

std::vector<std::vector<double>> parse_grid_cells(const GridLayout& g) {
  std::vector<std::vector<double>> out(g.n_series);
  for (const auto& block : g.blocks) {
    for (std::size_t r = 0; r < block.rows; ++r) {
      for (std::size_t s = 0; s < g.n_series; ++s) {
        const auto& c = g.cell(block.first + r, s);
        double v = 0.0;
        if (!parse_number(c.text, v)) {
          throw Error(Errc::render_error, fmt::format("cell ({}, {}) holds unparseable '{}'", c.t, s, c.text));
        }
        out[s].push_back(v);
      }
    }
  }
  return out;
}

// Plots ---------------------------------------------------------------------------

Rgb series_color(std::size_t i) noexcept {
  static constexpr Rgb palette[] = {{31, 119, 180}, {255, 127, 14}, {44, 160, 44},  {214, 39, 40},   {148, 103, 189},
                                    {140, 86, 75},  {227, 119, 194}, {127, 127, 127}, {188, 189, 34}, {23, 190, 207}};
  return palette[i % 10];
}

double nice_step(double span, int target) noexcept {
  if (!(span > 0.0) || target < 1) return 1.0;
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  const double f = raw / mag;
  const double nice = f <= 1.0 ? 1.0 : f <= 2.0 ? 2.0 : f <= 5.0 ? 5.0 : 10.0;
  return nice * mag;
}

std::pair<double, double> axis_range(double lo, double hi, int target_ticks) {
  if (!std::isfinite(lo) || !std::isfinite(hi) || lo > hi) throw Error(Errc::invalid_series, "bad axis range");
  if (lo == hi) {
    const double pad = lo == 0.0 ? 1.0 : std::fabs(lo) * 0.1;
    return {lo - pad, hi + pad};
  }
  const double step = nice_step(hi - lo, target_ticks);
  return {std::floor(lo / step) * step, std::ceil(hi / step) * step};
}

namespace {

int label_decimals(double step) { return std::max(0, -static_cast<int>(std::floor(std::log10(step) + 1e-9))); }

std::vector<double> ticks_between(double lo, double hi, double step) {
  std::vector<double> out;
  const double first = std::ceil(lo / step - 1e-9);
  const double last = std::floor(hi / step + 1e-9);
  for (double k = first; k <= last; k += 1.0) out.push_back(k * step);
  return out;
}

struct Axes {
  Rect area;
  double x_lo, x_hi, y_lo, y_hi;
  double px(double x) const { return area.x + (x - x_lo) / (x_hi - x_lo) * (area.w - 1); }
  double py(double y) const { return area.y + (area.h - 1) - (y - y_lo) / (y_hi - y_lo) * (area.h - 1); }
};

/// Frame, gridlines and tick labels; returns the y ticks drawn.
std::vector<double> draw_axes(Image& img, const Axes& ax, int scale, std::vector<std::size_t>* x_ticks_out) {
  const double y_step = nice_step(ax.y_hi - ax.y_lo, 6);
  const auto y_ticks = ticks_between(ax.y_lo, ax.y_hi, y_step);
  const int dec = label_decimals(y_step);
  for (double t : y_ticks) {
    const int y = static_cast<int>(std::lround(ax.py(t)));
    img.hline(ax.area.x, ax.area.x + ax.area.w - 1, y, kGray);
    const std::string label = format_fixed(t == 0.0 ? 0.0 : t, dec);
    draw_text(img, ax.area.x - 6 - text_width(label, scale), y - text_height(scale) / 2, label, kBlack, scale);
  }
  const double span = ax.x_hi - ax.x_lo;
  const double x_step = std::max(1.0, nice_step(span, 8));
  for (double t : ticks_between(ax.x_lo, ax.x_hi, x_step)) {
    const int x = static_cast<int>(std::lround(ax.px(t)));
    img.vline(x, ax.area.y, ax.area.y + ax.area.h - 1, kGray);
    const std::string label = fmt::format("{}", static_cast<long long>(std::llround(t)));
    draw_text(img, x - text_width(label, scale) / 2, ax.area.y + ax.area.h + 6, label, kBlack, scale);
    if (x_ticks_out) x_ticks_out->push_back(static_cast<std::size_t>(std::llround(t)));
  }
  const Rect& a = ax.area;
  img.hline(a.x, a.x + a.w - 1, a.y, kBlack);
  img.hline(a.x, a.x + a.w - 1, a.y + a.h - 1, kBlack);
  img.vline(a.x, a.y, a.y + a.h - 1, kBlack);
  img.vline(a.x + a.w - 1, a.y, a.y + a.h - 1, kBlack);
  return y_ticks;
}

void draw_polyline(Image& img, const Axes& ax, std::span<const double> values, std::size_t x0, Rgb color, int thickness) {
  if (values.size() == 1) {
    img.line(ax.px(static_cast<double>(x0)), ax.py(values[0]), ax.px(static_cast<double>(x0)), ax.py(values[0]), color,
             thickness + 2);
    return;
  }
  for (std::size_t i = 1; i < values.size(); ++i) {
    img.line(ax.px(static_cast<double>(x0 + i - 1)), ax.py(values[i - 1]), ax.px(static_cast<double>(x0 + i)),
             ax.py(values[i]), color, thickness);
  }
}

}  // namespace

Plot render_plot(std::span<const Series> series, const PlotStyle& style) {
  if (series.empty()) throw Error(Errc::empty_input, "plot needs at least one series");
  double lo = INFINITY, hi = -INFINITY;
  std::size_t n = 0;
  for (const auto& s : series) {
    validate_series(s, 1);
    const auto [mn, mx] = std::minmax_element(s.values.begin(), s.values.end());
    lo = std::min(lo, *mn);
    hi = std::max(hi, *mx);
    n = std::max(n, s.size());
  }
  const auto [y_lo, y_hi] = axis_range(lo, hi);
  Plot plot{Image(style.width, style.height), {}};
  const bool legend = style.legend && series.size() > 1;
  const int top = legend ? 34 : 16;
  Axes ax{{86, top, style.width - 86 - 20, style.height - top - 36}, 0.0, std::max(1.0, static_cast<double>(n - 1)), y_lo, y_hi};
  plot.meta.area = ax.area;
  plot.meta.y_lo = y_lo;
  plot.meta.y_hi = y_hi;
  plot.meta.y_ticks = draw_axes(plot.image, ax, 2, &plot.meta.x_ticks);
  for (std::size_t i = 0; i < series.size(); ++i) {
    draw_polyline(plot.image, ax, series[i].view(), 0, series_color(i), style.thickness);
    plot.meta.colors.push_back(series_color(i));
  }
  if (legend) {
    int x = ax.area.x + ax.area.w;
    for (std::size_t i = series.size(); i-- > 0;) {
      const std::string label = fmt::format("Series-{}", i + 1);
      x -= text_width(label, 2) + 30;
      plot.image.fill({x, 12, 16, 4}, series_color(i));
      draw_text(plot.image, x + 20, 8, label, kBlack, 2);
    }
    for (std::size_t i = 0; i < series.size(); ++i) plot.meta.legend.push_back(fmt::format("Series-{}", i + 1));
  }
  return plot;
}

Panel render_successor_panel(std::span<const double> context, std::span<const std::vector<double>> candidates,
                             const PlotStyle& style) {
  if (candidates.size() != 4) throw Error(Errc::render_error, fmt::format("panel needs 4 candidates, got {}", candidates.size()));
  if (context.empty()) throw Error(Errc::empty_input, "panel needs a context window");
  validate_values(context);
  double lo = *std::min_element(context.begin(), context.end());
  double hi = *std::max_element(context.begin(), context.end());
  std::size_t patch = 0;
  for (const auto& c : candidates) {
    if (c.empty()) throw Error(Errc::empty_input, "empty candidate patch");
    validate_values(c);
    lo = std::min(lo, *std::min_element(c.begin(), c.end()));
    hi = std::max(hi, *std::max_element(c.begin(), c.end()));
    patch = std::max(patch, c.size());
  }
  const auto [y_lo, y_hi] = axis_range(lo, hi);
  const int cell_w = style.width / 2;
  const int cell_h = style.height;
  Panel panel{Image(cell_w * 2, cell_h * 2), {}};
  panel.meta.y_lo = y_lo;
  panel.meta.y_hi = y_hi;
  const double x_hi = static_cast<double>(context.size() + patch - 1);
  for (std::size_t k = 0; k < 4; ++k) {
    const int ox = static_cast<int>(k % 2) * cell_w;
    const int oy = static_cast<int>(k / 2) * cell_h;
    Axes ax{{ox + 80, oy + 34, cell_w - 80 - 16, cell_h - 34 - 34}, 0.0, x_hi, y_lo, y_hi};
    draw_axes(panel.image, ax, 1, nullptr);
    const std::string title(1, static_cast<char>('A' + k));
    draw_text(panel.image, ax.area.x + ax.area.w / 2 - text_width(title, 3) / 2, oy + 8, title, kBlack, 3);
    const int bx = static_cast<int>(std::lround(ax.px(static_cast<double>(context.size()) - 0.5)));
    for (int y = ax.area.y; y < ax.area.y + ax.area.h; y += 6) panel.image.vline(bx, y, y + 2, kDarkGray);
    draw_polyline(panel.image, ax, context, 0, kBlue, style.thickness);
    draw_polyline(panel.image, ax, candidates[k], context.size(), kRed, style.thickness);
    panel.meta.subplots[k] = ax.area;
    panel.meta.boundary_x[k] = bx;
  }
  return panel;
}

std::string plot_sidecar_json(const PlotMeta& m) {
  ordered_json colors = ordered_json::array();
  for (const auto& c : m.colors) colors.push_back(fmt::format("#{:02x}{:02x}{:02x}", c.r, c.g, c.b));
  ordered_json doc = {{"kind", "plot"},
                      {"area", {m.area.x, m.area.y, m.area.w, m.area.h}},
                      {"y_range", {m.y_lo, m.y_hi}},
                      {"y_ticks", m.y_ticks},
                      {"x_ticks", m.x_ticks},
                      {"legend", m.legend},
                      {"colors", colors}};
  return doc.dump();
}

std::string panel_sidecar_json(const PanelMeta& m) {
  ordered_json subplots = ordered_json::object();
  for (std::size_t k = 0; k < 4; ++k) {
    const auto& r = m.subplots[k];
    subplots[std::string(1, static_cast<char>('A' + k))] = {{"area", {r.x, r.y, r.w, r.h}},
                                                            {"boundary_x", m.boundary_x[k]}};
  }
  ordered_json doc = {{"kind", "successor_panel"}, {"y_range", {m.y_lo, m.y_hi}}, {"subplots", subplots}};
  return doc.dump();
}

}  // namespace tsbench::render
