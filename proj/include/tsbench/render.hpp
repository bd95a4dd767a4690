#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tsbench/series.hpp"

namespace tsbench::render {

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

inline constexpr Rgb kWhite{255, 255, 255};
inline constexpr Rgb kBlack{0, 0, 0};
inline constexpr Rgb kGray{200, 200, 200};
inline constexpr Rgb kDarkGray{90, 90, 90};
inline constexpr Rgb kBlue{31, 119, 180};
inline constexpr Rgb kRed{214, 39, 40};

struct Rect {
  int x = 0, y = 0, w = 0, h = 0;
  bool contains(const Rect& o) const noexcept {
    return o.x >= x && o.y >= y && o.x + o.w <= x + w && o.y + o.h <= y + h;
  }
  friend bool operator==(const Rect&, const Rect&) = default;
};

/// 8-bit RGB raster, row-major.
class Image {
 public:
  Image(int width, int height, Rgb fill = kWhite);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  const std::vector<std::uint8_t>& pixels() const noexcept { return px_; }
  Rgb at(int x, int y) const;

  void set(int x, int y, Rgb c) noexcept;  // clipped
  void fill(const Rect& r, Rgb c) noexcept;
  void line(double x0, double y0, double x1, double y1, Rgb c, int thickness = 1) noexcept;
  void hline(int x0, int x1, int y, Rgb c) noexcept;
  void vline(int x, int y0, int y1, Rgb c) noexcept;
  Image crop(const Rect& r) const;

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int width_;
  int height_;
  std::vector<std::uint8_t> px_;
};

std::vector<std::uint8_t> encode_png(const Image& image);

// Bitmap font ---------------------------------------------------------------

/// 5x7 glyphs in 6x8 cells, printable ASCII only (others draw as '?').
struct Font {
  static constexpr int kGlyphW = 5;
  static constexpr int kGlyphH = 7;
  static constexpr int kAdvance = 6;
  static constexpr int kLineH = 8;

  /// Five column bitmaps, bit 0 = top row.
  static std::array<std::uint8_t, 5> glyph(char c) noexcept;
  /// FNV-1a of the glyph table; pinned in tests.
  static std::uint64_t table_digest() noexcept;
};

int text_width(std::string_view text, int scale) noexcept;
int text_height(int scale) noexcept;
void draw_text(Image& image, int x, int y, std::string_view text, Rgb color, int scale = 1) noexcept;

// Numeric grid ----------------------------------------------------------------

struct GridParams {
  std::size_t rows_per_column = 50;
  int font_pt = 10;  // glyph scale = font_pt / 5 (10pt draws 2x)
  int max_width = 2000;
  int max_height = 8000;
  enum class Overflow { split, fail } overflow = Overflow::split;
};

struct GridCell {
  std::size_t t = 0;
  std::size_t series = 0;  // 0-based series position; the T column is not a cell
  std::size_t block = 0;
  std::size_t row = 0;
  std::string text;
  Rect box;  // on the block's page
};

struct GridBlock {
  std::size_t first = 0;  // first time index
  std::size_t rows = 0;
  std::size_t page = 0;
  Rect box;
};

struct GridLayout {
  std::size_t n_points = 0;
  std::size_t n_series = 0;
  std::size_t rows_per_column = 50;
  std::size_t n_columns = 0;
  std::vector<std::string> headers;  // "T", "Series-1", ...
  std::vector<GridBlock> blocks;
  std::vector<GridCell> cells;  // ordered by (t, series)
  std::vector<std::pair<int, int>> pages;  // page sizes in px
  int font_pt = 10;
  int scale = 2;
  int index_width = 0;
  int value_width = 0;
  int row_height = 0;
  std::string precision_rule = "5 decimals below 100 in magnitude, else 3";

  const GridCell& cell(std::size_t t, std::size_t series) const { return cells.at(t * n_series + series); }
};

GridLayout layout_grid(std::span<const Series> series, const GridParams& params = {});
/// One image per page, in page order.
std::vector<Image> render_grid(const GridLayout& layout);
std::string grid_sidecar_json(const GridLayout& layout);
/// Reads the cells back in reading order, one value list per series.
std::vector<std::vector<double>> parse_grid_cells(const GridLayout& layout);

// Line plots -------------------------------------------------------------------

struct PlotStyle {
  int width = 900;
  int height = 450;
  int thickness = 2;
  bool legend = true;  // drawn for two or more series
};

struct PlotMeta {
  Rect area;  // data rectangle
  double y_lo = 0.0, y_hi = 0.0;
  std::vector<double> y_ticks;
  std::vector<std::size_t> x_ticks;
  std::vector<std::string> legend;
  std::vector<Rgb> colors;
};

struct Plot {
  Image image;
  PlotMeta meta;
};

/// Colors cycle through a fixed ten-color palette.
Rgb series_color(std::size_t i) noexcept;

/// Tick step of 1, 2 or 5 x 10^k giving about `target` intervals.
double nice_step(double span, int target) noexcept;
/// Axis range padded so constant data still spans a band, snapped outward to ticks.
std::pair<double, double> axis_range(double lo, double hi, int target_ticks = 6);

Plot render_plot(std::span<const Series> series, const PlotStyle& style = {});

struct PanelMeta {
  std::array<Rect, 4> subplots;   // A, B, C, D
  std::array<int, 4> boundary_x;  // image x of the context/candidate boundary
  double y_lo = 0.0, y_hi = 0.0;
};

struct Panel {
  Image image;
  PanelMeta meta;
};

/// 2x2 subplots A B / C D; context blue, candidate red, one shared y-scale.
Panel render_successor_panel(std::span<const double> context, std::span<const std::vector<double>> candidates,
                             const PlotStyle& style = {});

std::string plot_sidecar_json(const PlotMeta& meta);
std::string panel_sidecar_json(const PanelMeta& meta);

/// Writes bytes unless the file already holds identical bytes. Returns true if written.
bool write_if_changed(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
bool write_if_changed(const std::filesystem::path& path, std::string_view text);

}  // namespace tsbench::render
