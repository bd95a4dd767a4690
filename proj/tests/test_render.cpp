#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "fixtures.hpp"
#include "tsbench/error.hpp"
#include "tsbench/render.hpp"
#include "tsbench/synth.hpp"

using namespace tsbench;
using namespace tsbench::render;
using tsbench::testing::make_series;

namespace {

Series wave(std::size_t n, double scale = 1.0, std::string id = "w") {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = scale * std::sin(0.17 * static_cast<double>(i)) + 0.001 * static_cast<double>(i);
  return make_series(std::move(id), v);
}

bool overlaps(const Rect& a, const Rect& b) {
  return a.x < b.x + b.w && b.x < a.x + a.w && a.y < b.y + b.h && b.y < a.y + a.h;
}

std::size_t count_color(const Image& img, const Rect& r, Rgb c) {
  std::size_t n = 0;
  for (int y = r.y; y < r.y + r.h; ++y) {
    for (int x = r.x; x < r.x + r.w; ++x) n += img.at(x, y) == c;
  }
  return n;
}

}  // namespace

TEST_CASE("120 points split into blocks of 50, 50 and 20") {
  const std::vector<Series> s{wave(120)};
  const auto g = layout_grid(s);
  REQUIRE(g.blocks.size() == 3);
  CHECK(g.blocks[0].rows == 50);
  CHECK(g.blocks[1].rows == 50);
  CHECK(g.blocks[2].rows == 20);
  CHECK(g.blocks[1].first == 50);
  CHECK(g.headers == std::vector<std::string>{"T", "Series-1"});
  CHECK(g.cells.size() == 120);
}

TEST_CASE("short series fit one block") {
  const std::vector<Series> s{wave(12), wave(12, 2.0, "v")};
  const auto g = layout_grid(s);
  REQUIRE(g.blocks.size() == 1);
  CHECK(g.blocks[0].rows == 12);
  CHECK(g.headers.size() == 3);
  CHECK(g.cell(11, 1).series == 1);
  CHECK(g.cell(11, 1).t == 11);
}

TEST_CASE("grid cells read back to printed values") {
  for (std::size_t n : {64, 96, 128, 256, 512, 720, 1024}) {
    const std::vector<Series> s{wave(n, 150.0), wave(n, 0.5, "v")};
    const auto g = layout_grid(s);
    const auto back = parse_grid_cells(g);
    REQUIRE(back.size() == 2);
    for (std::size_t k = 0; k < 2; ++k) {
      REQUIRE(back[k].size() == n);
      for (std::size_t t = 0; t < n; ++t) CHECK(back[k][t] == printed(s[k].values[t]));
    }
    CHECK(g.cell(0, 0).text == format_value(s[0].values[0]));
  }
}

TEST_CASE("cell boxes stay on their page and never overlap") {
  const std::vector<Series> s{wave(300), wave(300, 3.0, "b"), wave(300, 250.0, "c")};
  const auto g = layout_grid(s);
  const auto pages = render_grid(g);
  REQUIRE(pages.size() == g.pages.size());
  for (std::size_t p = 0; p < pages.size(); ++p) {
    CHECK(pages[p].width() == g.pages[p].first);
    CHECK(pages[p].height() == g.pages[p].second);
    CHECK(pages[p].width() <= 2000);
  }
  for (std::size_t i = 0; i < g.cells.size(); ++i) {
    const auto& c = g.cells[i];
    const auto& block = g.blocks.at(c.block);
    const Rect page{0, 0, g.pages.at(block.page).first, g.pages.at(block.page).second};
    REQUIRE(page.contains(c.box));
    REQUIRE(block.box.contains(c.box));
    if (i + 1 < g.cells.size() && g.cells[i + 1].block == c.block) CHECK_FALSE(overlaps(c.box, g.cells[i + 1].box));
    // Something is drawn inside every cell.
    CHECK(count_color(pages[block.page], c.box, kWhite) < static_cast<std::size_t>(c.box.w * c.box.h));
  }
}

TEST_CASE("oversized grids fail when splitting is off") {
  GridParams p;
  p.max_height = 200;
  p.overflow = GridParams::Overflow::fail;
  const std::vector<Series> s{wave(600)};
  CHECK_THROWS_AS(layout_grid(s, p), Error);
}

TEST_CASE("grid sidecar lists every cell") {
  const std::vector<Series> s{wave(60)};
  const auto g = layout_grid(s);
  const auto doc = nlohmann::json::parse(grid_sidecar_json(g));
  CHECK(doc.dump().find(g.precision_rule) != std::string::npos);
  CHECK(doc.dump().find(g.cell(59, 0).text) != std::string::npos);
}

TEST_CASE("renders are byte-identical across calls") {
  const std::vector<Series> s{synth::synthesize(synth::sample_spec(11, 720)).series};
  CHECK(encode_png(render_plot(s).image) == encode_png(render_plot(s).image));
  const auto g = layout_grid(s);
  const auto a = render_grid(g), b = render_grid(g);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(encode_png(a[i]) == encode_png(b[i]));
}

TEST_CASE("png header and size") {
  Image img(7, 3, kRed);
  const auto png = encode_png(img);
  REQUIRE(png.size() > 33);
  CHECK(std::equal(png.begin(), png.begin() + 8, std::vector<std::uint8_t>{0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a}.begin()));
  // IHDR width and height, big-endian.
  CHECK(png[19] == 7);
  CHECK(png[23] == 3);
}

TEST_CASE("axis covers the data and ticks sit inside it") {
  std::vector<double> v(200, 20.0);
  v[77] = 25.114;
  v[150] = 18.2;
  const std::vector<Series> s{make_series("p", v)};
  const auto plot = render_plot(s);
  CHECK(plot.meta.y_hi >= 25.114);
  CHECK(plot.meta.y_lo <= 18.2);
  REQUIRE(plot.meta.y_ticks.size() >= 2);
  CHECK(plot.meta.y_ticks.back() >= 25.114);
  for (double t : plot.meta.y_ticks) {
    CHECK(t >= plot.meta.y_lo - 1e-9);
    CHECK(t <= plot.meta.y_hi + 1e-9);
  }
  CHECK(plot.meta.x_ticks.back() <= 199);
  CHECK(Rect{0, 0, 900, 450}.contains(plot.meta.area));
}

TEST_CASE("nice steps") {
  CHECK(nice_step(10.0, 5) == Catch::Approx(2.0));
  CHECK(nice_step(1.0, 6) == Catch::Approx(0.2));
  CHECK(nice_step(700.0, 6) == Catch::Approx(200.0));  // rounds up to the next nice step
  CHECK(nice_step(500.0, 6) == Catch::Approx(100.0));
  const auto [lo, hi] = axis_range(3.0, 3.0);
  CHECK(lo < 3.0);
  CHECK(hi > 3.0);
}

TEST_CASE("constant series draws a flat line") {
  const std::vector<Series> s{make_series("c", std::vector<double>(100, 4.0))};
  const auto plot = render_plot(s);
  CHECK(plot.meta.y_lo < 4.0);
  CHECK(plot.meta.y_hi > 4.0);
  // All line pixels share a narrow band of rows.
  int top = plot.image.height(), bottom = -1;
  const auto& a = plot.meta.area;
  for (int y = a.y; y < a.y + a.h; ++y) {
    for (int x = a.x; x < a.x + a.w; ++x) {
      if (plot.image.at(x, y) == series_color(0)) {
        top = std::min(top, y);
        bottom = std::max(bottom, y);
      }
    }
  }
  REQUIRE(bottom >= 0);
  CHECK(bottom - top <= 3);
}

TEST_CASE("legend appears for several series only") {
  const std::vector<Series> one{wave(50)};
  CHECK(render_plot(one).meta.legend.empty());
  const std::vector<Series> three{wave(50), wave(50, 2.0, "b"), wave(50, 3.0, "c")};
  const auto plot = render_plot(three);
  CHECK(plot.meta.legend == std::vector<std::string>{"Series-1", "Series-2", "Series-3"});
  CHECK(plot.meta.colors.size() == 3);
  CHECK(plot.meta.colors[0] != plot.meta.colors[1]);
}

TEST_CASE("successor panel marks the context boundary in each subplot") {
  std::vector<double> ctx(96);
  for (std::size_t i = 0; i < ctx.size(); ++i) ctx[i] = std::sin(0.2 * static_cast<double>(i));
  std::vector<std::vector<double>> cands(4, std::vector<double>(24));
  for (std::size_t k = 0; k < 4; ++k) {
    for (std::size_t i = 0; i < 24; ++i) cands[k][i] = 0.3 * static_cast<double>(k) + 0.01 * static_cast<double>(i);
  }
  const auto panel = render_successor_panel(ctx, cands);
  for (std::size_t k = 0; k < 4; ++k) {
    const auto& r = panel.meta.subplots[k];
    CHECK(Rect{0, 0, panel.image.width(), panel.image.height()}.contains(r));
    CHECK(panel.meta.boundary_x[k] > r.x);
    CHECK(panel.meta.boundary_x[k] < r.x + r.w);
    // Context pixels left of the boundary, candidate pixels right of it.
    const Rect left{r.x, r.y, panel.meta.boundary_x[k] - r.x, r.h};
    const Rect right{panel.meta.boundary_x[k] + 2, r.y, r.x + r.w - panel.meta.boundary_x[k] - 2, r.h};
    CHECK(count_color(panel.image, left, kBlue) > 0);
    CHECK(count_color(panel.image, right, kRed) > 0);
    CHECK(count_color(panel.image, right, kBlue) == 0);
  }
  CHECK(panel.meta.y_hi >= 0.9 + 0.23);
  CHECK(panel.meta.y_lo <= -0.99);
}

TEST_CASE("font table is pinned") {
  CHECK(Font::table_digest() == 0x54fb9bf5fe2e0342ULL);
  // No trailing gap after the last glyph.
  CHECK(text_width("abc", 2) == (3 * Font::kAdvance - 1) * 2);
  CHECK(Font::glyph('\x01') == Font::glyph('?'));
  Image img(40, 20);
  draw_text(img, 1, 1, "8", kBlack, 2);
  CHECK(count_color(img, Rect{0, 0, 40, 20}, kBlack) > 10);
}

TEST_CASE("write_if_changed skips identical bytes") {
  const auto dir = tsbench::testing::scratch_dir("render_write");
  CHECK(write_if_changed(dir / "a.txt", std::string_view("one")));
  CHECK_FALSE(write_if_changed(dir / "a.txt", std::string_view("one")));
  CHECK(write_if_changed(dir / "a.txt", std::string_view("two")));
  CHECK(tsbench::testing::read_file(dir / "a.txt") == "two");
}
