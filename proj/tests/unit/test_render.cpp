#include "malgrid/common.hpp"
#include "malgrid/render.hpp"

#include "../support.hpp"

#include <doctest.h>

#include <regex>
#include <set>

using namespace malgrid;
using namespace malgrid::render;
using corpus::Label;

namespace {

reduce::Embedding2D points(int n, std::uint64_t seed) {
    Rng rng(seed);
    reduce::Embedding2D emb;
    emb.coords.resize(n, 2);
    for (int i = 0; i < n; ++i) {
        emb.coords(i, 0) = rng.normal();
        emb.coords(i, 1) = rng.normal();
        emb.sample_ids.push_back("id" + std::to_string(i));
    }
    return emb;
}

std::set<std::string> circle_fills(const std::string& svg) {
    std::set<std::string> fills;
    const std::regex re("<circle[^>]*fill=\"(#[0-9a-f]{6})\"");
    for (auto it = std::sregex_iterator(svg.begin(), svg.end(), re); it != std::sregex_iterator(); ++it)
        fills.insert((*it)[1].str());
    return fills;
}

std::size_t count_circles(const std::string& svg) {
    std::size_t count = 0;
    for (std::size_t pos = svg.find("<circle"); pos != std::string::npos; pos = svg.find("<circle", pos + 1)) ++count;
    return count;
}

std::array<std::uint8_t, 3> pixel(const png::Raster& r, int row, int col) {
    const std::size_t k = (static_cast<std::size_t>(row) * r.width + col) * 3;
    return {r.pixels[k], r.pixels[k + 1], r.pixels[k + 2]};
}

byteplot::Thumbnail gradient_thumb(int side, int offset) {
    byteplot::Thumbnail t{side, std::vector<std::uint8_t>(static_cast<std::size_t>(side) * side)};
    for (int r = 0; r < side; ++r)
        for (int c = 0; c < side; ++c) t.pixels[r * side + c] = static_cast<std::uint8_t>((offset + 7 * r + 3 * c) % 256);
    return t;
}

// 2x2 grid with three samples; cell (1,0) stays empty.
gridmap::GridLayout small_layout() {
    gridmap::GridLayout layout;
    layout.rows = 2;
    layout.cols = 2;
    layout.sample_ids = {"a", "b", "c"};
    layout.cells = {{0, 0}, {0, 1}, {1, 1}};
    layout.empty_cells = {{1, 0}};
    return layout;
}

}  // namespace

TEST_CASE("palette colors are distinct and family order is by name") {
    const auto p = make_palette({"zeta", "alpha", "mid", "alpha"});
    CHECK(p.families == std::vector<std::string>{"alpha", "mid", "zeta"});
    CHECK(p.family_colors.size() >= 25);
    std::set<Rgb> all(p.family_colors.begin(), p.family_colors.end());
    CHECK(all.size() == p.family_colors.size());
    for (const auto& [label, rgb] : p.label_colors) CHECK(all.insert(rgb).second);
    CHECK(p.family_color("alpha") == p.family_colors[0]);
    CHECK(p.family_color("zeta") == p.family_colors[2]);
    CHECK(p.label_color(Label::malware).r > p.label_color(Label::malware).g);
    CHECK(p.label_color(Label::benign).g > p.label_color(Label::benign).r);
    CHECK(make_palette({"b", "a"}).family_colors == make_palette({"a", "b"}).family_colors);
    CHECK(family_color_sequence(60).size() == 60);
}

TEST_CASE("blend formula") {
    CHECK(blend(100, Rgb{200, 0, 50}, 0.0) == Rgb{100, 100, 100});
    CHECK(blend(100, Rgb{200, 0, 50}, 1.0) == Rgb{200, 0, 50});
    CHECK(blend(100, Rgb{200, 0, 50}, 0.25) == Rgb{125, 75, 88});
    CHECK(Rgb{255, 16, 1}.hex() == "#ff1001");
}

TEST_CASE("three labels give three distinct markers") {
    const auto emb = points(3, 1);
    const std::vector<Annotation> ann{{Label::benign, {}}, {Label::malware, {}}, {Label::unknown, {}}};
    const auto svg = plot_points_svg(emb, ann, make_palette({}));
    CHECK(count_circles(svg) == 3);
    CHECK(circle_fills(svg).size() == 3);
    CHECK(svg == plot_points_svg(emb, ann, make_palette({})));
}

TEST_CASE("twenty-five families give twenty-five fills") {
    const auto emb = points(50, 2);
    std::vector<Annotation> ann;
    std::vector<std::string> families;
    for (int i = 0; i < 50; ++i) {
        const auto fam = "fam" + std::to_string(i % 25);
        ann.push_back({Label::malware, fam});
        families.push_back(fam);
    }
    CHECK(color_by_family(ann));
    const auto svg = plot_points_svg(emb, ann, make_palette(families));
    CHECK(circle_fills(svg).size() == 25);
}

TEST_CASE("point plot files") {
    testing::TempDir dir("plot");
    const auto emb = points(10, 3);
    const std::vector<Annotation> ann(10, Annotation{Label::unlabeled, {}});
    plot_points(emb, ann, make_palette({}), dir / "points");
    const auto raster = png::read(dir / "points.png", 3);
    CHECK(raster.width == 900);
    CHECK(raster.height == 700);
    CHECK(read_text(dir / "points.svg").rfind("<svg", 0) != std::string::npos);
    auto bad = emb;
    bad.coords(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(plot_points_svg(bad, ann, make_palette({})), Error);
}

TEST_CASE("montage with zero tint shows the thumbnails") {
    const int side = 16;
    const auto layout = small_layout();
    const auto ta = gradient_thumb(side, 0), tb = gradient_thumb(side, 50), tc = gradient_thumb(side, 100);
    const std::vector<Annotation> ann{{Label::malware, {}}, {Label::benign, {}}, {Label::unknown, {}}};
    MontageOptions opts;
    opts.tint_alpha = 0.0;
    const auto img = montage(layout, {&ta, &tb, &tc}, ann, make_palette({}), opts);
    REQUIRE(img.width == 2 * side);
    REQUIRE(img.height == 2 * side);
    REQUIRE(img.channels == 3);
    for (int r = 0; r < side - 1; ++r)
        for (int c = 0; c < side - 1; ++c) {
            const auto g = tb.pixels[r * side + c];
            CHECK(pixel(img, r, side + c) == std::array<std::uint8_t, 3>{g, g, g});
        }
    CHECK(pixel(img, side - 1, 3) == std::array<std::uint8_t, 3>{0, 0, 0});
    opts.borders = false;
    const auto plain = montage(layout, {&ta, &tb, &tc}, ann, make_palette({}), opts);
    const auto g = tc.pixels[side * side - 1];
    CHECK(pixel(plain, 2 * side - 1, 2 * side - 1) == std::array<std::uint8_t, 3>{g, g, g});
}

TEST_CASE("montage with full tint is flat color, empty cells dark gray") {
    const int side = 12;
    const auto layout = small_layout();
    const auto t = gradient_thumb(side, 9);
    const std::vector<Annotation> ann{{Label::malware, {}}, {Label::benign, {}}, {Label::unknown, {}}};
    const auto palette = make_palette({});
    MontageOptions opts;
    opts.tint_alpha = 1.0;
    const auto img = montage(layout, {&t, &t, &t}, ann, palette, opts);
    const auto as_array = [](Rgb c) { return std::array<std::uint8_t, 3>{c.r, c.g, c.b}; };
    const int mid = side / 2;
    CHECK(pixel(img, mid, mid) == as_array(palette.label_color(Label::malware)));
    CHECK(pixel(img, mid, side + mid) == as_array(palette.label_color(Label::benign)));
    CHECK(pixel(img, side + mid, side + mid) == as_array(palette.label_color(Label::unknown)));
    CHECK(pixel(img, side + mid, mid) == as_array(kEmptyCell));
    for (int r = 0; r < side - 1; ++r)
        for (int c = 0; c < side - 1; ++c) CHECK(pixel(img, r, c) == as_array(palette.label_color(Label::malware)));
}

TEST_CASE("montage blends at cell centers and colors by family when present") {
    const int side = 10;
    const auto layout = small_layout();
    const auto t = gradient_thumb(side, 40);
    const std::vector<Annotation> ann{{Label::malware, "f1"}, {Label::malware, "f2"}, {Label::malware, "f1"}};
    const auto palette = make_palette({"f1", "f2"});
    const auto img = montage(layout, {&t, &t, &t}, ann, palette, {});
    const auto g = t.pixels[5 * side + 5];
    const auto want = blend(g, palette.family_color("f2"), kDefaultTintAlpha);
    CHECK(pixel(img, 5, side + 5) == std::array<std::uint8_t, 3>{want.r, want.g, want.b});
}

TEST_CASE("montage requires every thumbnail") {
    const auto layout = small_layout();
    const auto t = gradient_thumb(8, 0);
    const std::vector<Annotation> ann(3);
    CHECK_THROWS_WITH_AS(montage(layout, {&t, nullptr, &t}, ann, make_palette({}), {}), doctest::Contains("b"), Error);
}
