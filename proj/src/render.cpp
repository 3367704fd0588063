#include "malgrid/render.hpp"

#include "malgrid/common.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

namespace malgrid::render {

std::string Rgb::hex() const {
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
    return buf;
}

Rgb Palette::family_color(std::string_view family) const {
    const auto it = std::lower_bound(families.begin(), families.end(), family);
    if (it == families.end() || *it != family) throw Error("family '" + std::string(family) + "' has no palette color");
    return family_colors[static_cast<std::size_t>(it - families.begin())];
}

namespace {

Rgb hsv(double h, double s, double v) {
    const double c = v * s;
    const double hp = std::fmod(h, 360.0) / 60.0;
    const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
    double r = 0, g = 0, b = 0;
    if (hp < 1) { r = c; g = x; }
    else if (hp < 2) { r = x; g = c; }
    else if (hp < 3) { g = c; b = x; }
    else if (hp < 4) { g = x; b = c; }
    else if (hp < 5) { r = x; b = c; }
    else { r = c; b = x; }
    const double m = v - c;
    auto to8 = [m](double t) { return static_cast<std::uint8_t>(std::lround(255.0 * (t + m))); };
    return {to8(r), to8(g), to8(b)};
}

}  // namespace

std::vector<Rgb> family_color_sequence(std::size_t count) {
    constexpr double golden_angle = 137.50776405003785;
    constexpr std::array<double, 3> values{0.92, 0.72, 0.55};
    std::vector<Rgb> colors;
    std::set<Rgb> seen;
    for (std::size_t i = 0; colors.size() < count; ++i) {
        // Hue cycles fast; value steps down once per 36 hues to keep later colors apart.
        const double v = values[(i / 36) % values.size()];
        const double s = (i / 108) % 2 == 0 ? 0.75 : 0.55;
        const Rgb c = hsv(std::fmod(i * golden_angle, 360.0), s, v);
        if (seen.insert(c).second) colors.push_back(c);
    }
    return colors;
}

Palette make_palette(std::vector<std::string> families) {
    std::sort(families.begin(), families.end());
    families.erase(std::unique(families.begin(), families.end()), families.end());
    Palette p;
    p.label_colors = {{corpus::Label::benign, {0, 170, 0}},
                      {corpus::Label::malware, {220, 0, 0}},
                      {corpus::Label::unknown, {235, 200, 0}},
                      {corpus::Label::unlabeled, {128, 128, 128}}};
    p.family_colors = family_color_sequence(std::max<std::size_t>(25, families.size()));
    p.families = std::move(families);
    return p;
}

bool color_by_family(const std::vector<Annotation>& annotations) {
    return std::any_of(annotations.begin(), annotations.end(), [](const Annotation& a) { return a.family.has_value(); });
}

Rgb color_for(const Annotation& a, const Palette& palette, bool by_family) {
    if (by_family && a.family) return palette.family_color(*a.family);
    return palette.label_color(a.label);
}

Rgb blend(std::uint8_t gray, Rgb color, double alpha) {
    auto mix = [&](std::uint8_t c) {
        return static_cast<std::uint8_t>(std::clamp(std::lround((1.0 - alpha) * gray + alpha * c), 0L, 255L));
    };
    return {mix(color.r), mix(color.g), mix(color.b)};
}

// ---------------------------------------------------------------------------
// Scatter plot

namespace {

constexpr int kMargin = 20;
constexpr int kLegendWidth = 190;
constexpr int kLegendRow = 22;

struct LegendEntry {
    std::string name;
    Rgb color;
};

struct Frame {
    double x0 = 0, y0 = 0, scale = 1;
    double cx = 0, cy = 0;  // plot-area centers
};

Frame fit_frame(const reduce::Matrix& coords, const PlotOptions& o) {
    const double pw = o.width - kLegendWidth - 2.0 * kMargin;
    const double ph = o.height - 2.0 * kMargin;
    const double xmin = coords.col(0).minCoeff(), xmax = coords.col(0).maxCoeff();
    const double ymin = coords.col(1).minCoeff(), ymax = coords.col(1).maxCoeff();
    const double rx = xmax - xmin, ry = ymax - ymin;
    double scale = 1.0;
    if (rx > 0 || ry > 0) scale = std::min(rx > 0 ? pw / rx : INFINITY, ry > 0 ? ph / ry : INFINITY);
    return {0.5 * (xmin + xmax), 0.5 * (ymin + ymax), scale, kMargin + pw / 2.0, kMargin + ph / 2.0};
}

std::pair<double, double> to_pixel(const Frame& f, double x, double y) {
    return {f.cx + (x - f.x0) * f.scale, f.cy - (y - f.y0) * f.scale};
}

std::vector<LegendEntry> legend_entries(const std::vector<Annotation>& annotations, const Palette& palette,
                                        bool by_family) {
    std::vector<LegendEntry> entries;
    if (by_family) {
        std::set<std::string> present;
        bool any_plain = false;
        for (const auto& a : annotations) {
            if (a.family) present.insert(*a.family);
            else any_plain = true;
        }
        for (const auto& f : present) entries.push_back({f, palette.family_color(f)});
        if (any_plain) {
            std::set<corpus::Label> labels;
            for (const auto& a : annotations)
                if (!a.family) labels.insert(a.label);
            for (auto l : labels) entries.push_back({corpus::to_string(l), palette.label_color(l)});
        }
    } else {
        std::set<corpus::Label> labels;
        for (const auto& a : annotations) labels.insert(a.label);
        for (auto l : labels) entries.push_back({corpus::to_string(l), palette.label_color(l)});
    }
    return entries;
}

std::string xml_escape(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string fixed2(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

// 5x7 glyphs, one byte per row, low five bits used.
const std::uint8_t* glyph(char ch) {
    static constexpr std::uint8_t letters[26][7] = {
        {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}, {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E},
        {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}, {0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E},
        {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}, {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10},
        {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}, {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11},
        {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}, {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C},
        {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}, {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F},
        {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}, {0x11, 0x11, 0x19, 0x15, 0x13, 0x11, 0x11},
        {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}, {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10},
        {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}, {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11},
        {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}, {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04},
        {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}, {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04},
        {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}, {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11},
        {0x11, 0x11, 0x11, 0x0A, 0x04, 0x04, 0x04}, {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F},
    };
    static constexpr std::uint8_t digits[10][7] = {
        {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}, {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E},
        {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}, {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E},
        {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}, {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E},
        {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}, {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08},
        {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}, {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C},
    };
    static constexpr std::uint8_t underscore[7] = {0, 0, 0, 0, 0, 0, 0x1F};
    static constexpr std::uint8_t dash[7] = {0, 0, 0, 0x1F, 0, 0, 0};
    static constexpr std::uint8_t dot[7] = {0, 0, 0, 0, 0, 0x0C, 0x0C};
    if (ch >= 'a' && ch <= 'z') return letters[ch - 'a'];
    if (ch >= 'A' && ch <= 'Z') return letters[ch - 'A'];
    if (ch >= '0' && ch <= '9') return digits[ch - '0'];
    if (ch == '_') return underscore;
    if (ch == '-') return dash;
    if (ch == '.') return dot;
    return nullptr;
}

class Canvas {
public:
    Canvas(int w, int h, Rgb fill) : raster_{w, h, 3, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h * 3)} {
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) set(x, y, fill);
    }
    void set(int x, int y, Rgb c) {
        if (x < 0 || y < 0 || x >= raster_.width || y >= raster_.height) return;
        auto* p = raster_.pixels.data() + (static_cast<std::size_t>(y) * raster_.width + x) * 3;
        p[0] = c.r;
        p[1] = c.g;
        p[2] = c.b;
    }
    void disc(double cx, double cy, int r, Rgb c) {
        const int x0 = static_cast<int>(std::lround(cx)), y0 = static_cast<int>(std::lround(cy));
        for (int dy = -r; dy <= r; ++dy)
            for (int dx = -r; dx <= r; ++dx)
                if (dx * dx + dy * dy <= r * r) set(x0 + dx, y0 + dy, c);
    }
    void rect(int x, int y, int w, int h, Rgb c) {
        for (int yy = y; yy < y + h; ++yy)
            for (int xx = x; xx < x + w; ++xx) set(xx, yy, c);
    }
    void text(int x, int y, std::string_view s, Rgb c, int scale) {
        for (char ch : s) {
            if (const auto* g = glyph(ch)) {
                for (int row = 0; row < 7; ++row)
                    for (int col = 0; col < 5; ++col)
                        if (g[row] & (0x10 >> col)) rect(x + col * scale, y + row * scale, scale, scale, c);
            }
            x += 6 * scale;
        }
    }
    png::Raster take() { return std::move(raster_); }

private:
    png::Raster raster_;
};

void check_inputs(const reduce::Embedding2D& emb, const std::vector<Annotation>& annotations) {
    if (static_cast<std::size_t>(emb.coords.rows()) != annotations.size())
        throw Error("plot: one annotation per point is required");
    if (emb.coords.rows() == 0) throw Error("plot: no points");
    if (!emb.coords.allFinite()) throw Error("plot: coordinates must be finite");
}

std::size_t legend_capacity(const PlotOptions& o) {
    return static_cast<std::size_t>(std::max(1, (o.height - 2 * kMargin) / kLegendRow - 1));
}

}  // namespace

std::string plot_points_svg(const reduce::Embedding2D& emb, const std::vector<Annotation>& annotations,
                            const Palette& palette, const PlotOptions& options) {
    check_inputs(emb, annotations);
    const bool by_family = color_by_family(annotations);
    const Frame frame = fit_frame(emb.coords, options);

    std::string svg;
    svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(options.width) + "\" height=\"" +
           std::to_string(options.height) + "\" viewBox=\"0 0 " + std::to_string(options.width) + " " +
           std::to_string(options.height) + "\">\n";
    svg += "<rect x=\"0\" y=\"0\" width=\"" + std::to_string(options.width) + "\" height=\"" +
           std::to_string(options.height) + "\" style=\"fill:#ffffff\"/>\n";
    svg += "<g id=\"points\">\n";
    for (Eigen::Index i = 0; i < emb.coords.rows(); ++i) {
        const auto [px, py] = to_pixel(frame, emb.coords(i, 0), emb.coords(i, 1));
        const Rgb c = color_for(annotations[i], palette, by_family);
        svg += "<circle cx=\"" + fixed2(px) + "\" cy=\"" + fixed2(py) + "\" r=\"" + std::to_string(options.marker_radius) +
               "\" fill=\"" + c.hex() + "\" data-id=\"" + xml_escape(emb.sample_ids[i]) + "\"/>\n";
    }
    svg += "</g>\n<g id=\"legend\" font-family=\"sans-serif\" font-size=\"12\">\n";
    const auto entries = legend_entries(annotations, palette, by_family);
    const int lx = options.width - kLegendWidth + 10;
    const auto shown = std::min(entries.size(), legend_capacity(options));
    for (std::size_t e = 0; e < shown; ++e) {
        const int y = kMargin + static_cast<int>(e) * kLegendRow;
        svg += "<rect x=\"" + std::to_string(lx) + "\" y=\"" + std::to_string(y) +
               "\" width=\"12\" height=\"12\" style=\"fill:" + entries[e].color.hex() + "\"/>\n";
        svg += "<text x=\"" + std::to_string(lx + 18) + "\" y=\"" + std::to_string(y + 11) + "\">" +
               xml_escape(entries[e].name) + "</text>\n";
    }
    if (shown < entries.size())
        svg += "<text x=\"" + std::to_string(lx) + "\" y=\"" + std::to_string(kMargin + static_cast<int>(shown) * kLegendRow + 11) +
               "\">+" + std::to_string(entries.size() - shown) + " more</text>\n";
    svg += "</g>\n</svg>\n";
    return svg;
}

png::Raster plot_points_raster(const reduce::Embedding2D& emb, const std::vector<Annotation>& annotations,
                               const Palette& palette, const PlotOptions& options) {
    check_inputs(emb, annotations);
    const bool by_family = color_by_family(annotations);
    const Frame frame = fit_frame(emb.coords, options);
    Canvas canvas(options.width, options.height, {255, 255, 255});
    for (Eigen::Index i = 0; i < emb.coords.rows(); ++i) {
        const auto [px, py] = to_pixel(frame, emb.coords(i, 0), emb.coords(i, 1));
        canvas.disc(px, py, options.marker_radius, color_for(annotations[i], palette, by_family));
    }
    const auto entries = legend_entries(annotations, palette, by_family);
    const int lx = options.width - kLegendWidth + 10;
    const auto shown = std::min(entries.size(), legend_capacity(options));
    for (std::size_t e = 0; e < shown; ++e) {
        const int y = kMargin + static_cast<int>(e) * kLegendRow;
        canvas.rect(lx, y, 12, 12, entries[e].color);
        canvas.text(lx + 18, y - 1, entries[e].name, {0, 0, 0}, 2);
    }
    if (shown < entries.size())
        canvas.text(lx, kMargin + static_cast<int>(shown) * kLegendRow, std::to_string(entries.size() - shown) + " more",
                    {0, 0, 0}, 2);
    return canvas.take();
}

void plot_points(const reduce::Embedding2D& emb, const std::vector<Annotation>& annotations, const Palette& palette,
                 const fs::path& stem, const PlotOptions& options) {
    write_text(fs::path(stem.string() + ".svg"), plot_points_svg(emb, annotations, palette, options));
    png::write(fs::path(stem.string() + ".png"), plot_points_raster(emb, annotations, palette, options));
}

// ---------------------------------------------------------------------------
// Montage

png::Raster montage(const gridmap::GridLayout& layout, const std::vector<const byteplot::Thumbnail*>& thumbnails,
                    const std::vector<Annotation>& annotations, const Palette& palette, const MontageOptions& options) {
    const std::size_t n = layout.sample_ids.size();
    if (thumbnails.size() != n || annotations.size() != n) throw Error("montage: one thumbnail and annotation per sample");
    if (!(options.tint_alpha >= 0.0 && options.tint_alpha <= 1.0)) throw Error("montage: tint_alpha must lie in [0, 1]");
    int side = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!thumbnails[i]) throw Error("montage: missing thumbnail for sample " + layout.sample_ids[i]);
        if (side == 0) side = thumbnails[i]->side;
        if (thumbnails[i]->side != side) throw Error("montage: thumbnail sizes differ (sample " + layout.sample_ids[i] + ")");
    }
    if (side == 0) throw Error("montage: no thumbnails");

    const int width = layout.cols * side;
    const int height = layout.rows * side;
    png::Raster out{width, height, 3, std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height * 3)};
    auto put = [&](int x, int y, Rgb c) {
        auto* p = out.pixels.data() + (static_cast<std::size_t>(y) * width + x) * 3;
        p[0] = c.r;
        p[1] = c.g;
        p[2] = c.b;
    };
    auto paint_cell = [&](gridmap::Cell cell, auto&& pixel_at) {
        for (int y = 0; y < side; ++y)
            for (int x = 0; x < side; ++x) {
                const bool edge = options.borders && (x == side - 1 || y == side - 1);
                put(cell.col * side + x, cell.row * side + y, edge ? kBorder : pixel_at(y, x));
            }
    };

    for (const auto& cell : layout.empty_cells) paint_cell(cell, [](int, int) { return kEmptyCell; });
    const bool by_family = color_by_family(annotations);
    for (std::size_t i = 0; i < n; ++i) {
        const Rgb tint = color_for(annotations[i], palette, by_family);
        const auto& thumb = *thumbnails[i];
        paint_cell(layout.cells[i], [&](int y, int x) { return blend(thumb.at(y, x), tint, options.tint_alpha); });
    }
    return out;
}

}  // namespace malgrid::render
