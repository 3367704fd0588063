#pragma once

#include "malgrid/byteplot.hpp"
#include "malgrid/corpus.hpp"
#include "malgrid/gridmap.hpp"
#include "malgrid/png.hpp"
#include "malgrid/reduce.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace malgrid::render {

inline constexpr double kDefaultTintAlpha = 0.35;

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
    auto operator<=>(const Rgb&) const = default;
    std::string hex() const;
};

inline constexpr Rgb kEmptyCell{40, 40, 40};
inline constexpr Rgb kBorder{0, 0, 0};

struct Palette {
    std::map<corpus::Label, Rgb> label_colors;
    std::vector<Rgb> family_colors;
    std::vector<std::string> families;  ///< sorted; families[i] gets family_colors[i]

    Rgb label_color(corpus::Label label) const { return label_colors.at(label); }
    Rgb family_color(std::string_view family) const;
};

/// Golden-angle hue stepping at fixed saturation/value.
std::vector<Rgb> family_color_sequence(std::size_t count);

/// Label colors plus one color per distinct family (sorted by name, at least 25 generated).
Palette make_palette(std::vector<std::string> families);

/// Per-sample visual annotation.
struct Annotation {
    corpus::Label label = corpus::Label::unlabeled;
    std::optional<std::string> family;
};

/// Chooses family coloring when any sample carries a family.
bool color_by_family(const std::vector<Annotation>& annotations);
Rgb color_for(const Annotation& a, const Palette& palette, bool by_family);

struct PlotOptions {
    int width = 900;
    int height = 700;
    int marker_radius = 3;
};

/// Scatter plot as SVG text; deterministic for fixed input.
std::string plot_points_svg(const reduce::Embedding2D& emb, const std::vector<Annotation>& annotations,
                            const Palette& palette, const PlotOptions& options = {});
/// Same scatter rasterized to RGB.
png::Raster plot_points_raster(const reduce::Embedding2D& emb, const std::vector<Annotation>& annotations,
                               const Palette& palette, const PlotOptions& options = {});
/// Writes `<stem>.png` and `<stem>.svg`.
void plot_points(const reduce::Embedding2D& emb, const std::vector<Annotation>& annotations, const Palette& palette,
                 const fs::path& stem, const PlotOptions& options = {});

struct MontageOptions {
    double tint_alpha = kDefaultTintAlpha;
    bool borders = true;
};

/// (rows * side) x (cols * side) RGB montage; thumbnails[i] belongs to layout.sample_ids[i].
png::Raster montage(const gridmap::GridLayout& layout, const std::vector<const byteplot::Thumbnail*>& thumbnails,
                    const std::vector<Annotation>& annotations, const Palette& palette,
                    const MontageOptions& options = {});

/// (1 - alpha) * gray + alpha * color per channel, rounded.
Rgb blend(std::uint8_t gray, Rgb color, double alpha);

}  // namespace malgrid::render
