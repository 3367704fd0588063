#include "malgrid/byteplot.hpp"

#include "malgrid/common.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <utility>

namespace malgrid::byteplot {

int width_for_size(std::uint64_t size_bytes) {
    constexpr std::uint64_t KiB = 1024;
    // Half-open [lo, hi) bands keyed by their upper bound.
    static constexpr std::array<std::pair<std::uint64_t, int>, 7> table{{
        {10 * KiB, 32},
        {30 * KiB, 64},
        {60 * KiB, 128},
        {100 * KiB, 256},
        {200 * KiB, 384},
        {500 * KiB, 512},
        {1000 * KiB, 768},
    }};
    for (const auto& [upper, width] : table)
        if (size_bytes < upper) return width;
    return 1024;
}

ByteplotImage to_byteplot(std::span<const std::uint8_t> bytes) {
    if (bytes.empty()) throw Error("empty binary");
    ByteplotImage img;
    img.width = width_for_size(bytes.size());
    img.height = static_cast<int>((bytes.size() + img.width - 1) / img.width);
    img.pixels.assign(static_cast<std::size_t>(img.width) * img.height, 0);
    std::copy(bytes.begin(), bytes.end(), img.pixels.begin());
    return img;
}

std::vector<std::uint8_t> resample_bilinear(std::span<const std::uint8_t> src, int src_w, int src_h,
                                            int dst_w, int dst_h) {
    if (src_w <= 0 || src_h <= 0 || dst_w <= 0 || dst_h <= 0) throw Error("resample: empty raster");
    std::vector<std::uint8_t> dst(static_cast<std::size_t>(dst_w) * dst_h);
    const double sx = static_cast<double>(src_w) / dst_w;
    const double sy = static_cast<double>(src_h) / dst_h;

    struct Tap {
        int lo, hi;
        double frac;
    };
    auto taps = [](int n_dst, int n_src, double scale) {
        std::vector<Tap> out(n_dst);
        for (int i = 0; i < n_dst; ++i) {
            double pos = (i + 0.5) * scale - 0.5;
            pos = std::clamp(pos, 0.0, static_cast<double>(n_src - 1));
            const int lo = static_cast<int>(std::floor(pos));
            const int hi = std::min(lo + 1, n_src - 1);
            out[i] = {lo, hi, pos - lo};
        }
        return out;
    };
    const auto xs = taps(dst_w, src_w, sx);
    const auto ys = taps(dst_h, src_h, sy);

    for (int y = 0; y < dst_h; ++y) {
        const auto& ty = ys[y];
        const auto* r0 = src.data() + static_cast<std::size_t>(ty.lo) * src_w;
        const auto* r1 = src.data() + static_cast<std::size_t>(ty.hi) * src_w;
        for (int x = 0; x < dst_w; ++x) {
            const auto& tx = xs[x];
            const double top = r0[tx.lo] + tx.frac * (r0[tx.hi] - r0[tx.lo]);
            const double bottom = r1[tx.lo] + tx.frac * (r1[tx.hi] - r1[tx.lo]);
            const double v = top + ty.frac * (bottom - top);
            dst[static_cast<std::size_t>(y) * dst_w + x] =
                static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
        }
    }
    return dst;
}

Thumbnail to_thumbnail(const ByteplotImage& img, int side) {
    if (side < 8) throw Error("thumbnail side must be at least 8");
    if (img.width <= 0 || img.height <= 0) throw Error("thumbnail of an empty image");
    return {side, resample_bilinear(img.pixels, img.width, img.height, side, side)};
}

png::Raster to_raster(const ByteplotImage& img) { return {img.width, img.height, 1, img.pixels}; }

png::Raster to_raster(const Thumbnail& thumb) { return {thumb.side, thumb.side, 1, thumb.pixels}; }

ByteplotImage from_raster(const png::Raster& raster) {
    if (raster.channels != 1) throw Error("byteplot raster must be grayscale");
    return {raster.width, raster.height, raster.pixels};
}

Thumbnail thumbnail_from_raster(const png::Raster& raster) {
    if (raster.channels != 1 || raster.width != raster.height)
        throw Error("thumbnail raster must be square grayscale");
    return {raster.width, raster.pixels};
}

}  // namespace malgrid::byteplot
