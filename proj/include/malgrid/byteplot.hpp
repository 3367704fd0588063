#pragma once

#include "malgrid/png.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace malgrid::byteplot {

inline constexpr int kDefaultThumbSide = 48;

/// One byte per pixel, row-major; only the last row carries zero padding.
struct ByteplotImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;

    std::uint8_t at(int row, int col) const { return pixels[static_cast<std::size_t>(row) * width + col]; }
};

struct Thumbnail {
    int side = 0;
    std::vector<std::uint8_t> pixels;

    std::uint8_t at(int row, int col) const { return pixels[static_cast<std::size_t>(row) * side + col]; }
};

/// Row width for a file of `size_bytes`, from the conventional size table.
int width_for_size(std::uint64_t size_bytes);

ByteplotImage to_byteplot(std::span<const std::uint8_t> bytes);

/// Bilinear resample to side x side (pixel-center aligned, edge-clamped).
Thumbnail to_thumbnail(const ByteplotImage& img, int side = kDefaultThumbSide);

/// Bilinear resample of an arbitrary gray raster; shared by thumbnails and tests.
std::vector<std::uint8_t> resample_bilinear(std::span<const std::uint8_t> src, int src_w, int src_h,
                                            int dst_w, int dst_h);

png::Raster to_raster(const ByteplotImage& img);
png::Raster to_raster(const Thumbnail& thumb);
ByteplotImage from_raster(const png::Raster& raster);
Thumbnail thumbnail_from_raster(const png::Raster& raster);

}  // namespace malgrid::byteplot
