#pragma once

#include "malgrid/util.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace malgrid::png {

/// Decoded 8-bit raster; channels is 1 (gray) or 3 (RGB), row-major interleaved.
struct Raster {
    int width = 0;
    int height = 0;
    int channels = 1;
    std::vector<std::uint8_t> pixels;
};

std::vector<std::uint8_t> encode(const Raster& raster);
/// Decodes any PNG, converting to 8-bit gray (channels=1) or 8-bit RGB (channels=3).
Raster decode(std::span<const std::uint8_t> bytes, int channels);

void write(const fs::path& path, const Raster& raster);
Raster read(const fs::path& path, int channels);

struct Header {
    int width = 0;
    int height = 0;
};
/// Reads only the IHDR dimensions.
Header read_header(std::span<const std::uint8_t> bytes);

}  // namespace malgrid::png
