#include "malgrid/png.hpp"

#include "malgrid/common.hpp"

#include <png.h>

#include <cstring>

namespace malgrid::png {
namespace {

void on_error(png_structp, png_const_charp msg) { throw Error(std::string("png: ") + msg); }
void on_warning(png_structp, png_const_charp) {}

struct ReadCursor {
    std::span<const std::uint8_t> data;
    std::size_t offset = 0;
};

void read_from_memory(png_structp ptr, png_bytep out, png_size_t len) {
    auto* cursor = static_cast<ReadCursor*>(png_get_io_ptr(ptr));
    if (cursor->offset + len > cursor->data.size()) png_error(ptr, "truncated stream");
    std::memcpy(out, cursor->data.data() + cursor->offset, len);
    cursor->offset += len;
}

void write_to_memory(png_structp ptr, png_bytep in, png_size_t len) {
    auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(ptr));
    out->insert(out->end(), in, in + len);
}

void flush_noop(png_structp) {}

}  // namespace

std::vector<std::uint8_t> encode(const Raster& raster) {
    if (raster.channels != 1 && raster.channels != 3) throw Error("png: channels must be 1 or 3");
    if (raster.width <= 0 || raster.height <= 0) throw Error("png: empty raster");
    if (raster.pixels.size() !=
        static_cast<std::size_t>(raster.width) * raster.height * raster.channels)
        throw Error("png: pixel buffer size mismatch");

    std::vector<std::uint8_t> out;
    png_structp ptr = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, on_error, on_warning);
    if (!ptr) throw Error("png: cannot create writer");
    png_infop info = png_create_info_struct(ptr);
    try {
        if (!info) throw Error("png: cannot create info");
        png_set_write_fn(ptr, &out, write_to_memory, flush_noop);
        png_set_IHDR(ptr, info, raster.width, raster.height, 8,
                     raster.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                     PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_write_info(ptr, info);
        const std::size_t stride = static_cast<std::size_t>(raster.width) * raster.channels;
        for (int y = 0; y < raster.height; ++y)
            png_write_row(ptr, const_cast<png_bytep>(raster.pixels.data() + y * stride));
        png_write_end(ptr, nullptr);
    } catch (...) {
        png_destroy_write_struct(&ptr, &info);
        throw;
    }
    png_destroy_write_struct(&ptr, &info);
    return out;
}

Raster decode(std::span<const std::uint8_t> bytes, int channels) {
    if (channels != 1 && channels != 3) throw Error("png: channels must be 1 or 3");
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw Error("png: bad signature");

    ReadCursor cursor{bytes, 0};
    png_structp ptr = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, on_error, on_warning);
    if (!ptr) throw Error("png: cannot create reader");
    png_infop info = png_create_info_struct(ptr);
    Raster raster;
    try {
        if (!info) throw Error("png: cannot create info");
        png_set_read_fn(ptr, &cursor, read_from_memory);
        png_read_info(ptr, info);
        const auto color = png_get_color_type(ptr, info);
        const auto depth = png_get_bit_depth(ptr, info);
        if (depth == 16) png_set_strip_16(ptr);
        if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(ptr);
        if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(ptr);
        if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(ptr);
        const bool is_gray = (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA);
        if (channels == 1 && !is_gray) png_set_rgb_to_gray_fixed(ptr, 1, -1, -1);
        if (channels == 3 && is_gray) png_set_gray_to_rgb(ptr);
        png_read_update_info(ptr, info);

        raster.width = static_cast<int>(png_get_image_width(ptr, info));
        raster.height = static_cast<int>(png_get_image_height(ptr, info));
        raster.channels = channels;
        const std::size_t stride = png_get_rowbytes(ptr, info);
        if (stride != static_cast<std::size_t>(raster.width) * channels)
            throw Error("png: unexpected row layout");
        raster.pixels.resize(stride * raster.height);
        std::vector<png_bytep> rows(raster.height);
        for (int y = 0; y < raster.height; ++y) rows[y] = raster.pixels.data() + y * stride;
        png_read_image(ptr, rows.data());
        png_read_end(ptr, nullptr);
    } catch (...) {
        png_destroy_read_struct(&ptr, &info, nullptr);
        throw;
    }
    png_destroy_read_struct(&ptr, &info, nullptr);
    return raster;
}

void write(const fs::path& path, const Raster& raster) { write_file(path, encode(raster)); }

Raster read(const fs::path& path, int channels) { return decode(read_file(path), channels); }

Header read_header(std::span<const std::uint8_t> bytes) {
    // signature(8) + length(4) + "IHDR"(4) + width(4) + height(4)
    if (bytes.size() < 24 || png_sig_cmp(bytes.data(), 0, 8) != 0 ||
        std::memcmp(bytes.data() + 12, "IHDR", 4) != 0)
        throw Error("png: bad header");
    auto be32 = [&](std::size_t at) {
        return static_cast<int>((std::uint32_t{bytes[at]} << 24) | (std::uint32_t{bytes[at + 1]} << 16) |
                                (std::uint32_t{bytes[at + 2]} << 8) | std::uint32_t{bytes[at + 3]});
    };
    return {be32(16), be32(20)};
}

}  // namespace malgrid::png
