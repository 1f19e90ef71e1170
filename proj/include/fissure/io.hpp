#pragma once

// File formats: 8-bit grayscale PNG for images, masks and skeletons (masks
// stored as 0/255), RGB PNG for overlays, and FGRID for float grids.
//
// FGRID layout: "FG01", u32 width, u32 height, then width*height f32 values,
// all little-endian, row-major.

#include <png.h>

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "fissure/raster.hpp"
#include "fissure/skeleton.hpp"

namespace fissure {

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const noexcept {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] inline void png_fail(png_structp png, png_const_charp msg) {
    // Unwind through libpng's setjmp buffer; the caller reports the error.
    (void)msg;
    png_longjmp(png, 1);
}

struct Gray8 {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> pixels;
};

inline Gray8 read_png_gray8(const std::filesystem::path& path) {
    FilePtr fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) throw Error(ErrorCode::UnreadableFile, "cannot open " + path.string());
    std::array<unsigned char, 8> sig{};
    if (std::fread(sig.data(), 1, sig.size(), fp.get()) != sig.size() || png_sig_cmp(sig.data(), 0, sig.size()) != 0) {
        throw Error(ErrorCode::FormatMismatch, path.string() + " is not a PNG file");
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, nullptr);
    if (!png) throw Error(ErrorCode::UnreadableFile, "libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw Error(ErrorCode::UnreadableFile, "libpng init failed");
    }
    Gray8 out;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw Error(ErrorCode::UnreadableFile, "corrupt PNG data in " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const int depth = png_get_bit_depth(png, info);
    const int color = png_get_color_type(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (depth == 16) png_set_strip_16(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA || color == PNG_COLOR_TYPE_PALETTE) {
        png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    }
    png_read_update_info(png, info);
    out.width = static_cast<int>(w);
    out.height = static_cast<int>(h);
    out.pixels.resize(static_cast<std::size_t>(w) * h);
    rows.resize(h);
    for (png_uint_32 y = 0; y < h; ++y) rows[y] = out.pixels.data() + static_cast<std::size_t>(y) * w;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    if (out.width <= 0 || out.height <= 0) throw Error(ErrorCode::ZeroDimension, path.string() + " has no pixels");
    return out;
}

inline void write_png(const std::filesystem::path& path, int width, int height, int channels,
                      const std::vector<std::uint8_t>& pixels) {
    FilePtr fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) throw Error(ErrorCode::UnreadableFile, "cannot write " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, nullptr);
    if (!png) throw Error(ErrorCode::UnreadableFile, "libpng init failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw Error(ErrorCode::UnreadableFile, "libpng init failed");
    }
    std::vector<png_const_bytep> rows(static_cast<std::size_t>(height));
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw Error(ErrorCode::UnreadableFile, "failed writing " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
                 channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t stride = static_cast<std::size_t>(width) * static_cast<std::size_t>(channels);
    for (int y = 0; y < height; ++y) rows[static_cast<std::size_t>(y)] = pixels.data() + static_cast<std::size_t>(y) * stride;
    png_write_rows(png, const_cast<png_bytepp>(rows.data()), static_cast<png_uint_32>(height));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

inline void put_u32le(std::vector<char>& buf, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

inline std::uint32_t get_u32le(const unsigned char* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::vector<unsigned char> read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::UnreadableFile, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace detail

inline BinaryMask load_mask(const std::filesystem::path& path) {
    const detail::Gray8 g = detail::read_png_gray8(path);
    BinaryMask m(g.width, g.height, 0);
    auto d = m.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = g.pixels[i] >= 128 ? 1 : 0;
    return m;
}

inline GrayImage load_gray(const std::filesystem::path& path) {
    const detail::Gray8 g = detail::read_png_gray8(path);
    GrayImage img(g.width, g.height, 0.0f);
    auto d = img.data();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = static_cast<float>(g.pixels[i]) / 255.0f;
    return img;
}

/// Skeletons loaded from disk are trusted as thin only if they pass the
/// no-2x2-block test.
inline Skeleton load_skeleton(const std::filesystem::path& path) {
    BinaryMask m = load_mask(path);
    const bool thin = is_one_pixel_wide(m);
    return Skeleton{std::move(m), thin};
}

inline void save_mask(const std::filesystem::path& path, const BinaryMask& m) {
    std::vector<std::uint8_t> px(m.size());
    const auto d = m.data();
    for (std::size_t i = 0; i < d.size(); ++i) px[i] = d[i] ? 255 : 0;
    detail::write_png(path, m.width(), m.height(), 1, px);
}

inline void save_gray(const std::filesystem::path& path, const GrayImage& img) {
    std::vector<std::uint8_t> px(img.size());
    const auto d = img.data();
    for (std::size_t i = 0; i < d.size(); ++i) {
        px[i] = static_cast<std::uint8_t>(std::lround(std::clamp(d[i], 0.0f, 1.0f) * 255.0f));
    }
    detail::write_png(path, img.width(), img.height(), 1, px);
}

/// 8-bit visualization of a heatmap, round(v * 255). Lossy; use FGRID for data.
inline void save_heatmap_png(const std::filesystem::path& path, const Heatmap& hm) {
    std::vector<std::uint8_t> px(hm.size());
    const auto d = hm.data();
    for (std::size_t i = 0; i < d.size(); ++i) {
        px[i] = static_cast<std::uint8_t>(std::lround(std::clamp(d[i], 0.0f, 1.0f) * 255.0f));
    }
    detail::write_png(path, hm.width(), hm.height(), 1, px);
}

struct RgbImage {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;  ///< interleaved, row-major

    RgbImage(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0) {}
    void set(int x, int y, std::array<std::uint8_t, 3> c) {
        if (x < 0 || y < 0 || x >= width || y >= height) return;
        const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
        rgb[i] = c[0];
        rgb[i + 1] = c[1];
        rgb[i + 2] = c[2];
    }
};

inline void save_rgb(const std::filesystem::path& path, const RgbImage& img) {
    detail::write_png(path, img.width, img.height, 3, img.rgb);
}

inline void write_fgrid(const std::filesystem::path& path, std::span<const float> values, int width, int height) {
    static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);
    std::vector<char> buf;
    buf.reserve(12 + values.size() * 4);
    buf.insert(buf.end(), {'F', 'G', '0', '1'});
    detail::put_u32le(buf, static_cast<std::uint32_t>(width));
    detail::put_u32le(buf, static_cast<std::uint32_t>(height));
    for (float v : values) detail::put_u32le(buf, std::bit_cast<std::uint32_t>(v));
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::UnreadableFile, "cannot write " + path.string());
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw Error(ErrorCode::UnreadableFile, "failed writing " + path.string());
}

inline void save_heatmap(const std::filesystem::path& path, const Heatmap& hm) {
    write_fgrid(path, hm.data(), hm.width(), hm.height());
}

/// Reads an FGRID file. Values must lie in [0, 1].
inline Heatmap load_heatmap(const std::filesystem::path& path) {
    const auto bytes = detail::read_all(path);
    if (bytes.size() < 12) throw Error(ErrorCode::UnreadableFile, path.string() + ": truncated FGRID header");
    if (std::memcmp(bytes.data(), "FG01", 4) != 0) throw Error(ErrorCode::FormatMismatch, path.string() + ": bad FGRID magic");
    const std::uint32_t w = detail::get_u32le(bytes.data() + 4);
    const std::uint32_t h = detail::get_u32le(bytes.data() + 8);
    if (w == 0 || h == 0) throw Error(ErrorCode::ZeroDimension, path.string() + ": zero FGRID dimension");
    const std::uint64_t n = static_cast<std::uint64_t>(w) * h;
    if (bytes.size() != 12 + n * 4) {
        throw Error(ErrorCode::UnreadableFile, path.string() + ": FGRID payload holds " + std::to_string(bytes.size() - 12) +
                                                   " bytes, expected " + std::to_string(n * 4));
    }
    std::vector<float> values(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < values.size(); ++i) {
        const float v = std::bit_cast<float>(detail::get_u32le(bytes.data() + 12 + i * 4));
        if (!(v >= 0.0f && v <= 1.0f)) {
            throw Error(ErrorCode::FormatMismatch, path.string() + ": value outside [0,1] at index " + std::to_string(i));
        }
        values[i] = v;
    }
    return Heatmap(static_cast<int>(w), static_cast<int>(h), std::move(values));
}

enum class ImageKind { Gray, Mask, Heatmap };

using AnyGrid = std::variant<GrayImage, BinaryMask, Heatmap>;

/// Loads by declared kind: gray and mask from PNG, heatmap from FGRID.
inline AnyGrid load_image(const std::filesystem::path& path, ImageKind kind) {
    switch (kind) {
    case ImageKind::Gray: return load_gray(path);
    case ImageKind::Mask: return load_mask(path);
    case ImageKind::Heatmap: return load_heatmap(path);
    }
    throw Error(ErrorCode::FormatMismatch, "unknown image kind");
}

}  // namespace fissure
