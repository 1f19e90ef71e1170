#pragma once

// Pixel-grid value types and the connectivity primitives every stage shares.
// Coordinates are top-left origin, x to the right, y downward; storage is
// row-major.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fissure/error.hpp"

namespace fissure {

struct PixelCoord {
    int x = 0;
    int y = 0;

    friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

/// Raster order: row first, then column. This is the tie-break order used
/// wherever a deterministic choice between pixels is needed.
struct RasterLess {
    bool operator()(const PixelCoord& a, const PixelCoord& b) const noexcept {
        return a.y != b.y ? a.y < b.y : a.x < b.x;
    }
};

inline double distance(PixelCoord a, PixelCoord b) noexcept {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return std::sqrt(dx * dx + dy * dy);
}

/// Dense row-major grid. `Tag` keeps semantically different grids (a
/// grayscale image and a heatmap, say) from being mixed up at compile time.
template <class T, class Tag>
class Grid {
public:
    using value_type = T;

    Grid() = default;

    Grid(int width, int height, T fill = T{}) : width_(width), height_(height) {
        if (width <= 0 || height <= 0) {
            throw Error(ErrorCode::ZeroDimension,
                        "grid dimensions must be positive, got " + std::to_string(width) + "x" +
                            std::to_string(height));
        }
        data_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
    }

    Grid(int width, int height, std::vector<T> data) : width_(width), height_(height), data_(std::move(data)) {
        if (width <= 0 || height <= 0) {
            throw Error(ErrorCode::ZeroDimension, "grid dimensions must be positive");
        }
        if (data_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
            throw Error(ErrorCode::FormatMismatch, "grid data length does not match dimensions");
        }
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    bool contains(int x, int y) const noexcept { return x >= 0 && y >= 0 && x < width_ && y < height_; }
    bool contains(PixelCoord p) const noexcept { return contains(p.x, p.y); }

    T operator()(int x, int y) const noexcept { return data_[index(x, y)]; }
    T& operator()(int x, int y) noexcept { return data_[index(x, y)]; }
    T operator()(PixelCoord p) const noexcept { return (*this)(p.x, p.y); }
    T& operator()(PixelCoord p) noexcept { return (*this)(p.x, p.y); }

    T at(int x, int y) const {
        if (!contains(x, y)) {
            throw Error(ErrorCode::OutOfBounds, "pixel (" + std::to_string(x) + "," + std::to_string(y) +
                                                    ") outside " + std::to_string(width_) + "x" +
                                                    std::to_string(height_) + " grid");
        }
        return (*this)(x, y);
    }

    /// Value at (x, y), or `outside` when the coordinate is off-grid.
    T get_or(int x, int y, T outside) const noexcept { return contains(x, y) ? (*this)(x, y) : outside; }

    std::span<const T> data() const noexcept { return data_; }
    std::span<T> data() noexcept { return data_; }

    bool same_shape(int w, int h) const noexcept { return width_ == w && height_ == h; }
    template <class U, class OtherTag>
    bool same_shape(const Grid<U, OtherTag>& other) const noexcept {
        return width_ == other.width() && height_ == other.height();
    }

    friend bool operator==(const Grid&, const Grid&) = default;

private:
    std::size_t index(int x, int y) const noexcept {
        return static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) + static_cast<std::size_t>(x);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<T> data_;
};

struct GrayTag {};
struct HeatmapTag {};
struct MaskTag {};
struct LabelTag {};

/// Intensity image normalized to [0, 1].
using GrayImage = Grid<float, GrayTag>;
/// Junction heatmap or probability map, values in [0, 1].
using Heatmap = Grid<float, HeatmapTag>;
/// Foreground mask; every sample is 0 or 1.
using BinaryMask = Grid<std::uint8_t, MaskTag>;

template <class G>
void require_same_shape(const G& a, const auto& b, const char* what) {
    if (!a.same_shape(b)) {
        throw Error(ErrorCode::DimensionMismatch,
                    std::string(what) + ": " + std::to_string(a.width()) + "x" + std::to_string(a.height()) +
                        " vs " + std::to_string(b.width()) + "x" + std::to_string(b.height()));
    }
}

/// Throws FormatMismatch unless every value lies in [0, 1].
template <class Tag>
void require_unit_range(const Grid<float, Tag>& g, const char* what) {
    for (float v : g.data()) {
        if (!(v >= 0.0f && v <= 1.0f)) {
            throw Error(ErrorCode::FormatMismatch, std::string(what) + ": value " + std::to_string(v) +
                                                       " outside [0,1]");
        }
    }
}

inline std::size_t foreground_count(const BinaryMask& m) noexcept {
    return static_cast<std::size_t>(std::count_if(m.data().begin(), m.data().end(), [](auto v) { return v != 0; }));
}

inline std::vector<PixelCoord> foreground_pixels(const BinaryMask& m) {
    std::vector<PixelCoord> out;
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
            if (m(x, y)) out.push_back({x, y});
        }
    }
    return out;
}

// Neighbor offsets in counter-clockwise order starting east (image y points
// down, so "north" is dy = -1). Even indices are the 4-neighbors.
inline constexpr std::array<std::pair<int, int>, 8> kRing8 = {{
    {1, 0}, {1, -1}, {0, -1}, {-1, -1}, {-1, 0}, {-1, 1}, {0, 1}, {1, 1},
}};

inline constexpr std::array<std::pair<int, int>, 4> kRing4 = {{{1, 0}, {0, -1}, {-1, 0}, {0, 1}}};

/// The 8 neighbors of (x, y) packed into a byte, bit k set when the neighbor
/// at kRing8[k] is foreground. Off-grid neighbors read as background.
inline std::uint8_t neighborhood_bits(const BinaryMask& m, int x, int y) noexcept {
    std::uint8_t bits = 0;
    for (std::size_t k = 0; k < 8; ++k) {
        if (m.get_or(x + kRing8[k].first, y + kRing8[k].second, 0)) bits |= static_cast<std::uint8_t>(1u << k);
    }
    return bits;
}

/// Number of set pixels among the 8 neighbors of p.
inline int neighbor_count(const BinaryMask& m, PixelCoord p) {
    if (!m.contains(p)) {
        throw Error(ErrorCode::OutOfBounds,
                    "neighbor_count at (" + std::to_string(p.x) + "," + std::to_string(p.y) + ")");
    }
    return std::popcount(neighborhood_bits(m, p.x, p.y));
}

struct Components {
    /// 0 = background, 1..count = component id, numbered in raster order of
    /// each component's first pixel.
    Grid<int, LabelTag> labels;
    int count = 0;
};

/// Connected-component labeling with 4- or 8-connectivity.
inline Components connected_components(const BinaryMask& mask, int connectivity = 8) {
    if (connectivity != 4 && connectivity != 8) {
        throw Error(ErrorCode::ParamOutOfRange, "connectivity must be 4 or 8");
    }
    Components out;
    if (mask.empty()) return out;
    out.labels = Grid<int, LabelTag>(mask.width(), mask.height(), 0);
    std::vector<PixelCoord> stack;
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (!mask(x, y) || out.labels(x, y) != 0) continue;
            const int id = ++out.count;
            out.labels(x, y) = id;
            stack.push_back({x, y});
            while (!stack.empty()) {
                const PixelCoord p = stack.back();
                stack.pop_back();
                for (std::size_t k = 0; k < 8; k += (connectivity == 4 ? 2 : 1)) {
                    const int nx = p.x + kRing8[k].first;
                    const int ny = p.y + kRing8[k].second;
                    if (mask.get_or(nx, ny, 0) && out.labels(nx, ny) == 0) {
                        out.labels(nx, ny) = id;
                        stack.push_back({nx, ny});
                    }
                }
            }
        }
    }
    return out;
}

inline int component_count(const BinaryMask& mask, int connectivity = 8) {
    return connected_components(mask, connectivity).count;
}

namespace detail {

// Center-of-cell source index for nearest-neighbor sampling:
// floor((i + 0.5) * src / dst), computed in integers.
inline int nearest_source_index(int i, int src, int dst) noexcept {
    const long long num = (2LL * i + 1) * src;
    const int s = static_cast<int>(num / (2LL * dst));
    return std::clamp(s, 0, src - 1);
}

inline void require_positive(int w, int h) {
    if (w <= 0 || h <= 0) {
        throw Error(ErrorCode::ZeroDimension, "target size " + std::to_string(w) + "x" + std::to_string(h));
    }
}

}  // namespace detail

/// Nearest-neighbor resize with center-of-cell mapping. Output only contains
/// values present in the input.
template <class T, class Tag>
Grid<T, Tag> resize_nearest(const Grid<T, Tag>& src, int w, int h) {
    detail::require_positive(w, h);
    if (src.same_shape(w, h)) return src;
    Grid<T, Tag> out(w, h);
    for (int y = 0; y < h; ++y) {
        const int sy = detail::nearest_source_index(y, src.height(), h);
        for (int x = 0; x < w; ++x) {
            out(x, y) = src(detail::nearest_source_index(x, src.width(), w), sy);
        }
    }
    return out;
}

/// Bilinear sample at continuous pixel-center coordinates, clamped to the
/// grid edge.
template <class Tag>
float sample_bilinear(const Grid<float, Tag>& src, double sx, double sy) noexcept {
    sx = std::clamp(sx, 0.0, static_cast<double>(src.width() - 1));
    sy = std::clamp(sy, 0.0, static_cast<double>(src.height() - 1));
    const int x0 = static_cast<int>(std::floor(sx));
    const int y0 = static_cast<int>(std::floor(sy));
    const int x1 = std::min(x0 + 1, src.width() - 1);
    const int y1 = std::min(y0 + 1, src.height() - 1);
    const double fx = sx - x0;
    const double fy = sy - y0;
    const double top = src(x0, y0) * (1.0 - fx) + src(x1, y0) * fx;
    const double bottom = src(x0, y1) * (1.0 - fx) + src(x1, y1) * fx;
    return static_cast<float>(top * (1.0 - fy) + bottom * fy);
}

/// Bilinear resize with center-of-cell mapping ((i + 0.5) * src / dst - 0.5).
/// Each output is a convex combination of inputs, so the value range can only
/// shrink.
template <class Tag>
Grid<float, Tag> resize_bilinear(const Grid<float, Tag>& src, int w, int h) {
    detail::require_positive(w, h);
    if (src.same_shape(w, h)) return src;
    Grid<float, Tag> out(w, h);
    const double scale_x = static_cast<double>(src.width()) / w;
    const double scale_y = static_cast<double>(src.height()) / h;
    for (int y = 0; y < h; ++y) {
        const double sy = (y + 0.5) * scale_y - 0.5;
        for (int x = 0; x < w; ++x) {
            out(x, y) = sample_bilinear(src, (x + 0.5) * scale_x - 0.5, sy);
        }
    }
    return out;
}

template <class T, class Tag>
Grid<T, Tag> flip_horizontal(const Grid<T, Tag>& g) {
    Grid<T, Tag> out(g.width(), g.height());
    for (int y = 0; y < g.height(); ++y)
        for (int x = 0; x < g.width(); ++x) out(g.width() - 1 - x, y) = g(x, y);
    return out;
}

template <class T, class Tag>
Grid<T, Tag> flip_vertical(const Grid<T, Tag>& g) {
    Grid<T, Tag> out(g.width(), g.height());
    for (int y = 0; y < g.height(); ++y)
        for (int x = 0; x < g.width(); ++x) out(x, g.height() - 1 - y) = g(x, y);
    return out;
}

/// Rotate by `quarter_turns` x 90 degrees counter-clockwise as seen on screen.
template <class T, class Tag>
Grid<T, Tag> rotate_quarter(const Grid<T, Tag>& g, int quarter_turns) {
    const int q = ((quarter_turns % 4) + 4) % 4;
    if (q == 0) return g;
    const int w = g.width();
    const int h = g.height();
    Grid<T, Tag> out = (q == 2) ? Grid<T, Tag>(w, h) : Grid<T, Tag>(h, w);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            switch (q) {
            case 1: out(y, w - 1 - x) = g(x, y); break;
            case 2: out(w - 1 - x, h - 1 - y) = g(x, y); break;
            default: out(h - 1 - y, x) = g(x, y); break;
            }
        }
    }
    return out;
}

/// 3x3 binary dilation.
inline BinaryMask dilate3x3(const BinaryMask& m) {
    BinaryMask out(m.width(), m.height(), 0);
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
            if (!m(x, y)) continue;
            for (int dy = -1; dy <= 1; ++dy)
                for (int dx = -1; dx <= 1; ++dx)
                    if (out.contains(x + dx, y + dy)) out(x + dx, y + dy) = 1;
        }
    }
    return out;
}

}  // namespace fissure
