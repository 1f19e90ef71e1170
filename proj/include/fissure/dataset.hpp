#pragma once

// Annotation building, preprocessing, synchronized augmentation and the
// synthetic shape generator with analytic ground truth.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fissure/descriptors.hpp"
#include "fissure/junction.hpp"
#include "fissure/raster.hpp"
#include "fissure/skeleton.hpp"

namespace fissure {

/// Seeded 64-bit generator. Distribution conversions are written out here
/// rather than taken from <random> so that sequences match across standard
/// library implementations.
class Rng {
public:
    static constexpr std::string_view kAlgorithm = "mt19937_64";

    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [lo, hi].
    int uniform_int(int lo, int hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(static_cast<std::int64_t>(hi) - lo) + 1;
        return lo + static_cast<int>(engine_() % span);
    }

    /// Standard normal via Box-Muller; the second variate is discarded.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::mt19937_64 engine_;
};

/// Per-sample seed so corpus output does not depend on scheduling.
constexpr std::uint64_t sample_seed(std::uint64_t seed, std::uint64_t index) noexcept { return seed ^ index; }

// ---------------------------------------------------------------------------
// Digital paths and brushing

/// 8-connected Bresenham segment, both ends included.
inline std::vector<PixelCoord> digital_segment(PixelCoord a, PixelCoord b) {
    std::vector<PixelCoord> out;
    int x0 = a.x, y0 = a.y;
    const int dx = std::abs(b.x - x0), dy = -std::abs(b.y - y0);
    const int sx = x0 < b.x ? 1 : -1, sy = y0 < b.y ? 1 : -1;
    int err = dx + dy;
    while (true) {
        out.push_back({x0, y0});
        if (x0 == b.x && y0 == b.y) break;
        const int e2 = 2 * err;
        if (e2 >= dy) {
            err += dy;
            x0 += sx;
        }
        if (e2 <= dx) {
            err += dx;
            y0 += sy;
        }
    }
    return out;
}

/// Joins waypoints with digital segments, dropping repeated joints.
inline std::vector<PixelCoord> digital_polyline(const std::vector<PixelCoord>& waypoints) {
    std::vector<PixelCoord> out;
    for (std::size_t i = 0; i + 1 < waypoints.size(); ++i) {
        auto seg = digital_segment(waypoints[i], waypoints[i + 1]);
        out.insert(out.end(), seg.begin() + (out.empty() ? 0 : 1), seg.end());
    }
    if (out.empty() && !waypoints.empty()) out.push_back(waypoints.front());
    return out;
}

/// Lattice length of a pixel path: 1 per orthogonal step, sqrt(2) per diagonal.
inline LatticeLength path_steps(const std::vector<PixelCoord>& path) {
    LatticeLength len;
    for (std::size_t i = 1; i < path.size(); ++i) len += detail::step_between(path[i - 1], path[i]);
    return len;
}

/// One centerline stroke. Free ends taper to a single pixel so thinning
/// keeps the tip; joined ends keep full width.
struct Stroke {
    std::vector<PixelCoord> path;
    bool free_start = true;
    bool free_end = true;
    bool closed = false;
};

namespace detail {

inline void stamp_disc(BinaryMask& m, PixelCoord c, int r) {
    for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx)
            if (dx * dx + dy * dy <= r * r && m.contains(c.x + dx, c.y + dy)) m(c.x + dx, c.y + dy) = 1;
}

inline bool disc_inside(const BinaryMask& m, PixelCoord c, int r) {
    return c.x - r >= 1 && c.y - r >= 1 && c.x + r <= m.width() - 2 && c.y + r <= m.height() - 2;
}

}  // namespace detail

/// Sets every background pixel not 4-connected to the canvas border.
inline void fill_holes(BinaryMask& m) {
    BinaryMask background(m.width(), m.height(), 0);
    for (std::size_t i = 0; i < m.size(); ++i) background.data()[i] = m.data()[i] ? 0 : 1;
    const Components c = connected_components(background, 4);
    std::vector<bool> touches(static_cast<std::size_t>(c.count) + 1, false);
    for (int x = 0; x < m.width(); ++x) {
        touches[static_cast<std::size_t>(c.labels(x, 0))] = true;
        touches[static_cast<std::size_t>(c.labels(x, m.height() - 1))] = true;
    }
    for (int y = 0; y < m.height(); ++y) {
        touches[static_cast<std::size_t>(c.labels(0, y))] = true;
        touches[static_cast<std::size_t>(c.labels(m.width() - 1, y))] = true;
    }
    for (std::size_t i = 0; i < m.size(); ++i) {
        const int l = c.labels.data()[i];
        if (l > 0 && !touches[static_cast<std::size_t>(l)]) m.data()[i] = 1;
    }
}

/// Paints strokes of the given odd thickness. Returns false if any disc
/// would reach the outermost pixel ring.
inline bool brush_strokes(BinaryMask& m, const std::vector<Stroke>& strokes, int thickness) {
    const int k = (thickness - 1) / 2;
    bool inside = true;
    for (const Stroke& s : strokes) {
        const int n = static_cast<int>(s.path.size());
        for (int i = 0; i < n; ++i) {
            constexpr int kFar = 1 << 20;
            int d = kFar;
            if (!s.closed) {
                if (s.free_start) d = std::min(d, i);
                if (s.free_end) d = std::min(d, n - 1 - i);
            }
            // Keep every disc two pixels (Chebyshev) clear of the tip so the
            // tip pixel has a single neighbor and survives thinning.
            const int r = std::min({k, d / 2, std::max(0, d - 2)});
            inside = inside && detail::disc_inside(m, s.path[static_cast<std::size_t>(i)], r);
            detail::stamp_disc(m, s.path[static_cast<std::size_t>(i)], r);
        }
    }
    return inside;
}

// ---------------------------------------------------------------------------
// Synthetic shapes

enum class ShapeKind { Line, Diagonal, L, Plus, T, Y, Cross, Grid, Sine, Loop };

inline constexpr std::array<ShapeKind, 10> kShapeKinds = {ShapeKind::Line, ShapeKind::Diagonal, ShapeKind::L,
                                                         ShapeKind::Plus, ShapeKind::T,        ShapeKind::Y,
                                                         ShapeKind::Cross, ShapeKind::Grid,    ShapeKind::Sine,
                                                         ShapeKind::Loop};

constexpr std::string_view to_string(ShapeKind k) noexcept {
    switch (k) {
    case ShapeKind::Line: return "line";
    case ShapeKind::Diagonal: return "diagonal";
    case ShapeKind::L: return "L";
    case ShapeKind::Plus: return "plus";
    case ShapeKind::T: return "T";
    case ShapeKind::Y: return "Y";
    case ShapeKind::Cross: return "cross";
    case ShapeKind::Grid: return "grid";
    case ShapeKind::Sine: return "sine";
    case ShapeKind::Loop: return "loop";
    }
    return "line";
}

inline ShapeKind shape_kind_from_string(std::string_view s) {
    for (ShapeKind k : kShapeKinds)
        if (to_string(k) == s) return k;
    throw Error(ErrorCode::ParamOutOfRange, "unknown shape kind '" + std::string(s) + "'");
}

struct SynthParams {
    int width = 128;
    int height = 128;
    int thickness = 3;       ///< odd, >= 1
    int size = 40;           ///< line length / arm length / radius, in pixels
    double angle_deg = 0.0;  ///< rotation for the non-lattice kinds; line accepts 0 or 90
    int grid_lines = 3;      ///< lines per direction for the grid kind
    int grid_spacing = 20;
    double amplitude = 8.0;  ///< sine
    double period = 60.0;    ///< sine
};

/// Expected descriptor values known from the construction. Optional fields
/// are left empty when the value is not asserted.
struct GroundTruth {
    std::string kind;
    bool exact = false;  ///< lattice-aligned: the thinned skeleton equals the construction
    double length_px = 0.0;
    std::size_t junction_count = 0;
    std::size_t junction_count_max = 0;  ///< upper bound when thinning may split a junction
    TopologyClass topology_class = TopologyClass::Linear;
    int components = 1;
    int cycles = 0;
    std::optional<double> orientation_deg;
    std::optional<double> tortuosity;
    bool isotropic = false;   ///< orientation must be reported absent
    bool pure_cycle = false;  ///< tortuosity must be reported absent
    std::vector<PixelCoord> junctions;
    std::vector<PixelCoord> centerline;  ///< construction pixels, sorted in raster order
};

struct SynthShape {
    BinaryMask mask;
    GroundTruth truth;
};

namespace detail {

inline PixelCoord polar_point(double cx, double cy, double r, double deg) {
    const double a = deg * std::numbers::pi / 180.0;
    // Screen y grows downward, so a counter-clockwise angle subtracts from y.
    return {static_cast<int>(std::lround(cx + r * std::cos(a))), static_cast<int>(std::lround(cy - r * std::sin(a)))};
}

/// Principal axis from floating-point moments; an oracle independent of the
/// integer implementation in the descriptors module.
inline std::optional<double> moment_angle(const std::vector<PixelCoord>& pts) {
    double mx = 0.0, my = 0.0;
    for (const auto& p : pts) {
        mx += p.x;
        my += p.y;
    }
    mx /= static_cast<double>(pts.size());
    my /= static_cast<double>(pts.size());
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (const auto& p : pts) {
        const double dx = p.x - mx;
        const double dy = my - p.y;  // y up
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (std::abs(sxx - syy) < 1e-9 && std::abs(sxy) < 1e-9) return std::nullopt;
    double deg = 0.5 * std::atan2(2.0 * sxy, sxx - syy) * 180.0 / std::numbers::pi;
    if (deg < 0.0) deg += 180.0;
    if (deg >= 180.0) deg -= 180.0;
    return deg;
}

inline std::vector<PixelCoord> union_pixels(const std::vector<Stroke>& strokes) {
    std::vector<PixelCoord> all;
    for (const auto& s : strokes) all.insert(all.end(), s.path.begin(), s.path.end());
    std::sort(all.begin(), all.end(), RasterLess{});
    all.erase(std::unique(all.begin(), all.end()), all.end());
    return all;
}

/// Midpoint circle, traversed once around, 8-connected and minimal.
inline std::vector<PixelCoord> digital_circle(int cx, int cy, int r) {
    std::vector<PixelCoord> octant;
    int x = r, y = 0, err = 1 - r;
    while (x >= y) {
        octant.push_back({x, y});
        ++y;
        if (err < 0) {
            err += 2 * y + 1;
        } else {
            --x;
            err += 2 * (y - x) + 1;
        }
    }
    // Build the first quadrant (angle 0..90 in y-up terms) then mirror.
    std::vector<PixelCoord> quad = octant;
    for (auto it = octant.rbegin(); it != octant.rend(); ++it) {
        const PixelCoord p{it->y, it->x};
        if (!(p == quad.back())) quad.push_back(p);
    }
    std::vector<PixelCoord> ring;
    auto add = [&](int dx, int dy) {
        const PixelCoord p{cx + dx, cy - dy};
        if (ring.empty() || !(ring.back() == p)) ring.push_back(p);
    };
    for (const auto& p : quad) add(p.x, p.y);
    for (auto it = quad.rbegin(); it != quad.rend(); ++it) add(-it->x, it->y);
    for (const auto& p : quad) add(-p.x, -p.y);
    for (auto it = quad.rbegin(); it != quad.rend(); ++it) add(it->x, -it->y);
    if (ring.size() > 1 && ring.front() == ring.back()) ring.pop_back();
    return ring;
}

/// Geodesic path length and Euclidean distance between every endpoint pair
/// of a tree given as arms radiating from one hub; returns the tortuosity of
/// the farthest pair (ties to the raster-smallest pair).
inline double star_tortuosity(const std::vector<std::pair<PixelCoord, double>>& arms) {
    struct Cand {
        double len;
        PixelCoord a, b;
    };
    std::optional<Cand> best;
    for (std::size_t i = 0; i < arms.size(); ++i) {
        for (std::size_t j = i + 1; j < arms.size(); ++j) {
            PixelCoord a = arms[i].first, b = arms[j].first;
            if (RasterLess{}(b, a)) std::swap(a, b);
            const double len = arms[i].second + arms[j].second;
            const bool better = !best || len > best->len + 1e-9 ||
                                (std::abs(len - best->len) <= 1e-9 &&
                                 (RasterLess{}(a, best->a) || (a == best->a && RasterLess{}(b, best->b))));
            if (better) best = Cand{len, a, b};
        }
    }
    return best->len / distance(best->a, best->b);
}

}  // namespace detail

/// Rasterizes a synthetic crack and records its expected descriptors.
///
/// Lattice-aligned kinds (line at 0/90, diagonal at 45/135, plus, grid, and
/// L/T at thickness 3) are built in the form thinning converges to, so their
/// ground truth is exact. Rotated and curved kinds carry the lattice length of
/// their digital centerline and hold to within a small tolerance.
inline SynthShape synth_shape(ShapeKind kind, const SynthParams& p) {
    if (p.width < 8 || p.height < 8) throw Error(ErrorCode::ParamOutOfRange, "canvas must be at least 8x8");
    if (p.thickness < 1 || p.thickness % 2 == 0) throw Error(ErrorCode::ParamOutOfRange, "thickness must be odd and >= 1");
    if (p.size < 4) throw Error(ErrorCode::ParamOutOfRange, "size must be >= 4");
    if (!std::isfinite(p.angle_deg)) throw Error(ErrorCode::ParamOutOfRange, "angle must be finite");

    const int cx = p.width / 2;
    const int cy = p.height / 2;
    const double fcx = cx, fcy = cy;
    const int a = p.size;
    std::vector<Stroke> strokes;
    std::vector<PixelCoord> centerline;  // when it differs from the stroke paths
    GroundTruth gt;
    gt.kind = std::string(to_string(kind));

    auto endpoint_tortuosity = [](const std::vector<PixelCoord>& path, double len) {
        return len / distance(path.front(), path.back());
    };

    switch (kind) {
    case ShapeKind::Line: {
        const bool vertical = std::abs(p.angle_deg - 90.0) < 1e-12;
        if (!vertical && std::abs(p.angle_deg) > 1e-12) {
            throw Error(ErrorCode::ParamOutOfRange, "line angle must be 0 or 90 (use diagonal for others)");
        }
        const int h0 = -(a - 1) / 2;
        const PixelCoord s = vertical ? PixelCoord{cx, cy - h0} : PixelCoord{cx + h0, cy};
        const PixelCoord e = vertical ? PixelCoord{cx, cy - h0 - (a - 1)} : PixelCoord{cx + h0 + a - 1, cy};
        strokes.push_back({digital_segment(s, e)});
        gt.exact = true;
        gt.length_px = a - 1;
        gt.orientation_deg = vertical ? 90.0 : 0.0;
        gt.tortuosity = 1.0;
        break;
    }
    case ShapeKind::Diagonal: {
        const double half = a / 2.0;
        const PixelCoord s = detail::polar_point(fcx, fcy, half, p.angle_deg + 180.0);
        const PixelCoord e = detail::polar_point(fcx, fcy, half, p.angle_deg);
        strokes.push_back({digital_segment(s, e)});
        const double len = path_steps(strokes[0].path).value();
        const double m = std::fmod(std::fmod(p.angle_deg, 180.0) + 180.0, 180.0);
        gt.exact = std::abs(m - 45.0) < 1e-12 || std::abs(m - 135.0) < 1e-12;
        gt.length_px = len;
        gt.orientation_deg = std::atan2(static_cast<double>(s.y - e.y), static_cast<double>(e.x - s.x)) * 180.0 / std::numbers::pi;
        if (*gt.orientation_deg < 0.0) *gt.orientation_deg += 180.0;
        if (*gt.orientation_deg >= 180.0) *gt.orientation_deg -= 180.0;
        gt.tortuosity = endpoint_tortuosity(strokes[0].path, len);
        break;
    }
    case ShapeKind::L: {
        // Corner at the center; arms run left and up. The mask keeps the full
        // corner while the expected centerline cuts it with one diagonal step,
        // which is where thinning settles.
        const int b = std::max(4, (a * 2) / 3);
        const PixelCoord left{cx - a, cy};
        const PixelCoord top{cx, cy - b};
        auto path = digital_segment(left, {cx, cy});
        const auto up = digital_segment({cx, cy - 1}, top);
        path.insert(path.end(), up.begin(), up.end());
        strokes.push_back({std::move(path)});
        centerline = digital_segment(left, {cx - 1, cy});
        const auto up_cut = digital_segment({cx, cy - 1}, top);
        centerline.insert(centerline.end(), up_cut.begin(), up_cut.end());
        gt.exact = p.thickness == 3;
        gt.length_px = (a - 1) + (b - 1) + std::numbers::sqrt2;
        gt.tortuosity = gt.length_px / distance(left, top);
        break;
    }
    case ShapeKind::Plus: {
        strokes.push_back({digital_segment({cx - a, cy}, {cx + a, cy})});
        strokes.push_back({digital_segment({cx, cy - a}, {cx, cy + a})});
        gt.exact = true;
        gt.length_px = 4.0 * a;
        gt.junction_count = 1;
        gt.junctions = {{cx, cy}};
        gt.isotropic = true;
        // Every endpoint pair is 2a apart along the skeleton; the tie goes
        // to (top, left), which are a*sqrt(2) apart.
        gt.tortuosity = std::numbers::sqrt2;
        break;
    }
    case ShapeKind::T: {
        // Bar along the top, stem down from its middle. Thinning moves the
        // junction one pixel below the bar; the left arm reaches it through
        // a diagonal and an orthogonal step, the right arm through a diagonal.
        const int s = std::max(6, a / 2);
        const PixelCoord hub{cx, cy + 1};
        auto left = digital_segment({cx - a, cy}, {cx - 2, cy});
        left.push_back({cx - 1, cy + 1});
        left.push_back(hub);
        auto right = digital_segment({cx + 1, cy}, {cx + a, cy});
        right.insert(right.begin(), hub);
        strokes.push_back({std::move(left), true, false});
        strokes.push_back({std::move(right), false, true});
        strokes.push_back({digital_segment(hub, {cx, cy + s}), false, true});
        gt.exact = p.thickness == 3;
        const double arm = (a - 1) + std::numbers::sqrt2;
        gt.length_px = 2.0 * arm + (s - 1);
        gt.junction_count = 1;
        gt.junctions = {hub};
        gt.tortuosity = detail::star_tortuosity(
            {{{cx - a, cy}, arm}, {{cx + a, cy}, arm}, {{cx, cy + s}, static_cast<double>(s - 1)}});
        break;
    }
    case ShapeKind::Y: {
        const double th = p.angle_deg;
        const PixelCoord hub{cx, cy};
        const std::array<std::pair<double, double>, 3> arms = {{{th + 270.0, a}, {th + 55.0, a * 0.9}, {th + 140.0, a * 0.65}}};
        std::vector<std::pair<PixelCoord, double>> ends;
        for (const auto& [deg, r] : arms) {
            const PixelCoord tip = detail::polar_point(fcx, fcy, r, deg);
            strokes.push_back({digital_segment(hub, tip), false, true});
            const double len = path_steps(strokes.back().path).value();
            gt.length_px += len;
            ends.emplace_back(tip, len);
        }
        gt.junction_count = 1;
        gt.junctions = {hub};
        gt.tortuosity = detail::star_tortuosity(ends);
        break;
    }
    case ShapeKind::Cross: {
        const double th = p.angle_deg;
        const std::array<std::pair<double, double>, 2> lines = {{{th, a}, {th + 70.0, a * 0.7}}};
        for (const auto& [deg, r] : lines) {
            const PixelCoord e0 = detail::polar_point(fcx, fcy, r, deg + 180.0);
            const PixelCoord e1 = detail::polar_point(fcx, fcy, r, deg);
            auto first = digital_segment({cx, cy}, e0);
            auto second = digital_segment({cx, cy}, e1);
            const double l0 = path_steps(first).value();
            const double l1 = path_steps(second).value();
            std::reverse(first.begin(), first.end());
            first.insert(first.end(), second.begin() + 1, second.end());
            strokes.push_back({std::move(first)});
            gt.length_px += l0 + l1;
        }
        // An oblique crossing of two thick lines may thin into two nearby
        // three-way junctions; that also bends the geodesic, so tortuosity
        // is not asserted.
        gt.junction_count = 1;
        gt.junction_count_max = 2;
        gt.junctions = {{cx, cy}};
        break;
    }
    case ShapeKind::Grid: {
        const int n = p.grid_lines;
        const int g = p.grid_spacing;
        if (n < 2 || g < 6) throw Error(ErrorCode::ParamOutOfRange, "grid needs >= 2 lines at spacing >= 6");
        const int overhang = std::max(4, g / 2);
        const int span = (n - 1) * g;
        const int x0 = cx - span / 2;
        const int y0 = cy - span / 2;
        for (int i = 0; i < n; ++i) {
            strokes.push_back({digital_segment({x0 - overhang, y0 + i * g}, {x0 + span + overhang, y0 + i * g})});
            strokes.push_back({digital_segment({x0 + i * g, y0 - overhang}, {x0 + i * g, y0 + span + overhang})});
            for (int j = 0; j < n; ++j) gt.junctions.push_back({x0 + j * g, y0 + i * g});
        }
        gt.exact = true;
        gt.length_px = 2.0 * n * (span + 2 * overhang);
        gt.junction_count = static_cast<std::size_t>(n) * n;
        gt.cycles = (n - 1) * (n - 1);
        gt.isotropic = true;
        break;
    }
    case ShapeKind::Sine: {
        const double th = p.angle_deg * std::numbers::pi / 180.0;
        const int half = a;
        std::vector<PixelCoord> way;
        for (int i = -half; i <= half; ++i) {
            const double u = i;
            const double v = p.amplitude * std::sin(2.0 * std::numbers::pi * (u + half) / p.period);
            const double x = fcx + u * std::cos(th) + v * std::sin(th);
            const double y = fcy - (u * std::sin(th) - v * std::cos(th));
            const PixelCoord q{static_cast<int>(std::lround(x)), static_cast<int>(std::lround(y))};
            if (way.empty() || !(way.back() == q)) way.push_back(q);
        }
        strokes.push_back({digital_polyline(way)});
        // Remove 4-connected corners so the path is 8-minimal.
        auto& path = strokes.back().path;
        std::vector<PixelCoord> minimal;
        for (const auto& q : path) {
            while (minimal.size() >= 2) {
                const PixelCoord o = minimal[minimal.size() - 2];
                if (std::abs(o.x - q.x) <= 1 && std::abs(o.y - q.y) <= 1) {
                    minimal.pop_back();
                } else {
                    break;
                }
            }
            minimal.push_back(q);
        }
        path = std::move(minimal);
        const double len = path_steps(path).value();
        gt.length_px = len;
        gt.tortuosity = endpoint_tortuosity(path, len);
        break;
    }
    case ShapeKind::Loop: {
        Stroke ring{detail::digital_circle(cx, cy, a)};
        ring.closed = true;
        ring.free_start = ring.free_end = false;
        auto closed = ring.path;
        closed.push_back(closed.front());
        gt.length_px = path_steps(closed).value();
        gt.cycles = 1;
        gt.pure_cycle = true;
        strokes.push_back(std::move(ring));
        break;
    }
    }

    BinaryMask mask(p.width, p.height, 0);
    if (!brush_strokes(mask, strokes, p.thickness)) {
        throw Error(ErrorCode::ParamOutOfRange, gt.kind + " of size " + std::to_string(p.size) + " does not fit a " +
                                                    std::to_string(p.width) + "x" + std::to_string(p.height) + " canvas");
    }
    if (kind != ShapeKind::Loop && kind != ShapeKind::Grid) fill_holes(mask);
    if (centerline.empty()) {
        gt.centerline = detail::union_pixels(strokes);
    } else {
        gt.centerline = detail::union_pixels({Stroke{std::move(centerline)}});
    }
    gt.junction_count_max = std::max(gt.junction_count_max, gt.junction_count);
    gt.topology_class = classify_topology(gt.junction_count);
    if (!gt.isotropic && !gt.orientation_deg && kind != ShapeKind::Loop) {
        gt.orientation_deg = detail::moment_angle(gt.centerline);
    }
    return SynthShape{std::move(mask), std::move(gt)};
}

/// Draws random shape parameters for corpus generation. Lattice kinds keep
/// their exact alignment; the rest get a random rotation.
inline SynthParams random_synth_params(ShapeKind kind, Rng& rng, int canvas = 160) {
    SynthParams p;
    p.width = p.height = canvas;
    p.thickness = 3;
    const int reach = canvas / 2 - 8;
    switch (kind) {
    case ShapeKind::Line:
        p.size = rng.uniform_int(canvas / 3, canvas - 20);
        p.angle_deg = rng.uniform_int(0, 1) ? 90.0 : 0.0;
        p.thickness = rng.uniform_int(0, 1) ? 5 : 3;
        break;
    case ShapeKind::Diagonal:
        p.size = rng.uniform_int(reach, 2 * reach - 20);
        p.angle_deg = rng.uniform(0.0, 180.0);
        break;
    case ShapeKind::L:
    case ShapeKind::T:
        p.size = rng.uniform_int(reach / 2, reach - 4);
        break;
    case ShapeKind::Plus:
        p.size = rng.uniform_int(reach / 2, reach - 4);
        p.thickness = rng.uniform_int(0, 1) ? 5 : 3;
        break;
    case ShapeKind::Y:
    case ShapeKind::Cross:
        p.size = rng.uniform_int(reach * 2 / 3, reach - 4);
        p.angle_deg = rng.uniform(0.0, 360.0);
        break;
    case ShapeKind::Grid:
        p.grid_lines = 3;
        p.grid_spacing = rng.uniform_int(18, (canvas - 24) / 3);
        p.size = 4;
        break;
    case ShapeKind::Sine:
        p.size = rng.uniform_int(reach * 2 / 3, reach - 16);
        p.amplitude = rng.uniform(4.0, 10.0);
        p.period = rng.uniform(40.0, 80.0);
        p.angle_deg = rng.uniform(0.0, 180.0);
        break;
    case ShapeKind::Loop:
        p.size = rng.uniform_int(reach / 2, reach - 4);
        break;
    }
    return p;
}

/// Grayscale rendering of a mask: dark crack on a lighter, lightly noisy
/// background.
inline GrayImage render_crack_image(const BinaryMask& mask, Rng& rng) {
    GrayImage img(mask.width(), mask.height(), 0.0f);
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            const double base = mask(x, y) ? 0.2 : 0.75;
            img(x, y) = static_cast<float>(std::clamp(base + rng.uniform(-0.05, 0.05), 0.0, 1.0));
        }
    }
    return img;
}

// ---------------------------------------------------------------------------
// Annotation layers

struct ExtendedLayers {
    Skeleton skeleton;
    JunctionSet junctions;
    Heatmap heatmap;
    TopologyClass topology_class = TopologyClass::Linear;
};

/// Skeleton, junction heatmap and topology label derived from a mask.
inline ExtendedLayers extend_sample(const GrayImage& image, const BinaryMask& mask, const HeatmapSpec& spec = {},
                                    double prune_len = kDefaultPruneLength) {
    require_same_shape(image, mask, "extend_sample image vs mask");
    ExtendedLayers out;
    out.skeleton = prune_spurs(thin_mask(mask), prune_len);
    out.junctions = extract_junctions(out.skeleton);
    out.heatmap = make_heatmap(out.junctions, mask.width(), mask.height(), spec);
    out.topology_class = classify_topology(out.junctions.size());
    return out;
}

inline constexpr int kTargetSize = 640;

/// Bilinear resize to the working resolution with values clamped to [0, 1].
inline GrayImage preprocess(const GrayImage& image, int target_w = kTargetSize, int target_h = kTargetSize) {
    GrayImage out = resize_bilinear(image, target_w, target_h);
    for (float& v : out.data()) v = std::clamp(v, 0.0f, 1.0f);
    return out;
}

/// Re-thin a skeleton whose grid was resampled: close one-pixel gaps by a
/// 3x3 dilation, thin, and prune the spurs the dilation introduces.
inline Skeleton rethin(const BinaryMask& resampled, double prune_len = kDefaultPruneLength) {
    return prune_spurs(thin_mask(dilate3x3(resampled)), prune_len);
}

// ---------------------------------------------------------------------------
// Augmentation

struct ElasticSpec {
    int grid_spacing = 64;           ///< pixels between control points
    double displacement_sigma = 10;  ///< standard deviation of control offsets, pixels
    double magnitude = 8;            ///< cap on each control offset, pixels
};

struct AugmentSpec {
    bool hflip = false;
    bool vflip = false;
    double rotation_deg = 0.0;  ///< counter-clockwise on screen, [0, 360)
    std::optional<ElasticSpec> elastic;
    std::uint64_t seed = 0;
    double max_outside_fraction = 0.05;
};

struct AlignedSample {
    GrayImage image;
    BinaryMask mask;
    Skeleton skeleton;
    Heatmap heatmap;
};

struct AugmentResult {
    std::optional<AlignedSample> sample;
    std::string rejection;  ///< why the sample was rejected; empty when accepted
    double outside_fraction = 0.0;
};

namespace detail {

inline void check_aligned(const AlignedSample& s) {
    require_same_shape(s.image, s.mask, "augment image vs mask");
    require_same_shape(s.mask, s.skeleton.grid, "augment mask vs skeleton");
    require_same_shape(s.mask, s.heatmap, "augment mask vs heatmap");
}

template <class F>
AlignedSample map_layers(const AlignedSample& s, F&& f) {
    return {f(s.image), f(s.mask), Skeleton{f(s.skeleton.grid), s.skeleton.thinned}, f(s.heatmap)};
}

/// Dense displacement field from a coarse grid of Gaussian offsets, upsampled
/// bilinearly. Stored as (dx, dy) per pixel.
struct DisplacementField {
    int width = 0;
    int height = 0;
    std::vector<double> dx, dy;

    std::pair<double, double> at(int x, int y) const {
        const std::size_t i = static_cast<std::size_t>(y) * width + x;
        return {dx[i], dy[i]};
    }
};

inline DisplacementField elastic_field(int w, int h, const ElasticSpec& e, Rng& rng) {
    const int gx = (w + e.grid_spacing - 1) / e.grid_spacing + 1;
    const int gy = (h + e.grid_spacing - 1) / e.grid_spacing + 1;
    std::vector<double> cdx(static_cast<std::size_t>(gx) * gy), cdy(cdx.size());
    for (std::size_t i = 0; i < cdx.size(); ++i) {
        cdx[i] = std::clamp(rng.normal() * e.displacement_sigma, -e.magnitude, e.magnitude);
        cdy[i] = std::clamp(rng.normal() * e.displacement_sigma, -e.magnitude, e.magnitude);
    }
    DisplacementField f{w, h, std::vector<double>(static_cast<std::size_t>(w) * h), std::vector<double>(static_cast<std::size_t>(w) * h)};
    for (int y = 0; y < h; ++y) {
        const double v = static_cast<double>(y) / e.grid_spacing;
        const int j = std::min(static_cast<int>(v), gy - 2);
        const double fy = v - j;
        for (int x = 0; x < w; ++x) {
            const double u = static_cast<double>(x) / e.grid_spacing;
            const int i = std::min(static_cast<int>(u), gx - 2);
            const double fx = u - i;
            auto lerp2 = [&](const std::vector<double>& c) {
                const auto at = [&](int ii, int jj) { return c[static_cast<std::size_t>(jj) * gx + ii]; };
                return (at(i, j) * (1 - fx) + at(i + 1, j) * fx) * (1 - fy) + (at(i, j + 1) * (1 - fx) + at(i + 1, j + 1) * fx) * fy;
            };
            const std::size_t k = static_cast<std::size_t>(y) * w + x;
            f.dx[k] = lerp2(cdx);
            f.dy[k] = lerp2(cdy);
        }
    }
    return f;
}

}  // namespace detail

/// Applies one geometric transform to all four layers. Flips and rotations by
/// multiples of 90 degrees are exact pixel permutations. Any other rotation or
/// an elastic warp resamples the image and heatmap bilinearly and the mask and
/// skeleton by nearest neighbor, then re-thins the skeleton. A sample is
/// rejected when more than `max_outside_fraction` of its foreground would be
/// pushed off the canvas.
inline AugmentResult augment_sample(const AlignedSample& in, const AugmentSpec& spec) {
    detail::check_aligned(in);
    if (!(std::isfinite(spec.rotation_deg) && spec.rotation_deg >= 0.0 && spec.rotation_deg < 360.0)) {
        throw Error(ErrorCode::DegenerateTransform, "rotation must be in [0, 360)");
    }
    if (!(spec.max_outside_fraction >= 0.0 && spec.max_outside_fraction <= 1.0)) {
        throw Error(ErrorCode::DegenerateTransform, "rejection fraction must be in [0, 1]");
    }
    if (spec.elastic && (spec.elastic->grid_spacing < 2 || !(spec.elastic->displacement_sigma >= 0.0) ||
                         !(spec.elastic->magnitude >= 0.0))) {
        throw Error(ErrorCode::DegenerateTransform, "elastic parameters out of range");
    }

    AlignedSample s = in;
    if (spec.hflip) s = detail::map_layers(s, [](const auto& g) { return flip_horizontal(g); });
    if (spec.vflip) s = detail::map_layers(s, [](const auto& g) { return flip_vertical(g); });

    const double quarters = spec.rotation_deg / 90.0;
    const bool lattice_rotation = quarters == std::floor(quarters);
    if (lattice_rotation && !spec.elastic) {
        const int q = static_cast<int>(quarters);
        if (q != 0) s = detail::map_layers(s, [q](const auto& g) { return rotate_quarter(g, q); });
        return AugmentResult{std::move(s), {}, 0.0};
    }

    const int w = s.mask.width();
    const int h = s.mask.height();
    const double cxr = (w - 1) / 2.0;
    const double cyr = (h - 1) / 2.0;
    const double rad = spec.rotation_deg * std::numbers::pi / 180.0;
    const double c = std::cos(rad), sn = std::sin(rad);
    Rng rng(spec.seed);
    std::optional<detail::DisplacementField> field;
    if (spec.elastic) field = detail::elastic_field(w, h, *spec.elastic, rng);

    // Output pixel (x, y) pulls from source (sx, sy): undo the elastic offset,
    // then undo the counter-clockwise rotation about the canvas center.
    auto source_of = [&](int x, int y) {
        double px = x, py = y;
        if (field) {
            const auto [dx, dy] = field->at(x, y);
            px += dx;
            py += dy;
        }
        const double rx = px - cxr, ry = py - cyr;
        // Screen rotation CCW by t maps (dx, dy) to (c dx + s dy, -s dx + c dy).
        return std::pair<double, double>{cxr + c * rx - sn * ry, cyr + sn * rx + c * ry};
    };

    // Boundary check: forward-map each foreground pixel center.
    long long fg = 0, outside = 0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (!s.mask(x, y)) continue;
            ++fg;
            const double rx = x - cxr, ry = y - cyr;
            double fx = cxr + c * rx + sn * ry;
            double fy = cyr - sn * rx + c * ry;
            if (field) {
                const int ix = std::clamp(static_cast<int>(std::lround(fx)), 0, w - 1);
                const int iy = std::clamp(static_cast<int>(std::lround(fy)), 0, h - 1);
                const auto [dx, dy] = field->at(ix, iy);
                fx -= dx;
                fy -= dy;
            }
            if (fx < -0.5 || fy < -0.5 || fx > w - 0.5 || fy > h - 0.5) ++outside;
        }
    }
    AugmentResult result;
    result.outside_fraction = fg > 0 ? static_cast<double>(outside) / static_cast<double>(fg) : 0.0;
    if (result.outside_fraction > spec.max_outside_fraction) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "boundary cropping: %.2f%% of foreground leaves the canvas (limit %.2f%%)",
                      100.0 * result.outside_fraction, 100.0 * spec.max_outside_fraction);
        result.rejection = buf;
        return result;
    }

    AlignedSample out{GrayImage(w, h, 0.0f), BinaryMask(w, h, 0), Skeleton{BinaryMask(w, h, 0), false}, Heatmap(w, h, 0.0f)};
    const float background = [&] {
        // Uncovered image area takes the mean of the top and bottom rows.
        double sum = 0.0;
        long long n = 0;
        for (int x = 0; x < w; ++x) {
            sum += s.image(x, 0) + s.image(x, h - 1);
            n += 2;
        }
        return static_cast<float>(sum / static_cast<double>(n));
    }();
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const auto [sx, sy] = source_of(x, y);
            const bool inside = sx > -0.5 && sy > -0.5 && sx < w - 0.5 && sy < h - 0.5;
            if (!inside) {
                out.image(x, y) = background;
                continue;
            }
            out.image(x, y) = sample_bilinear(s.image, sx, sy);
            out.heatmap(x, y) = std::clamp(sample_bilinear(s.heatmap, sx, sy), 0.0f, 1.0f);
            const int nx = std::clamp(static_cast<int>(std::floor(sx + 0.5)), 0, w - 1);
            const int ny = std::clamp(static_cast<int>(std::floor(sy + 0.5)), 0, h - 1);
            out.mask(x, y) = s.mask(nx, ny);
            out.skeleton.grid(x, y) = s.skeleton.grid(nx, ny);
        }
    }
    out.skeleton = rethin(out.skeleton.grid);
    result.sample = std::move(out);
    return result;
}

}  // namespace fissure
