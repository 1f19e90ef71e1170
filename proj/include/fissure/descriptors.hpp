#pragma once

// The six morphology descriptors: length, average width, orientation,
// junction count, tortuosity and topology class.

#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <queue>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "fissure/junction.hpp"
#include "fissure/raster.hpp"
#include "fissure/skeleton.hpp"

namespace fissure {

enum class TopologyClass { Linear, Branched, Complex, Network };

inline constexpr std::array<TopologyClass, 4> kTopologyClasses = {
    TopologyClass::Linear, TopologyClass::Branched, TopologyClass::Complex, TopologyClass::Network};

constexpr std::string_view to_string(TopologyClass c) noexcept {
    switch (c) {
    case TopologyClass::Linear: return "linear";
    case TopologyClass::Branched: return "branched";
    case TopologyClass::Complex: return "complex";
    case TopologyClass::Network: return "network";
    }
    return "linear";
}

inline TopologyClass topology_class_from_string(std::string_view s) {
    for (TopologyClass c : kTopologyClasses)
        if (to_string(c) == s) return c;
    throw Error(ErrorCode::UnknownLabel, "unknown topology class '" + std::string(s) + "'");
}

/// 0 junctions: linear; 1-2: branched; 3-5: complex; more than 5: network.
constexpr TopologyClass classify_topology(std::size_t junction_count) noexcept {
    if (junction_count == 0) return TopologyClass::Linear;
    if (junction_count <= 2) return TopologyClass::Branched;
    if (junction_count <= 5) return TopologyClass::Complex;
    return TopologyClass::Network;
}

inline constexpr double kDefaultScaleMmPerPx = 1.0;

struct MorphologyReport {
    double length = 0.0;     ///< skeleton path length, scaled
    double avg_width = 0.0;  ///< mask area / path length, scaled
    std::optional<double> orientation_deg;
    std::size_t junction_count = 0;
    std::optional<double> tortuosity;
    TopologyClass topology_class = TopologyClass::Linear;
    double scale_mm_per_px = kDefaultScaleMmPerPx;
    int components = 0;
    std::optional<std::pair<PixelCoord, PixelCoord>> endpoints_used;
    /// Why an optional descriptor is absent, keyed by field name.
    std::map<std::string, std::string> notes;
};

/// Total path length of every edge, in scaled units.
inline double crack_length(const SkeletonGraph& graph, double scale = kDefaultScaleMmPerPx) {
    return graph.total_length_px() * scale;
}

/// W_avg = A / L, scaled.
inline double average_width(const BinaryMask& mask, double length_px, double scale = kDefaultScaleMmPerPx) {
    if (!(length_px > 0.0)) throw Error(ErrorCode::ZeroLength, "average width needs a positive skeleton length");
    return static_cast<double>(foreground_count(mask)) / length_px * scale;
}

namespace detail {

inline std::vector<PixelCoord> component_pixels(const BinaryMask& m, int which) {
    const Components c = connected_components(m, 8);
    std::vector<PixelCoord> out;
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x)
            if (c.labels(x, y) == which) out.push_back({x, y});
    return out;
}

inline int largest_component_id(const BinaryMask& m) {
    const Components c = connected_components(m, 8);
    std::vector<long long> size(static_cast<std::size_t>(c.count) + 1, 0);
    for (int v : c.labels.data())
        if (v > 0) ++size[static_cast<std::size_t>(v)];
    int best = 0;
    for (int i = 1; i <= c.count; ++i)
        if (best == 0 || size[static_cast<std::size_t>(i)] > size[static_cast<std::size_t>(best)]) best = i;
    return best;
}

}  // namespace detail

/// Principal-axis angle of a pixel set in degrees, [0, 180), measured
/// counter-clockwise from +x as seen on screen. Moments are accumulated in
/// integers so isotropy is detected exactly.
inline double principal_orientation(std::span<const PixelCoord> pts) {
    if (pts.size() < 2) throw Error(ErrorCode::DegenerateGeometry, "orientation needs at least 2 pixels");
    long long n = 0, sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (const auto& p : pts) {
        ++n;
        sx += p.x;
        sy += p.y;
        sxx += static_cast<long long>(p.x) * p.x;
        syy += static_cast<long long>(p.y) * p.y;
        sxy += static_cast<long long>(p.x) * p.y;
    }
    // n^2-scaled central moments.
    const long long cxx = n * sxx - sx * sx;
    const long long cyy = n * syy - sy * sy;
    const long long cxy = n * sxy - sx * sy;
    if (cxx == cyy && cxy == 0) {
        if (cxx == 0) throw Error(ErrorCode::DegenerateGeometry, "all pixels coincide");
        throw Error(ErrorCode::IsotropicGeometry, "covariance eigenvalues are equal");
    }
    // Screen y points down; flip it so angles read counter-clockwise.
    const double angle = 0.5 * std::atan2(-2.0 * static_cast<double>(cxy), static_cast<double>(cxx - cyy));
    double deg = angle * 180.0 / std::numbers::pi;
    if (deg < 0.0) deg += 180.0;
    if (deg >= 180.0) deg -= 180.0;
    return deg;
}

/// Orientation of the largest skeleton component.
inline double orientation(const Skeleton& skel) {
    if (skel.grid.empty()) throw Error(ErrorCode::DegenerateGeometry, "empty skeleton");
    const int c = detail::largest_component_id(skel.grid);
    if (c == 0) throw Error(ErrorCode::DegenerateGeometry, "empty skeleton");
    const auto pts = detail::component_pixels(skel.grid, c);
    return principal_orientation(pts);
}

struct TortuosityResult {
    double value = 1.0;
    double path_length_px = 0.0;
    double endpoint_distance_px = 0.0;
    PixelCoord a;
    PixelCoord b;
};

/// T = L_path / D_end for the geodesically farthest endpoint pair of the
/// largest component. Pairs with equal geodesic length resolve to the
/// raster-smallest pair.
inline TortuosityResult tortuosity_detail(const SkeletonGraph& graph) {
    const int comp = graph.largest_component();
    if (comp == 0) throw Error(ErrorCode::DegenerateGeometry, "empty skeleton");
    std::vector<int> endpoints;
    for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
        const auto& n = graph.nodes[i];
        if (n.component == comp && n.degree == 1) endpoints.push_back(static_cast<int>(i));
    }
    if (endpoints.empty()) {
        bool has_cycle = false;
        for (const auto& e : graph.edges) has_cycle |= (e.component == comp);
        if (has_cycle) throw Error(ErrorCode::PureCycle, "largest component has no endpoints");
        throw Error(ErrorCode::DegenerateGeometry, "largest component is a single pixel");
    }
    if (endpoints.size() < 2) throw Error(ErrorCode::DegenerateGeometry, "largest component has one endpoint");

    // Node adjacency restricted to the component.
    std::vector<std::vector<std::pair<int, LatticeLength>>> adj(graph.nodes.size());
    for (const auto& e : graph.edges) {
        if (e.component != comp || e.from == e.to) continue;
        adj[static_cast<std::size_t>(e.from)].emplace_back(e.to, e.steps);
        adj[static_cast<std::size_t>(e.to)].emplace_back(e.from, e.steps);
    }
    struct Best {
        LatticeLength len;
        PixelCoord a, b;
        bool set = false;
    } best;
    auto pair_less = [](PixelCoord a1, PixelCoord b1, PixelCoord a2, PixelCoord b2) {
        if (!(a1 == a2)) return RasterLess{}(a1, a2);
        return RasterLess{}(b1, b2);
    };
    for (int src : endpoints) {
        std::vector<std::optional<LatticeLength>> dist(graph.nodes.size());
        using Item = std::pair<LatticeLength, int>;
        auto cmp = [](const Item& l, const Item& r) { return l.first > r.first; };
        std::priority_queue<Item, std::vector<Item>, decltype(cmp)> pq(cmp);
        dist[static_cast<std::size_t>(src)] = LatticeLength{};
        pq.push({LatticeLength{}, src});
        while (!pq.empty()) {
            auto [d, u] = pq.top();
            pq.pop();
            if (*dist[static_cast<std::size_t>(u)] < d) continue;
            for (const auto& [v, w] : adj[static_cast<std::size_t>(u)]) {
                const LatticeLength nd = d + w;
                auto& dv = dist[static_cast<std::size_t>(v)];
                if (!dv || nd < *dv) {
                    dv = nd;
                    pq.push({nd, v});
                }
            }
        }
        for (int dst : endpoints) {
            if (dst <= src || !dist[static_cast<std::size_t>(dst)]) continue;
            PixelCoord a = graph.nodes[static_cast<std::size_t>(src)].pos;
            PixelCoord b = graph.nodes[static_cast<std::size_t>(dst)].pos;
            if (RasterLess{}(b, a)) std::swap(a, b);
            const LatticeLength len = *dist[static_cast<std::size_t>(dst)];
            if (!best.set || len > best.len || (len == best.len && pair_less(a, b, best.a, best.b))) {
                best = {len, a, b, true};
            }
        }
    }
    if (!best.set) throw Error(ErrorCode::DegenerateGeometry, "no connected endpoint pair");
    TortuosityResult r;
    r.path_length_px = best.len.value();
    r.endpoint_distance_px = distance(best.a, best.b);
    r.a = best.a;
    r.b = best.b;
    if (!(r.endpoint_distance_px > 0.0)) throw Error(ErrorCode::DegenerateGeometry, "endpoints coincide");
    r.value = r.path_length_px / r.endpoint_distance_px;
    return r;
}

inline double tortuosity(const SkeletonGraph& graph) { return tortuosity_detail(graph).value; }

/// All descriptors for one sample. Junction count comes from `junctions`, so
/// detected and reference junctions can be mixed freely.
inline MorphologyReport full_report(const BinaryMask& mask, const Skeleton& skel, const JunctionSet& junctions,
                                    double scale = kDefaultScaleMmPerPx) {
    require_same_shape(mask, skel.grid, "full_report mask vs skeleton");
    require_thinned(skel, "full_report");
    if (!(scale > 0.0)) throw Error(ErrorCode::ParamOutOfRange, "scale_mm_per_px must be > 0");
    if (foreground_count(skel.grid) == 0) throw Error(ErrorCode::DegenerateGeometry, "length: empty skeleton");

    const SkeletonGraph graph = build_graph(skel);
    MorphologyReport r;
    r.scale_mm_per_px = scale;
    r.components = graph.components;
    const double length_px = graph.total_length_px();
    r.length = length_px * scale;
    try {
        r.avg_width = average_width(mask, length_px, scale);
    } catch (const Error& e) {
        throw Error(e.code(), std::string("avg_width: ") + e.what());
    }
    try {
        r.orientation_deg = orientation(skel);
    } catch (const Error& e) {
        r.notes["orientation_deg"] = std::string(to_string(e.code()));
    }
    try {
        const TortuosityResult t = tortuosity_detail(graph);
        r.tortuosity = t.value;
        r.endpoints_used = std::make_pair(t.a, t.b);
    } catch (const Error& e) {
        r.notes["tortuosity"] = std::string(to_string(e.code()));
    }
    r.junction_count = junctions.size();
    r.topology_class = classify_topology(r.junction_count);
    return r;
}

}  // namespace fissure
