#pragma once

// Centerline extraction and skeleton topology.
//
// Thinning is sequential homotopic peeling: each subiteration collects the
// border pixels facing one direction, then deletes them one at a time while
// they remain 8-simple and are not endpoints. Deleting one simple pixel at a
// time cannot change the number of foreground components or holes, so the
// result keeps the input's topology exactly.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <compare>
#include <vector>

#include "fissure/raster.hpp"

namespace fissure {

/// One-pixel-wide centerline. `thinned` is false for grids that have not been
/// through thinning (for example after a nearest-neighbor resize) and must be
/// re-thinned before graph operations.
struct Skeleton {
    BinaryMask grid;
    bool thinned = false;

    friend bool operator==(const Skeleton&, const Skeleton&) = default;
};

inline void require_thinned(const Skeleton& s, const char* what) {
    if (!s.thinned) throw Error(ErrorCode::NotThinned, std::string(what) + " requires a thinned skeleton");
}

/// Nearest-neighbor resize of a skeleton. The result is flagged unthinned
/// unless the size is unchanged.
inline Skeleton resize_nearest(const Skeleton& s, int w, int h) {
    const bool same = s.grid.same_shape(w, h);
    return Skeleton{resize_nearest(s.grid, w, h), same && s.thinned};
}

/// True when no 2x2 window is fully set.
inline bool is_one_pixel_wide(const BinaryMask& m) noexcept {
    for (int y = 0; y + 1 < m.height(); ++y) {
        for (int x = 0; x + 1 < m.width(); ++x) {
            if (m(x, y) && m(x + 1, y) && m(x, y + 1) && m(x + 1, y + 1)) return false;
        }
    }
    return true;
}

namespace detail {

// Yokoi connectivity number for 8-connected foreground. A pixel is 8-simple
// (removable without changing topology) iff this equals 1.
constexpr int yokoi8(std::uint8_t bits) noexcept {
    int n = 0;
    for (int k = 0; k < 8; k += 2) {
        const int a = ((bits >> k) & 1) ? 0 : 1;
        const int b = ((bits >> ((k + 1) % 8)) & 1) ? 0 : 1;
        const int c = ((bits >> ((k + 2) % 8)) & 1) ? 0 : 1;
        n += a - a * b * c;
    }
    return n;
}

constexpr std::array<bool, 256> make_simple_table() noexcept {
    std::array<bool, 256> t{};
    for (int i = 0; i < 256; ++i) t[static_cast<std::size_t>(i)] = yokoi8(static_cast<std::uint8_t>(i)) == 1;
    return t;
}

inline constexpr std::array<bool, 256> kSimple8 = make_simple_table();

}  // namespace detail

inline bool is_simple_point(std::uint8_t neighborhood) noexcept { return detail::kSimple8[neighborhood]; }

namespace detail {

// Deletes simple non-endpoint pixels facing each direction in turn until a
// full sweep changes nothing.
inline void peel_to_fixpoint(BinaryMask& img) {
    // N, S, E, W as kRing8 indices.
    constexpr std::array<std::size_t, 4> kDirections = {2, 6, 0, 4};
    std::vector<PixelCoord> candidates;
    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t dir : kDirections) {
            const auto [dx, dy] = kRing8[dir];
            candidates.clear();
            for (int y = 0; y < img.height(); ++y) {
                for (int x = 0; x < img.width(); ++x) {
                    if (img(x, y) && !img.get_or(x + dx, y + dy, 0)) candidates.push_back({x, y});
                }
            }
            for (const PixelCoord p : candidates) {
                const std::uint8_t bits = neighborhood_bits(img, p.x, p.y);
                if (std::popcount(bits) >= 2 && is_simple_point(bits)) {
                    img(p) = 0;
                    changed = true;
                }
            }
        }
    }
}

inline std::optional<PixelCoord> find_block(const BinaryMask& m, int from_row = 0) {
    for (int y = from_row; y + 1 < m.height(); ++y)
        for (int x = 0; x + 1 < m.width(); ++x)
            if (m(x, y) && m(x + 1, y) && m(x, y + 1) && m(x + 1, y + 1)) return PixelCoord{x, y};
    return std::nullopt;
}

// 8-connected pieces reachable from the set neighbors of `p` (which must be
// cleared), as pixel lists.
inline std::vector<std::vector<PixelCoord>> pieces_around(const BinaryMask& m, PixelCoord p, Grid<int, LabelTag>& mark,
                                                          int& stamp) {
    std::vector<std::vector<PixelCoord>> pieces;
    for (const auto& [dx, dy] : kRing8) {
        const PixelCoord q{p.x + dx, p.y + dy};
        if (!m.get_or(q.x, q.y, 0) || mark(q) == stamp) continue;
        std::vector<PixelCoord> piece{q};
        mark(q) = stamp;
        for (std::size_t i = 0; i < piece.size(); ++i) {
            for (const auto& [ex, ey] : kRing8) {
                const PixelCoord r{piece[i].x + ex, piece[i].y + ey};
                if (m.get_or(r.x, r.y, 0) && mark(r) != stamp) {
                    mark(r) = stamp;
                    piece.push_back(r);
                }
            }
        }
        pieces.push_back(std::move(piece));
    }
    ++stamp;
    return pieces;
}

// Removes 2x2 blocks that simple-point deletion cannot reach. A block pixel
// is deleted when its neighbors stay connected elsewhere; failing that, the
// pixel goes together with the smallest branch it alone holds on, which
// keeps the component count.
inline void break_blocks(BinaryMask& img) {
    Grid<int, LabelTag> mark(img.width(), img.height(), 0);
    int stamp = 1;
    int row = 0;  // deletions never create blocks, so earlier rows stay clean
    while (const auto block = find_block(img, row)) {
        row = block->y;
        struct Choice {
            long long cost = -1;
            PixelCoord p;
            std::vector<std::vector<PixelCoord>> drop;
        } best;
        for (const PixelCoord p : {PixelCoord{block->x, block->y}, PixelCoord{block->x + 1, block->y},
                                   PixelCoord{block->x, block->y + 1}, PixelCoord{block->x + 1, block->y + 1}}) {
            img(p) = 0;
            auto pieces = pieces_around(img, p, mark, stamp);
            img(p) = 1;
            // The other three block pixels are mutually adjacent: keep their piece.
            const PixelCoord anchor{p.x == block->x ? block->x + 1 : block->x, p.y};
            std::vector<std::vector<PixelCoord>> drop;
            long long cost = 0;
            for (auto& piece : pieces) {
                if (std::find(piece.begin(), piece.end(), anchor) != piece.end()) continue;
                cost += static_cast<long long>(piece.size());
                drop.push_back(std::move(piece));
            }
            // Clearing an interior pixel would open a hole; rank it last among equals.
            bool interior = true;
            for (const auto& [dx, dy] : kRing4) interior = interior && img.get_or(p.x + dx, p.y + dy, 0);
            cost = cost * 2 + (interior ? 1 : 0);
            if (best.cost < 0 || cost < best.cost) best = {cost, p, std::move(drop)};
        }
        img(best.p) = 0;
        for (const auto& piece : best.drop)
            for (const PixelCoord q : piece) img(q) = 0;
    }
    // Peeling only deletes, so it cannot bring a block back.
    peel_to_fixpoint(img);
}

}  // namespace detail

/// Thinning of a mask to a one-pixel-wide skeleton. The output is a subset of
/// the input with the same 8-connected component count, and is deterministic.
/// Holes are kept except where a 2x2 block can only be broken by opening one.
inline Skeleton thin_mask(const BinaryMask& mask) {
    if (mask.empty()) return Skeleton{mask, true};
    BinaryMask img = mask;
    for (auto& v : img.data()) v = v ? 1 : 0;
    detail::peel_to_fixpoint(img);
    detail::break_blocks(img);
    return Skeleton{std::move(img), true};
}

/// Path length as an exact count of orthogonal and diagonal lattice steps.
/// Sums and comparisons are exact, so graph measurements do not depend on
/// traversal order.
struct LatticeLength {
    long long orthogonal = 0;
    long long diagonal = 0;

    double value() const noexcept { return static_cast<double>(orthogonal) + static_cast<double>(diagonal) * std::numbers::sqrt2; }

    LatticeLength& operator+=(const LatticeLength& o) noexcept {
        orthogonal += o.orthogonal;
        diagonal += o.diagonal;
        return *this;
    }
    friend LatticeLength operator+(LatticeLength a, const LatticeLength& b) noexcept { return a += b; }
    friend bool operator==(const LatticeLength&, const LatticeLength&) = default;

    /// Exact ordering of a + b*sqrt(2) values.
    friend std::strong_ordering operator<=>(const LatticeLength& a, const LatticeLength& b) noexcept {
        const long long p = a.orthogonal - b.orthogonal;
        const long long q = a.diagonal - b.diagonal;
        auto sign_of = [](long long p_, long long q_) -> int {
            if (p_ >= 0 && q_ >= 0) return (p_ == 0 && q_ == 0) ? 0 : 1;
            if (p_ <= 0 && q_ <= 0) return -1;
            // Opposite signs: compare p^2 with 2 q^2.
            const long long lhs = p_ * p_;
            const long long rhs = 2 * q_ * q_;
            if (p_ > 0) return lhs > rhs ? 1 : -1;
            return rhs > lhs ? 1 : -1;
        };
        const int s = sign_of(p, q);
        return s < 0 ? std::strong_ordering::less : (s > 0 ? std::strong_ordering::greater : std::strong_ordering::equal);
    }
};

struct GraphNode {
    PixelCoord pos;
    int neighbors = 0;   ///< 8-neighbor count of the pixel
    int degree = 0;      ///< incident edge ends (a self-loop counts twice)
    int component = 0;   ///< 1-based component id
};

struct GraphEdge {
    int from = 0;
    int to = 0;
    LatticeLength steps;
    std::vector<PixelCoord> path;  ///< both end nodes included
    int component = 0;

    double length_px() const noexcept { return steps.value(); }
};

/// Node/edge decomposition of a thinned skeleton. Nodes are pixels whose
/// m-adjacent neighbor count is not 2 (endpoints, junctions, isolated pixels);
/// a component that is a pure loop gets one node at its first pixel in raster
/// order so the loop can be represented as a self-edge.
struct SkeletonGraph {
    int width = 0;
    int height = 0;
    std::vector<GraphNode> nodes;
    std::vector<GraphEdge> edges;
    int components = 0;
    int cycles = 0;
    std::vector<long long> component_pixels;  ///< index 0 unused

    LatticeLength total_steps() const noexcept {
        LatticeLength t;
        for (const auto& e : edges) t += e.steps;
        return t;
    }
    double total_length_px() const noexcept { return total_steps().value(); }

    /// Component with the most pixels; ties go to the lower id. 0 if empty.
    int largest_component() const noexcept {
        int best = 0;
        for (int c = 1; c <= components; ++c) {
            if (best == 0 || component_pixels[static_cast<std::size_t>(c)] > component_pixels[static_cast<std::size_t>(best)]) best = c;
        }
        return best;
    }
};

namespace detail {

// Diagonal neighbors are m-adjacent only when they share no set 4-neighbor;
// this removes the redundant triangle paths that plain 8-adjacency creates
// around corners and junction clusters.
inline bool m_adjacent(const BinaryMask& m, int x, int y, int dx, int dy) noexcept {
    if (!m.get_or(x + dx, y + dy, 0)) return false;
    if (dx == 0 || dy == 0) return true;
    return !m.get_or(x + dx, y, 0) && !m.get_or(x, y + dy, 0);
}

inline int m_neighbors(const BinaryMask& m, int x, int y, std::array<PixelCoord, 8>& out) noexcept {
    int n = 0;
    for (const auto& [dx, dy] : kRing8) {
        if (m_adjacent(m, x, y, dx, dy)) out[static_cast<std::size_t>(n++)] = {x + dx, y + dy};
    }
    return n;
}

inline LatticeLength step_between(PixelCoord a, PixelCoord b) noexcept {
    return (a.x != b.x && a.y != b.y) ? LatticeLength{0, 1} : LatticeLength{1, 0};
}

}  // namespace detail

/// Decompose a thinned skeleton into nodes and pixel-path edges. Edges follow
/// m-adjacency; orthogonal steps weigh 1 and diagonal steps sqrt(2).
inline SkeletonGraph build_graph(const Skeleton& skel) {
    require_thinned(skel, "build_graph");
    const BinaryMask& m = skel.grid;
    SkeletonGraph g;
    g.width = m.width();
    g.height = m.height();
    if (m.empty()) return g;

    const Components comps = connected_components(m, 8);
    g.components = comps.count;
    g.component_pixels.assign(static_cast<std::size_t>(comps.count) + 1, 0);

    Grid<int, LabelTag> node_id(m.width(), m.height(), -1);
    std::array<PixelCoord, 8> nb{};
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
            if (!m(x, y)) continue;
            ++g.component_pixels[static_cast<std::size_t>(comps.labels(x, y))];
            const int count8 = std::popcount(neighborhood_bits(m, x, y));
            const int countm = detail::m_neighbors(m, x, y, nb);
            if (countm != 2) {
                node_id(x, y) = static_cast<int>(g.nodes.size());
                g.nodes.push_back({{x, y}, count8, 0, comps.labels(x, y)});
            }
        }
    }

    BinaryMask visited(m.width(), m.height(), 0);

    // Walk from `start` node through first pixel `first` until a node is reached.
    auto trace = [&](int start, PixelCoord first) {
        GraphEdge e;
        e.from = start;
        e.component = g.nodes[static_cast<std::size_t>(start)].component;
        PixelCoord prev = g.nodes[static_cast<std::size_t>(start)].pos;
        PixelCoord cur = first;
        e.path.push_back(prev);
        while (true) {
            e.steps += detail::step_between(prev, cur);
            e.path.push_back(cur);
            if (node_id(cur) >= 0) break;
            visited(cur) = 1;
            const int n = detail::m_neighbors(m, cur.x, cur.y, nb);
            PixelCoord next = prev;
            for (int i = 0; i < n; ++i) {
                if (!(nb[static_cast<std::size_t>(i)] == prev)) {
                    next = nb[static_cast<std::size_t>(i)];
                    break;
                }
            }
            prev = cur;
            cur = next;
        }
        e.to = node_id(cur);
        g.nodes[static_cast<std::size_t>(e.from)].degree += 1;
        g.nodes[static_cast<std::size_t>(e.to)].degree += 1;
        g.edges.push_back(std::move(e));
    };

    auto trace_from = [&](int id) {
        const PixelCoord p = g.nodes[static_cast<std::size_t>(id)].pos;
        const int n = detail::m_neighbors(m, p.x, p.y, nb);
        const auto local = nb;
        for (int i = 0; i < n; ++i) {
            const PixelCoord q = local[static_cast<std::size_t>(i)];
            const int qid = node_id(q);
            if (qid >= 0) {
                if (qid > id) trace(id, q);
            } else if (!visited(q)) {
                trace(id, q);
            }
        }
    };

    const int regular_nodes = static_cast<int>(g.nodes.size());
    for (int id = 0; id < regular_nodes; ++id) trace_from(id);

    // Whatever remains unvisited lies on node-free loops.
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
            if (!m(x, y) || visited(x, y) || node_id(x, y) >= 0) continue;
            const int id = static_cast<int>(g.nodes.size());
            node_id(x, y) = id;
            g.nodes.push_back({{x, y}, 2, 0, comps.labels(x, y)});
            const int n = detail::m_neighbors(m, x, y, nb);
            if (n > 0) trace(id, nb[0]);
        }
    }

    g.cycles = static_cast<int>(g.edges.size()) - static_cast<int>(g.nodes.size()) + g.components;
    return g;
}

/// True iff both skeletons have the same component and cycle counts.
inline bool topology_preserved(const Skeleton& pred, const Skeleton& ref) {
    require_thinned(pred, "topology_preserved(pred)");
    require_thinned(ref, "topology_preserved(ref)");
    require_same_shape(pred.grid, ref.grid, "topology_preserved");
    const SkeletonGraph a = build_graph(pred);
    const SkeletonGraph b = build_graph(ref);
    return a.components == b.components && a.cycles == b.cycles;
}

inline constexpr double kDefaultPruneLength = 5.0;

namespace detail {

// Union-find over graph nodes, used to merge adjacent junction pixels into a
// single branch point.
struct NodeClusters {
    std::vector<int> parent;
    explicit NodeClusters(std::size_t n) : parent(n) {
        for (std::size_t i = 0; i < n; ++i) parent[i] = static_cast<int>(i);
    }
    int find(int i) {
        while (parent[static_cast<std::size_t>(i)] != i) {
            parent[static_cast<std::size_t>(i)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(i)])];
            i = parent[static_cast<std::size_t>(i)];
        }
        return i;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
    }
};

inline bool is_cluster_link(const SkeletonGraph& g, const GraphEdge& e) {
    return e.path.size() == 2 && g.nodes[static_cast<std::size_t>(e.from)].neighbors >= 3 &&
           g.nodes[static_cast<std::size_t>(e.to)].neighbors >= 3;
}

}  // namespace detail

/// Remove short endpoint-terminated branches hanging off junctions. A branch
/// is only removed while its junction keeps at least two other branches, so
/// whole components and junction-to-junction bridges are never pruned and
/// component counts are unchanged. Shortest branches go first; the process
/// repeats until nothing changes.
inline Skeleton prune_spurs(const Skeleton& skel, double min_branch_len = kDefaultPruneLength) {
    require_thinned(skel, "prune_spurs");
    Skeleton out = skel;
    if (out.grid.empty()) return out;
    while (true) {
        const SkeletonGraph g = build_graph(out);
        detail::NodeClusters clusters(g.nodes.size());
        for (const auto& e : g.edges) {
            if (detail::is_cluster_link(g, e)) clusters.unite(e.from, e.to);
        }
        // External branch count of each cluster root.
        std::map<int, int> branches;
        for (const auto& e : g.edges) {
            if (detail::is_cluster_link(g, e)) continue;
            const int a = clusters.find(e.from);
            const int b = clusters.find(e.to);
            branches[a] += 1;
            branches[b] += 1;
        }
        struct Spur {
            LatticeLength len;
            PixelCoord tip;
            std::size_t edge;
        };
        std::map<int, std::vector<Spur>> spurs_by_cluster;
        for (std::size_t i = 0; i < g.edges.size(); ++i) {
            const GraphEdge& e = g.edges[i];
            if (e.from == e.to || e.length_px() >= min_branch_len) continue;
            const GraphNode& a = g.nodes[static_cast<std::size_t>(e.from)];
            const GraphNode& b = g.nodes[static_cast<std::size_t>(e.to)];
            const bool a_tip = a.degree == 1;
            const bool b_tip = b.degree == 1;
            if (a_tip == b_tip) continue;  // whole component or bridge
            const int anchor = clusters.find(a_tip ? e.to : e.from);
            spurs_by_cluster[anchor].push_back({e.steps, a_tip ? a.pos : b.pos, i});
        }
        bool removed = false;
        for (auto& [anchor, spurs] : spurs_by_cluster) {
            const int budget = branches[anchor] - 2;
            if (budget <= 0) continue;
            std::sort(spurs.begin(), spurs.end(), [](const Spur& l, const Spur& r) {
                if (l.len != r.len) return l.len < r.len;
                return RasterLess{}(l.tip, r.tip);
            });
            for (int k = 0; k < budget && k < static_cast<int>(spurs.size()); ++k) {
                const GraphEdge& e = g.edges[spurs[static_cast<std::size_t>(k)].edge];
                const bool from_tip = g.nodes[static_cast<std::size_t>(e.from)].degree == 1;
                // Clear the path, keeping the pixel where it attaches.
                for (std::size_t j = 0; j < e.path.size(); ++j) {
                    const bool attach = from_tip ? (j + 1 == e.path.size()) : (j == 0);
                    if (!attach) out.grid(e.path[j]) = 0;
                }
                removed = true;
            }
        }
        if (!removed) break;
        // Junction pixels left behind may now be redundant.
        detail::peel_to_fixpoint(out.grid);
    }
    return out;
}

}  // namespace fissure
