#pragma once

// Branch points: extraction from skeletons, Gaussian heatmap targets, peak
// extraction with non-maximum suppression, and radius-tolerant matching.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "fissure/raster.hpp"
#include "fissure/skeleton.hpp"

namespace fissure {

struct JunctionSet {
    std::vector<PixelCoord> points;
    std::vector<float> confidences;  ///< parallel to points; 1.0 for ground truth

    std::size_t size() const noexcept { return points.size(); }
    bool empty() const noexcept { return points.empty(); }

    void add(PixelCoord p, float confidence = 1.0f) {
        points.push_back(p);
        confidences.push_back(confidence);
    }

    static JunctionSet ground_truth(std::vector<PixelCoord> pts) {
        JunctionSet j;
        j.confidences.assign(pts.size(), 1.0f);
        j.points = std::move(pts);
        return j;
    }

    friend bool operator==(const JunctionSet&, const JunctionSet&) = default;
};

struct HeatmapSpec {
    double sigma = 5.0;
    double truncation_radius = 15.0;

    static HeatmapSpec with_sigma(double sigma) { return {sigma, 3.0 * sigma}; }

    void validate() const {
        if (!(sigma > 0.0)) throw Error(ErrorCode::ParamOutOfRange, "sigma must be > 0");
        if (!(truncation_radius >= 3.0 * sigma - 1e-12)) {
            throw Error(ErrorCode::ParamOutOfRange, "truncation radius must be >= 3 sigma");
        }
    }
};

struct MatchResult {
    int tp = 0;
    int fp = 0;
    int fn = 0;
    std::vector<std::pair<int, int>> pairs;  ///< (prediction index, reference index)
    std::vector<bool> pred_is_tp;            ///< per prediction, in input order
};

/// Junction pixels (8-neighbor count >= 3) grouped into 8-connected clusters,
/// one representative per cluster: the member closest to the cluster centroid,
/// ties broken in raster order.
inline JunctionSet extract_junctions(const Skeleton& skel) {
    require_thinned(skel, "extract_junctions");
    JunctionSet out;
    const BinaryMask& m = skel.grid;
    if (m.empty()) return out;
    BinaryMask junction(m.width(), m.height(), 0);
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x)
            if (m(x, y) && std::popcount(neighborhood_bits(m, x, y)) >= 3) junction(x, y) = 1;

    const Components comps = connected_components(junction, 8);
    std::vector<std::vector<PixelCoord>> members(static_cast<std::size_t>(comps.count) + 1);
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x)
            if (junction(x, y)) members[static_cast<std::size_t>(comps.labels(x, y))].push_back({x, y});

    for (int c = 1; c <= comps.count; ++c) {
        const auto& pts = members[static_cast<std::size_t>(c)];
        // Compare squared distances to the centroid scaled by n to stay in integers.
        long long sx = 0, sy = 0;
        for (const auto& p : pts) {
            sx += p.x;
            sy += p.y;
        }
        const long long n = static_cast<long long>(pts.size());
        PixelCoord best = pts.front();
        long long best_d = -1;
        for (const auto& p : pts) {
            const long long dx = p.x * n - sx;
            const long long dy = p.y * n - sy;
            const long long d = dx * dx + dy * dy;
            if (best_d < 0 || d < best_d) {
                best_d = d;
                best = p;
            }
        }
        out.add(best, 1.0f);
    }
    return out;
}

/// Gaussian target heatmap, max-composed over junctions and truncated to zero
/// beyond the truncation radius.
inline Heatmap make_heatmap(const JunctionSet& junctions, int w, int h, const HeatmapSpec& spec = {}) {
    spec.validate();
    Heatmap hm(w, h, 0.0f);
    const double two_sigma_sq = 2.0 * spec.sigma * spec.sigma;
    const int reach = static_cast<int>(std::floor(spec.truncation_radius));
    const double r2 = spec.truncation_radius * spec.truncation_radius;
    for (const PixelCoord& p : junctions.points) {
        if (!hm.contains(p)) {
            throw Error(ErrorCode::PointOutOfBounds, "junction (" + std::to_string(p.x) + "," + std::to_string(p.y) +
                                                         ") outside " + std::to_string(w) + "x" + std::to_string(h));
        }
        for (int y = std::max(0, p.y - reach); y <= std::min(h - 1, p.y + reach); ++y) {
            for (int x = std::max(0, p.x - reach); x <= std::min(w - 1, p.x + reach); ++x) {
                const double d2 = static_cast<double>((x - p.x) * (x - p.x) + (y - p.y) * (y - p.y));
                if (d2 > r2) continue;
                const float v = static_cast<float>(std::exp(-d2 / two_sigma_sq));
                if (v > hm(x, y)) hm(x, y) = v;
            }
        }
    }
    return hm;
}

/// Local maxima (strict or plateau) over the 8-neighborhood with value at
/// least `threshold` and above zero, followed by greedy NMS in descending
/// confidence. Equal confidences are visited in raster order.
inline JunctionSet extract_peaks(const Heatmap& hm, float threshold = 0.5f, double nms_radius = 10.0) {
    if (!(nms_radius >= 1.0)) throw Error(ErrorCode::ParamOutOfRange, "nms_radius must be >= 1");
    struct Candidate {
        float value;
        PixelCoord p;
    };
    std::vector<Candidate> cands;
    for (int y = 0; y < hm.height(); ++y) {
        for (int x = 0; x < hm.width(); ++x) {
            const float v = hm(x, y);
            if (!(v >= threshold) || !(v > 0.0f)) continue;
            bool is_max = true;
            for (const auto& [dx, dy] : kRing8) {
                if (hm.get_or(x + dx, y + dy, 0.0f) > v) {
                    is_max = false;
                    break;
                }
            }
            if (is_max) cands.push_back({v, {x, y}});
        }
    }
    std::sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) {
        if (a.value != b.value) return a.value > b.value;
        return RasterLess{}(a.p, b.p);
    });
    JunctionSet out;
    const double r2 = nms_radius * nms_radius;
    for (const auto& c : cands) {
        bool suppressed = false;
        for (const auto& q : out.points) {
            const double dx = c.p.x - q.x;
            const double dy = c.p.y - q.y;
            if (dx * dx + dy * dy <= r2) {
                suppressed = true;
                break;
            }
        }
        if (!suppressed) out.add(c.p, c.value);
    }
    return out;
}

/// Greedy one-to-one matching: predictions in descending confidence each take
/// the nearest unmatched reference within `radius` (inclusive).
inline MatchResult match_junctions(const JunctionSet& pred, const JunctionSet& ref, double radius = 5.0) {
    if (!(radius > 0.0)) throw Error(ErrorCode::ParamOutOfRange, "match radius must be > 0");
    MatchResult r;
    r.pred_is_tp.assign(pred.size(), false);
    std::vector<std::size_t> order(pred.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto conf = [&](std::size_t i) { return i < pred.confidences.size() ? pred.confidences[i] : 1.0f; };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (conf(a) != conf(b)) return conf(a) > conf(b);
        if (!(pred.points[a] == pred.points[b])) return RasterLess{}(pred.points[a], pred.points[b]);
        return a < b;
    });
    std::vector<bool> taken(ref.size(), false);
    const double r2 = radius * radius;
    for (std::size_t i : order) {
        long long best = -1;
        double best_d2 = 0.0;
        for (std::size_t j = 0; j < ref.size(); ++j) {
            if (taken[j]) continue;
            const double dx = pred.points[i].x - ref.points[j].x;
            const double dy = pred.points[i].y - ref.points[j].y;
            const double d2 = dx * dx + dy * dy;
            if (d2 > r2) continue;
            if (best < 0 || d2 < best_d2 ||
                (d2 == best_d2 && RasterLess{}(ref.points[j], ref.points[static_cast<std::size_t>(best)]))) {
                best = static_cast<long long>(j);
                best_d2 = d2;
            }
        }
        if (best >= 0) {
            taken[static_cast<std::size_t>(best)] = true;
            r.pairs.emplace_back(static_cast<int>(i), static_cast<int>(best));
            r.pred_is_tp[i] = true;
        }
    }
    r.tp = static_cast<int>(r.pairs.size());
    r.fp = static_cast<int>(pred.size()) - r.tp;
    r.fn = static_cast<int>(ref.size()) - r.tp;
    return r;
}

}  // namespace fissure
