#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "fissure/junction.hpp"
#include "grid_text.hpp"

using namespace fissure;

namespace {

JunctionSet random_spread(Rng& rng, int w, int h, int n, double min_gap, int border) {
    JunctionSet j;
    for (int tries = 0; tries < 10000 && static_cast<int>(j.size()) < n; ++tries) {
        const PixelCoord p{rng.uniform_int(border, w - 1 - border), rng.uniform_int(border, h - 1 - border)};
        bool ok = true;
        for (const auto& q : j.points) ok &= distance(p, q) > min_gap;
        if (ok) j.add(p);
    }
    return j;
}

}  // namespace

TEST(ExtractJunctions, LineHasNone) {
    EXPECT_TRUE(extract_junctions(testutil::skel_from({".......", "#######", "......."})).empty());
}

TEST(ExtractJunctions, PlusHasCentre) {
    const JunctionSet j = extract_junctions(testutil::plus_skeleton(11, 5, 4));
    ASSERT_EQ(j.size(), 1u);
    EXPECT_EQ(j.points[0], (PixelCoord{5, 5}));
    EXPECT_EQ(j.confidences[0], 1.0f);
}

TEST(ExtractJunctions, ThickCrossingClusterMergesToOne) {
    // Vertical line crossed by two offset half-lines; four adjacent pixels
    // around the crossing all have three or more neighbors.
    BinaryMask m(11, 11);
    for (int y = 0; y < 11; ++y) m(5, y) = 1;
    for (int x = 0; x < 5; ++x) m(x, 5) = 1;
    for (int x = 6; x < 11; ++x) m(x, 6) = 1;
    const Skeleton s{m, true};
    int candidates = 0;
    for (const auto& p : foreground_pixels(m)) candidates += neighbor_count(m, p) >= 3;
    EXPECT_GE(candidates, 2);
    const JunctionSet j = extract_junctions(s);
    ASSERT_EQ(j.size(), 1u);
    EXPECT_TRUE(m(j.points[0]));
}

TEST(MakeHeatmap, Examples) {
    const HeatmapSpec spec = HeatmapSpec::with_sigma(5.0);
    const Heatmap empty = make_heatmap({}, 20, 10, spec);
    for (float v : empty.data()) EXPECT_EQ(v, 0.0f);

    const Heatmap one = make_heatmap(JunctionSet::ground_truth({{20, 20}}), 41, 41, spec);
    EXPECT_EQ(one(20, 20), 1.0f);
    EXPECT_NEAR(one(25, 20), std::exp(-0.5), 1e-6);
    EXPECT_NEAR(one(20, 15), std::exp(-0.5), 1e-6);
    EXPECT_NEAR(one(23, 24), std::exp(-0.5), 1e-6);
    EXPECT_EQ(one(36, 20), 0.0f);
    EXPECT_GT(one(35, 20), 0.0f);

    const Heatmap two = make_heatmap(JunctionSet::ground_truth({{10, 5}, {16, 5}}), 30, 11, HeatmapSpec::with_sigma(3.0));
    EXPECT_NEAR(two(13, 5), std::exp(-0.5), 1e-6);
}

TEST(MakeHeatmap, OutOfBoundsPoint) {
    try {
        make_heatmap(JunctionSet::ground_truth({{10, 3}}), 10, 10);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::PointOutOfBounds);
    }
}

TEST(MakeHeatmap, PermutationInvariantAndMonotone) {
    Rng rng(12);
    for (int t = 0; t < 20; ++t) {
        JunctionSet j = random_spread(rng, 60, 50, 8, 0.0, 0);
        const Heatmap a = make_heatmap(j, 60, 50);
        JunctionSet r = j;
        std::reverse(r.points.begin(), r.points.end());
        EXPECT_EQ(make_heatmap(r, 60, 50), a);
        JunctionSet more = j;
        more.add({rng.uniform_int(0, 59), rng.uniform_int(0, 49)});
        const Heatmap b = make_heatmap(more, 60, 50);
        for (std::size_t i = 0; i < a.size(); ++i) EXPECT_GE(b.data()[i], a.data()[i]);
    }
}

TEST(ExtractPeaks, Examples) {
    EXPECT_TRUE(extract_peaks(Heatmap(30, 30, 0.0f), 0.5f, 10).empty());
    const Heatmap one = make_heatmap(JunctionSet::ground_truth({{10, 10}}), 30, 30);
    const JunctionSet p = extract_peaks(one, 0.5f, 10);
    ASSERT_EQ(p.size(), 1u);
    EXPECT_EQ(p.points[0], (PixelCoord{10, 10}));
    EXPECT_EQ(p.confidences[0], 1.0f);

    const Heatmap two = make_heatmap(JunctionSet::ground_truth({{10, 15}, {30, 15}}), 41, 31, HeatmapSpec::with_sigma(3.0));
    const JunctionSet q = extract_peaks(two, 0.5f, 6);
    EXPECT_EQ(q.points, (std::vector<PixelCoord>{{10, 15}, {30, 15}}));
}

TEST(ExtractPeaks, PlateauResolvesToRasterFirst) {
    Heatmap h(9, 9, 0.0f);
    h(4, 4) = 0.8f;
    h(5, 4) = 0.8f;
    h(4, 5) = 0.8f;
    const JunctionSet p = extract_peaks(h, 0.5f, 3);
    ASSERT_EQ(p.size(), 1u);
    EXPECT_EQ(p.points[0], (PixelCoord{4, 4}));
    EXPECT_THROW(extract_peaks(h, 0.5f, 0.5), Error);
}

TEST(ExtractPeaks, RoundTripRecoversWellSeparatedSets) {
    Rng rng(5);
    const HeatmapSpec spec = HeatmapSpec::with_sigma(5.0);
    for (int t = 0; t < 30; ++t) {
        const JunctionSet j = random_spread(rng, 200, 200, rng.uniform_int(1, 12), 4.0 * spec.sigma, 15);
        const JunctionSet p = extract_peaks(make_heatmap(j, 200, 200, spec), 0.5f, 2.0 * spec.sigma);
        const MatchResult m = match_junctions(p, j, 1.0);
        EXPECT_EQ(m.tp, static_cast<int>(j.size()));
        EXPECT_EQ(m.fp, 0);
        EXPECT_EQ(m.fn, 0);
    }
}

TEST(MatchJunctions, Examples) {
    const auto a = match_junctions(JunctionSet::ground_truth({{10, 10}}), JunctionSet::ground_truth({{12, 11}}), 5);
    EXPECT_EQ(a.tp, 1);
    EXPECT_EQ(a.fp, 0);
    EXPECT_EQ(a.fn, 0);
    const auto b = match_junctions(JunctionSet::ground_truth({{10, 10}}), JunctionSet::ground_truth({{20, 20}}), 5);
    EXPECT_EQ(b.tp, 0);
    EXPECT_EQ(b.fp, 1);
    EXPECT_EQ(b.fn, 1);
    Rng rng(1);
    const JunctionSet s = random_spread(rng, 50, 50, 15, 0.0, 0);
    const auto c = match_junctions(s, s, 0.5);
    EXPECT_EQ(c.tp, 15);
    EXPECT_EQ(c.fp + c.fn, 0);
}

TEST(MatchJunctions, HigherConfidenceClaimsFirst) {
    JunctionSet pred;
    pred.add({0, 0}, 0.6f);
    pred.add({4, 0}, 0.9f);
    const auto m = match_junctions(pred, JunctionSet::ground_truth({{2, 0}}), 3);
    ASSERT_EQ(m.pairs.size(), 1u);
    EXPECT_EQ(m.pairs[0].first, 1);
    EXPECT_EQ(m.pred_is_tp, (std::vector<bool>{false, true}));
}

TEST(MatchJunctions, CountIdentitiesOnRandomSets) {
    Rng rng(99);
    for (int t = 0; t < 200; ++t) {
        JunctionSet pred, ref;
        const int np = rng.uniform_int(0, 20), nr = rng.uniform_int(0, 20);
        for (int i = 0; i < np; ++i) pred.add({rng.uniform_int(0, 40), rng.uniform_int(0, 40)}, static_cast<float>(rng.uniform()));
        for (int i = 0; i < nr; ++i) ref.add({rng.uniform_int(0, 40), rng.uniform_int(0, 40)});
        const double radius = rng.uniform(0.5, 8.0);
        const auto m = match_junctions(pred, ref, radius);
        EXPECT_EQ(m.tp + m.fp, np);
        EXPECT_EQ(m.tp + m.fn, nr);
        EXPECT_EQ(m.tp, static_cast<int>(m.pairs.size()));
        std::set<int> ps, rs;
        for (auto [p, r] : m.pairs) {
            EXPECT_TRUE(ps.insert(p).second);
            EXPECT_TRUE(rs.insert(r).second);
            EXPECT_LE(distance(pred.points[p], ref.points[r]), radius + 1e-12);
        }
    }
}
