#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fissure/descriptors.hpp"
#include "fissure/junction.hpp"
#include "grid_text.hpp"

using namespace fissure;

namespace {

// Grows a one-pixel-wide tree: each new pixel is a 4-neighbor of the tree
// whose 8-neighborhood holds exactly one tree pixel, so no loops or 2x2 blocks form.
Skeleton random_tree(Rng& rng, int w, int h, int pixels) {
    BinaryMask m(w, h);
    std::vector<PixelCoord> tree{{w / 2, h / 2}};
    m(tree[0]) = 1;
    for (int tries = 0; tries < pixels * 50 && static_cast<int>(tree.size()) < pixels; ++tries) {
        const PixelCoord from = tree[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(tree.size()) - 1))];
        const auto [dx, dy] = kRing4[static_cast<std::size_t>(rng.uniform_int(0, 3))];
        const PixelCoord p{from.x + dx, from.y + dy};
        if (!m.contains(p) || m(p) || neighbor_count(m, p) != 1) continue;
        m(p) = 1;
        tree.push_back(p);
    }
    return Skeleton{std::move(m), true};
}

double expect_code(ErrorCode code, auto&& f) {
    try {
        f();
        ADD_FAILURE() << "expected " << to_string(code);
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), code);
    }
    return 0.0;
}

}  // namespace

TEST(CrackLength, Examples) {
    EXPECT_DOUBLE_EQ(crack_length(build_graph(testutil::skel_from({"#####"})), 1.0), 4.0);
    EXPECT_NEAR(crack_length(build_graph(testutil::skel_from({"#..", ".#.", "..#"})), 1.0), 2.0 * std::sqrt(2.0), 1e-12);
    EXPECT_DOUBLE_EQ(crack_length(build_graph(testutil::plus_skeleton(7, 3, 2)), 1.0), 8.0);
    EXPECT_DOUBLE_EQ(crack_length(build_graph(testutil::plus_skeleton(7, 3, 2)), 0.25), 2.0);
}

TEST(AverageWidth, Examples) {
    EXPECT_DOUBLE_EQ(average_width(testutil::rect(10, 10, 0, 0, 10, 4), 10.0), 4.0);
    EXPECT_DOUBLE_EQ(average_width(BinaryMask(5, 5), 3.0), 0.0);
    expect_code(ErrorCode::ZeroLength, [] { average_width(BinaryMask(5, 5), 0.0); });
    const BinaryMask bar = testutil::rect(25, 7, 2, 2, 21, 3);
    const Skeleton s = thin_mask(bar);
    const double len = crack_length(build_graph(s));
    EXPECT_DOUBLE_EQ(len, 20.0);
    EXPECT_DOUBLE_EQ(average_width(bar, len), 3.15);
}

TEST(Orientation, Examples) {
    EXPECT_DOUBLE_EQ(orientation(testutil::skel_from({".....", "#####", "....."})), 0.0);
    EXPECT_DOUBLE_EQ(orientation(testutil::skel_from({".#.", ".#.", ".#.", ".#."})), 90.0);
    // Rising to the right on screen.
    EXPECT_NEAR(orientation(testutil::skel_from({"...#", "..#.", ".#..", "#..."})), 45.0, 1e-6);
    EXPECT_NEAR(orientation(testutil::skel_from({"#...", ".#..", "..#.", "...#"})), 135.0, 1e-6);
    expect_code(ErrorCode::DegenerateGeometry, [] { orientation(testutil::skel_from({"...", ".#.", "..."})); });
    expect_code(ErrorCode::IsotropicGeometry, [] { orientation(testutil::plus_skeleton(7, 3, 2)); });
}

TEST(Tortuosity, Examples) {
    EXPECT_DOUBLE_EQ(tortuosity(build_graph(testutil::skel_from({"#####"}))), 1.0);
    const auto l = tortuosity_detail(build_graph(testutil::skel_from({"#..", "#..", "###"})));
    EXPECT_DOUBLE_EQ(l.path_length_px, 4.0);
    EXPECT_NEAR(l.endpoint_distance_px, 2.0 * std::sqrt(2.0), 1e-12);
    EXPECT_NEAR(l.value, std::sqrt(2.0), 1e-12);
    expect_code(ErrorCode::PureCycle, [] { tortuosity(build_graph(testutil::skel_from({"####", "#..#", "#..#", "####"}))); });
}

TEST(Tortuosity, AtLeastOneOnRandomTrees) {
    Rng rng(123);
    for (int t = 0; t < 300; ++t) {
        const Skeleton s = random_tree(rng, 40, 40, rng.uniform_int(2, 120));
        const SkeletonGraph g = build_graph(s);
        const auto r = tortuosity_detail(g);
        EXPECT_GE(r.value, 1.0 - 1e-9);
        EXPECT_NEAR(r.value * r.endpoint_distance_px, r.path_length_px, 1e-9);
        EXPECT_EQ(g.cycles, 0);
    }
}

TEST(ClassifyTopology, ThresholdsAndMonotone) {
    EXPECT_EQ(classify_topology(0), TopologyClass::Linear);
    EXPECT_EQ(classify_topology(1), TopologyClass::Branched);
    EXPECT_EQ(classify_topology(2), TopologyClass::Branched);
    EXPECT_EQ(classify_topology(3), TopologyClass::Complex);
    EXPECT_EQ(classify_topology(5), TopologyClass::Complex);
    EXPECT_EQ(classify_topology(6), TopologyClass::Network);
    EXPECT_EQ(classify_topology(1000), TopologyClass::Network);
    for (std::size_t n = 0; n < 50; ++n) EXPECT_LE(classify_topology(n), classify_topology(n + 1));
    for (auto c : kTopologyClasses) EXPECT_EQ(topology_class_from_string(to_string(c)), c);
    expect_code(ErrorCode::UnknownLabel, [] { topology_class_from_string("web"); });
}

TEST(FullReport, PlusShape) {
    const Skeleton s = testutil::plus_skeleton(25, 12, 10);
    const MorphologyReport r = full_report(s.grid, s, extract_junctions(s), 1.0);
    EXPECT_EQ(r.junction_count, 1u);
    EXPECT_EQ(r.topology_class, TopologyClass::Branched);
    EXPECT_DOUBLE_EQ(r.length, 40.0);
    EXPECT_FALSE(r.orientation_deg.has_value());
    EXPECT_EQ(r.notes.at("orientation_deg"), "IsotropicGeometry");
    // All four endpoint pairs are 20 steps apart; the raster-first pair is top and left.
    ASSERT_TRUE(r.endpoints_used.has_value());
    EXPECT_EQ(r.endpoints_used->first, (PixelCoord{12, 2}));
    EXPECT_EQ(r.endpoints_used->second, (PixelCoord{2, 12}));
    EXPECT_NEAR(*r.tortuosity, 20.0 / std::hypot(10.0, 10.0), 1e-12);
}

TEST(FullReport, StraightCrackAndEmptyMask) {
    const BinaryMask bar = testutil::rect(30, 9, 3, 3, 24, 3);
    const Skeleton s = thin_mask(bar);
    const MorphologyReport r = full_report(bar, s, extract_junctions(s));
    EXPECT_EQ(r.topology_class, TopologyClass::Linear);
    EXPECT_DOUBLE_EQ(*r.tortuosity, 1.0);
    EXPECT_DOUBLE_EQ(*r.orientation_deg, 0.0);
    EXPECT_EQ(r.components, 1);
    const BinaryMask empty(10, 10);
    expect_code(ErrorCode::DegenerateGeometry, [&] { full_report(empty, thin_mask(empty), {}); });
}

TEST(FullReport, ScaleEquivarianceAndWidthIdentity) {
    Rng rng(7);
    for (int t = 0; t < 60; ++t) {
        const BinaryMask m = testutil::random_blobs(rng, 40, 40);
        const Skeleton s = thin_mask(m);
        const JunctionSet j = extract_junctions(s);
        const MorphologyReport a = full_report(m, s, j, 1.0);
        if (!(a.length > 0.0)) continue;
        const double k = rng.uniform(0.05, 4.0);
        const MorphologyReport b = full_report(m, s, j, k);
        EXPECT_NEAR(b.length, a.length * k, 1e-9 * a.length * k);
        EXPECT_NEAR(b.avg_width, a.avg_width * k, 1e-9 * a.avg_width * k + 1e-12);
        EXPECT_EQ(b.orientation_deg, a.orientation_deg);
        EXPECT_EQ(b.tortuosity, a.tortuosity);
        EXPECT_EQ(b.junction_count, a.junction_count);
        EXPECT_EQ(b.topology_class, a.topology_class);
        EXPECT_NEAR(b.avg_width * (b.length / k), static_cast<double>(foreground_count(m)) * k, 1e-9 * foreground_count(m) * k);
    }
}

TEST(FullReport, FlipAndRotationCovariance) {
    Rng rng(17);
    for (int t = 0; t < 60; ++t) {
        const Skeleton s = random_tree(rng, 41, 33, rng.uniform_int(10, 150));
        const JunctionSet j = extract_junctions(s);
        const MorphologyReport a = full_report(s.grid, s, j);
        const Skeleton f{flip_horizontal(s.grid), true};
        const MorphologyReport b = full_report(f.grid, f, extract_junctions(f));
        const Skeleton r{rotate_quarter(s.grid, 1), true};
        const MorphologyReport c = full_report(r.grid, r, extract_junctions(r));
        EXPECT_NEAR(b.length, a.length, 1e-9);
        EXPECT_NEAR(c.length, a.length, 1e-9);
        EXPECT_NEAR(b.avg_width, a.avg_width, 1e-12);
        EXPECT_EQ(b.junction_count, a.junction_count);
        EXPECT_EQ(c.junction_count, a.junction_count);
        ASSERT_EQ(b.tortuosity.has_value(), a.tortuosity.has_value());
        if (a.tortuosity) {
            EXPECT_NEAR(*b.tortuosity, *a.tortuosity, 1e-9);
            EXPECT_NEAR(*c.tortuosity, *a.tortuosity, 1e-9);
        }
        ASSERT_EQ(b.orientation_deg.has_value(), a.orientation_deg.has_value());
        if (a.orientation_deg) {
            auto axial = [](double d) { return std::min(std::fabs(d), 180.0 - std::fabs(d)); };
            EXPECT_LT(axial(*b.orientation_deg - std::fmod(180.0 - *a.orientation_deg, 180.0)), 1e-6);
            EXPECT_LT(axial(*c.orientation_deg - std::fmod(*a.orientation_deg + 90.0, 180.0)), 1e-6);
        }
    }
}
