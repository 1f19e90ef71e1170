#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "fissure/dataset.hpp"
#include "fissure/severity.hpp"

using namespace fissure;

namespace {

MorphologyReport report(double length, double width, std::optional<double> tort, TopologyClass c) {
    MorphologyReport r;
    r.length = length;
    r.avg_width = width;
    r.tortuosity = tort;
    r.topology_class = c;
    return r;
}

}  // namespace

TEST(Severity, CoreReducesToSqrtPiLength) {
    const SeverityResult r = severity_index(report(1.0, 0.0, std::nullopt, TopologyClass::Linear));
    EXPECT_NEAR(r.index, std::sqrt(std::numbers::pi), 1e-12);
    EXPECT_DOUBLE_EQ(r.tortuosity_used, 1.0);
    SeverityParams p;
    p.stress_proxy = 2.5;
    const double a = 37.0;
    EXPECT_NEAR(severity_index(report(a, 0.0, 1.0, TopologyClass::Linear), p).index, 2.5 * std::sqrt(std::numbers::pi * a), 1e-12);
}

TEST(Severity, ZeroLengthIsLow) {
    const SeverityResult r = severity_index(report(0.0, 3.0, std::nullopt, TopologyClass::Linear));
    EXPECT_EQ(r.index, 0.0);
    EXPECT_EQ(r.band, SeverityBand::Low);
}

TEST(Severity, NetworkOverLinearIsGeometryFactorRatio) {
    const double lin = severity_index(report(120.0, 2.5, 1.3, TopologyClass::Linear)).index;
    const double net = severity_index(report(120.0, 2.5, 1.3, TopologyClass::Network)).index;
    EXPECT_NEAR(net / lin, 1.4, 1e-12);
}

TEST(Severity, MissingLengthAndBadParams) {
    try {
        severity_index(report(std::nan(""), 1.0, std::nullopt, TopologyClass::Linear));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::MissingDescriptor);
    }
    SeverityParams p;
    p.band_edges = {10.0, 5.0, 20.0};
    EXPECT_THROW(severity_index(report(1.0, 1.0, std::nullopt, TopologyClass::Linear), p), Error);
}

TEST(Severity, MonotoneInEachInput) {
    Rng rng(3);
    for (int t = 0; t < 500; ++t) {
        const double L = rng.uniform(0.0, 500.0), W = rng.uniform(0.0, 10.0), T = rng.uniform(1.0, 3.0);
        const auto c = kTopologyClasses[static_cast<std::size_t>(rng.uniform_int(0, 3))];
        const double base = severity_index(report(L, W, T, c)).index;
        EXPECT_GE(severity_index(report(L + rng.uniform(0.0, 50.0), W, T, c)).index, base);
        EXPECT_GE(severity_index(report(L, W + rng.uniform(0.0, 5.0), T, c)).index, base);
        EXPECT_GE(severity_index(report(L, W, T + rng.uniform(0.0, 1.0), c)).index, base);
        if (c != TopologyClass::Network) {
            const auto up = kTopologyClasses[static_cast<std::size_t>(static_cast<int>(c) + 1)];
            EXPECT_GE(severity_index(report(L, W, T, up)).index, base);
        }
    }
}

TEST(Severity, BandsFollowEdges) {
    const std::array<double, 3> e{1.0, 2.0, 3.0};
    EXPECT_EQ(severity_band(0.99, e), SeverityBand::Low);
    EXPECT_EQ(severity_band(1.0, e), SeverityBand::Moderate);
    EXPECT_EQ(severity_band(2.5, e), SeverityBand::High);
    EXPECT_EQ(severity_band(3.0, e), SeverityBand::Critical);
    SeverityParams p;
    p.band_edges = e;
    const SeverityResult r = severity_index(report(1.0, 0.0, std::nullopt, TopologyClass::Linear), p);
    EXPECT_EQ(r.band, severity_band(r.index, e));
    EXPECT_EQ(r.band, SeverityBand::Moderate);
}
