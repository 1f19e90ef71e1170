#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fissure/dataset.hpp"
#include "fissure/metrics.hpp"
#include "fissure/objectives.hpp"
#include "grid_text.hpp"

using namespace fissure;

namespace {

Heatmap as_heatmap(const BinaryMask& m) {
    Heatmap h(m.width(), m.height());
    for (std::size_t i = 0; i < m.size(); ++i) h.data()[i] = m.data()[i] ? 1.0f : 0.0f;
    return h;
}

Heatmap values(int w, int h, std::initializer_list<float> v) {
    Heatmap out(w, h);
    std::copy(v.begin(), v.end(), out.data().begin());
    return out;
}

}  // namespace

TEST(DiceLoss, Examples) {
    const BinaryMask t = testutil::mask_from({"#.", ".#"});
    EXPECT_NEAR(dice_loss(as_heatmap(t), t), 0.0, 1e-6);
    EXPECT_NEAR(dice_loss(Heatmap(2, 2, 0.0f), t), 1.0, 1e-6);
    EXPECT_NEAR(dice_loss(Heatmap(2, 2, 0.5f), t), 0.5, 1e-6);
    EXPECT_THROW(dice_loss(Heatmap(3, 2, 0.5f), t), Error);
}

TEST(BceLoss, Examples) {
    const BinaryMask t = testutil::mask_from({"#."});
    EXPECT_NEAR(bce_loss(as_heatmap(t), t), 0.0, 1e-6);
    EXPECT_NEAR(bce_loss(Heatmap(2, 1, 0.5f), t), std::log(2.0), 1e-12);
    EXPECT_NEAR(bce_loss(values(2, 1, {0.9f, 0.1f}), t), -std::log(0.9), 1e-7);
}

TEST(SkeletonLoss, Examples) {
    const BinaryMask t = testutil::mask_from({"#.", ".#"});
    EXPECT_NEAR(skeleton_loss(as_heatmap(t), t), 0.0, 1e-5);
    EXPECT_NEAR(skeleton_loss(Heatmap(2, 2, 0.5f), t), 0.5 + std::log(2.0), 1e-6);
    LossConfig zero;
    zero.lambda1 = 0.0;
    const Heatmap p = values(2, 2, {0.2f, 0.7f, 0.4f, 0.9f});
    EXPECT_EQ(skeleton_loss(p, t, zero), dice_loss(p, t, zero));
}

TEST(HeatmapMse, Examples) {
    const Heatmap a = values(2, 1, {0.0f, 1.0f});
    EXPECT_EQ(heatmap_mse(a, a), 0.0);
    EXPECT_DOUBLE_EQ(heatmap_mse(Heatmap(4, 3, 0.0f), Heatmap(4, 3, 0.5f)), 0.25);
    EXPECT_DOUBLE_EQ(heatmap_mse(a, values(2, 1, {1.0f, 0.0f})), 1.0);
}

TEST(Losses, PropertiesOnRandomMaps) {
    Rng rng(41);
    for (int t = 0; t < 100; ++t) {
        const int w = rng.uniform_int(1, 12), h = rng.uniform_int(1, 12);
        Heatmap p(w, h), q(w, h);
        BinaryMask m(w, h);
        for (std::size_t i = 0; i < p.size(); ++i) {
            p.data()[i] = static_cast<float>(rng.uniform());
            q.data()[i] = static_cast<float>(rng.uniform());
            m.data()[i] = rng.uniform() < 0.3;
        }
        EXPECT_GE(dice_loss(p, m), 0.0);
        EXPECT_GE(bce_loss(p, m), 0.0);
        EXPECT_GE(heatmap_mse(p, q), 0.0);
        EXPECT_EQ(heatmap_mse(p, q), heatmap_mse(q, p));

        // Same permutation applied to both maps.
        std::vector<std::size_t> perm(p.size());
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);
        Heatmap pp(w, h), qq(w, h);
        BinaryMask mm(w, h);
        for (std::size_t i = 0; i < perm.size(); ++i) {
            pp.data()[i] = p.data()[perm[i]];
            qq.data()[i] = q.data()[perm[i]];
            mm.data()[i] = m.data()[perm[i]];
        }
        EXPECT_NEAR(dice_loss(pp, mm), dice_loss(p, m), 1e-12);
        EXPECT_NEAR(bce_loss(pp, mm), bce_loss(p, m), 1e-12);
        EXPECT_NEAR(heatmap_mse(pp, qq), heatmap_mse(p, q), 1e-12);

        LossConfig a, b;
        a.lambda1 = rng.uniform(0.0, 3.0);
        b.lambda1 = a.lambda1 + 1.0;
        EXPECT_NEAR(skeleton_loss(p, m, b) - skeleton_loss(p, m, a), bce_loss(p, m), 1e-9);

        // Binary predictions: Dice loss and the Dice coefficient sum to one.
        BinaryMask bin(w, h);
        for (std::size_t i = 0; i < bin.size(); ++i) bin.data()[i] = p.data()[i] >= 0.5f;
        const SegScore s = seg_score(bin, m);
        EXPECT_NEAR(dice_loss(as_heatmap(bin), m) + s.dice, 1.0, 1e-6);
    }
}
