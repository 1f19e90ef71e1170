#pragma once

// Loss evaluators for skeleton probability maps (soft Dice + BCE) and
// junction heatmaps (pixel MSE). Values only; no gradients.

#include <algorithm>
#include <cmath>

#include "fissure/raster.hpp"

namespace fissure {

struct LossConfig {
    double lambda1 = 1.0;
    double epsilon = 1e-7;

    void validate() const {
        if (!(lambda1 >= 0.0)) throw Error(ErrorCode::ParamOutOfRange, "lambda1 must be >= 0");
        if (!(epsilon > 0.0 && epsilon < 1e-3)) throw Error(ErrorCode::ParamOutOfRange, "epsilon must be in (0, 1e-3)");
    }
};

/// 1 - (2 sum(p t) + eps) / (sum(p) + sum(t) + eps).
inline double dice_loss(const Heatmap& pred, const BinaryMask& target, const LossConfig& cfg = {}) {
    cfg.validate();
    require_same_shape(pred, target, "dice_loss");
    double inter = 0.0, sp = 0.0, st = 0.0;
    const auto p = pred.data();
    const auto t = target.data();
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double tv = t[i] ? 1.0 : 0.0;
        inter += p[i] * tv;
        sp += p[i];
        st += tv;
    }
    return 1.0 - (2.0 * inter + cfg.epsilon) / (sp + st + cfg.epsilon);
}

/// Mean binary cross-entropy with predictions clamped to [eps, 1 - eps].
inline double bce_loss(const Heatmap& pred, const BinaryMask& target, const LossConfig& cfg = {}) {
    cfg.validate();
    require_same_shape(pred, target, "bce_loss");
    const auto p = pred.data();
    const auto t = target.data();
    if (p.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double q = std::clamp(static_cast<double>(p[i]), cfg.epsilon, 1.0 - cfg.epsilon);
        sum -= t[i] ? std::log(q) : std::log(1.0 - q);
    }
    return sum / static_cast<double>(p.size());
}

inline double skeleton_loss(const Heatmap& pred, const BinaryMask& target, const LossConfig& cfg = {}) {
    return dice_loss(pred, target, cfg) + cfg.lambda1 * bce_loss(pred, target, cfg);
}

/// Mean squared difference over all pixels.
inline double heatmap_mse(const Heatmap& pred, const Heatmap& target) {
    require_same_shape(pred, target, "heatmap_mse");
    const auto p = pred.data();
    const auto t = target.data();
    if (p.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double d = static_cast<double>(t[i]) - static_cast<double>(p[i]);
        sum += d * d;
    }
    return sum / static_cast<double>(p.size());
}

}  // namespace fissure
