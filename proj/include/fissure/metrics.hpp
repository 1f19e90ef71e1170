#pragma once

// Evaluation statistics: mask overlap, junction detection scores, descriptor
// agreement, topology confusion, topology preservation.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fissure/junction.hpp"
#include "fissure/raster.hpp"
#include "fissure/skeleton.hpp"

namespace fissure {

/// Half-up rounding to `decimals` places, used for every displayed number.
inline double round_half_up(double v, int decimals) {
    const double scale = std::pow(10.0, decimals);
    // Nudge by a few ulps so values like 0.8225 printed from binary don't round down.
    return std::floor(v * scale + 0.5 + 1e-9) / scale;
}

inline std::string format_fixed(double v, int decimals) {
    char buf[64];
    double r = round_half_up(v, decimals);
    if (r == 0.0) r = 0.0;  // no "-0.000"
    std::snprintf(buf, sizeof buf, "%.*f", decimals, r);
    return buf;
}

struct SegScore {
    double dice = 0.0;
    double iou = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    std::vector<std::string> notes;  ///< empty-set conventions that applied
};

/// Pixel overlap. Both empty: all four are 1. Exactly one empty: Dice and IoU
/// are 0 and the undefined ratio is reported as 0.
inline SegScore seg_score(const BinaryMask& pred, const BinaryMask& ref) {
    require_same_shape(pred, ref, "seg_score");
    long long inter = 0, np = 0, nr = 0;
    const auto p = pred.data();
    const auto r = ref.data();
    for (std::size_t i = 0; i < p.size(); ++i) {
        const bool a = p[i] != 0;
        const bool b = r[i] != 0;
        np += a;
        nr += b;
        inter += (a && b);
    }
    SegScore s;
    if (np == 0 && nr == 0) {
        s.dice = s.iou = s.precision = s.recall = 1.0;
        s.notes.push_back("both masks empty: all scores set to 1");
        return s;
    }
    const long long uni = np + nr - inter;
    s.dice = 2.0 * static_cast<double>(inter) / static_cast<double>(np + nr);
    s.iou = static_cast<double>(inter) / static_cast<double>(uni);
    if (np > 0) {
        s.precision = static_cast<double>(inter) / static_cast<double>(np);
    } else {
        s.notes.push_back("prediction empty: precision undefined, reported 0");
    }
    if (nr > 0) {
        s.recall = static_cast<double>(inter) / static_cast<double>(nr);
    } else {
        s.notes.push_back("reference empty: recall undefined, reported 0");
    }
    return s;
}

struct PRF {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Precision/recall/F1 from match counts. With nothing predicted and nothing
/// to find, all three are 1. With no predictions precision is 0; with no
/// references recall is 1.
inline PRF junction_prf(int tp, int fp, int fn) {
    PRF r;
    if (tp + fp == 0 && tp + fn == 0) return {1.0, 1.0, 1.0};
    r.precision = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    r.recall = (tp + fn) > 0 ? static_cast<double>(tp) / (tp + fn) : 1.0;
    r.f1 = (r.precision + r.recall) > 0.0 ? 2.0 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
    return r;
}

inline PRF junction_prf(const MatchResult& m) { return junction_prf(m.tp, m.fp, m.fn); }

struct ScoredMatch {
    double confidence = 0.0;
    bool is_tp = false;
};

/// Uninterpolated average precision: the mean over references of precision at
/// the rank of each true positive. Equal confidences rank false positives
/// first, so the result does not depend on input order.
inline double average_precision(std::vector<ScoredMatch> scored, int total_refs) {
    if (total_refs <= 0) return scored.empty() ? 1.0 : 0.0;
    std::sort(scored.begin(), scored.end(), [](const ScoredMatch& a, const ScoredMatch& b) {
        if (a.confidence != b.confidence) return a.confidence > b.confidence;
        return !a.is_tp && b.is_tp;
    });
    double sum = 0.0;
    int tp = 0;
    for (std::size_t i = 0; i < scored.size(); ++i) {
        if (!scored[i].is_tp) continue;
        ++tp;
        sum += static_cast<double>(tp) / static_cast<double>(i + 1);
    }
    return sum / static_cast<double>(total_refs);
}

struct DescriptorAgreement {
    std::size_t n = 0;
    double mae = 0.0;
    double rmse = 0.0;
    std::optional<double> mape_percent;  ///< absent when every reference is 0
    std::size_t mape_skipped = 0;        ///< reference entries equal to 0
    std::optional<double> pearson_r;     ///< absent for constant series
    std::vector<std::string> notes;
};

inline DescriptorAgreement descriptor_agreement(std::span<const double> pred, std::span<const double> ref) {
    if (pred.size() != ref.size()) {
        throw Error(ErrorCode::LengthMismatch, "series lengths " + std::to_string(pred.size()) + " vs " +
                                                   std::to_string(ref.size()));
    }
    if (pred.empty()) throw Error(ErrorCode::LengthMismatch, "series are empty");
    DescriptorAgreement a;
    a.n = pred.size();
    const double n = static_cast<double>(a.n);
    double abs_sum = 0.0, sq_sum = 0.0, pct_sum = 0.0;
    std::size_t pct_n = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double d = pred[i] - ref[i];
        abs_sum += std::abs(d);
        sq_sum += d * d;
        if (ref[i] != 0.0) {
            pct_sum += std::abs(d / ref[i]);
            ++pct_n;
        } else {
            ++a.mape_skipped;
        }
    }
    a.mae = abs_sum / n;
    a.rmse = std::sqrt(sq_sum / n);
    if (pct_n > 0) a.mape_percent = 100.0 * pct_sum / static_cast<double>(pct_n);
    if (a.mape_skipped > 0) a.notes.push_back("MAPE skipped " + std::to_string(a.mape_skipped) + " zero reference(s)");

    double mp = 0.0, mr = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        mp += pred[i];
        mr += ref[i];
    }
    mp /= n;
    mr /= n;
    double cov = 0.0, vp = 0.0, vr = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        cov += (pred[i] - mp) * (ref[i] - mr);
        vp += (pred[i] - mp) * (pred[i] - mp);
        vr += (ref[i] - mr) * (ref[i] - mr);
    }
    if (vp > 0.0 && vr > 0.0) {
        a.pearson_r = std::clamp(cov / std::sqrt(vp * vr), -1.0, 1.0);
    } else {
        a.notes.push_back("ConstantSeries: Pearson r undefined");
    }
    return a;
}

struct ConfusionMatrix {
    std::vector<std::string> classes;
    std::vector<std::vector<long long>> counts;  ///< rows = true class, columns = predicted
    std::vector<std::string> notes;

    long long total() const noexcept {
        long long t = 0;
        for (const auto& row : counts)
            for (long long c : row) t += c;
        return t;
    }
    long long trace() const noexcept {
        long long t = 0;
        for (std::size_t i = 0; i < counts.size(); ++i) t += counts[i][i];
        return t;
    }
    std::optional<double> accuracy() const noexcept {
        const long long t = total();
        if (t == 0) return std::nullopt;
        return static_cast<double>(trace()) / static_cast<double>(t);
    }
};

/// Builds a matrix from given cell counts (rows = true class).
inline ConfusionMatrix confusion_from_counts(std::vector<std::string> classes, std::vector<std::vector<long long>> counts) {
    if (counts.size() != classes.size()) throw Error(ErrorCode::LengthMismatch, "row count differs from class count");
    for (const auto& row : counts) {
        if (row.size() != classes.size()) throw Error(ErrorCode::LengthMismatch, "column count differs from class count");
        for (long long c : row)
            if (c < 0) throw Error(ErrorCode::ParamOutOfRange, "negative confusion count");
    }
    return ConfusionMatrix{std::move(classes), std::move(counts), {}};
}

inline ConfusionMatrix confusion(std::span<const std::string> true_labels, std::span<const std::string> pred_labels,
                                 std::vector<std::string> classes) {
    if (true_labels.size() != pred_labels.size()) {
        throw Error(ErrorCode::LengthMismatch, "label series lengths differ");
    }
    auto index_of = [&](const std::string& l) -> std::size_t {
        for (std::size_t i = 0; i < classes.size(); ++i)
            if (classes[i] == l) return i;
        throw Error(ErrorCode::UnknownLabel, "label '" + l + "' not in class list");
    };
    ConfusionMatrix m;
    m.counts.assign(classes.size(), std::vector<long long>(classes.size(), 0));
    for (std::size_t i = 0; i < true_labels.size(); ++i) {
        ++m.counts[index_of(true_labels[i])][index_of(pred_labels[i])];
    }
    m.classes = std::move(classes);
    return m;
}

/// Compares a separately stated accuracy with the one implied by the cells and
/// records a note when they disagree beyond display rounding.
inline bool check_stated_accuracy(ConfusionMatrix& m, double stated) {
    const auto acc = m.accuracy();
    if (!acc) return true;
    if (std::abs(*acc - stated) <= 0.0005) return true;
    m.notes.push_back("stated accuracy " + format_fixed(100.0 * stated, 1) + "% disagrees with cell counts: " +
                      std::to_string(m.trace()) + "/" + std::to_string(m.total()) + " = " +
                      format_fixed(100.0 * *acc, 1) + "%");
    return false;
}

struct PreservationRate {
    int preserved = 0;
    int total = 0;
    double fraction() const noexcept { return total > 0 ? static_cast<double>(preserved) / total : 0.0; }
    /// "p% (k/n)" with one decimal.
    std::string text() const { return format_fixed(100.0 * fraction(), 1) + "% (" + std::to_string(preserved) + "/" + std::to_string(total) + ")"; }
};

inline PreservationRate preservation_from_flags(const std::vector<bool>& flags) {
    if (flags.empty()) throw Error(ErrorCode::EmptyInput, "topology preservation needs at least one pair");
    PreservationRate r;
    r.total = static_cast<int>(flags.size());
    for (bool f : flags) r.preserved += f;
    return r;
}

inline PreservationRate topology_preservation_rate(std::span<const std::pair<Skeleton, Skeleton>> pairs) {
    std::vector<bool> flags;
    flags.reserve(pairs.size());
    for (const auto& [pred, ref] : pairs) flags.push_back(topology_preserved(pred, ref));
    return preservation_from_flags(flags);
}

/// Relative change from baseline to proposed, in percent.
inline double percent_change(double baseline, double proposed) {
    if (baseline == 0.0) throw Error(ErrorCode::ParamOutOfRange, "percent change from a zero baseline");
    return (proposed - baseline) / baseline * 100.0;
}

inline std::string signed_fixed(double v, int decimals) {
    std::string s = format_fixed(v, decimals);
    if (s[0] != '-') s = "+" + s;
    return s;
}

}  // namespace fissure
