#pragma once

// Screening-oriented severity index. The core is the Mode-I form
// K = Y * stress * sqrt(pi * a) with a = crack length; width and tortuosity
// enter as multiplicative weights. Every constant is a placeholder meant to
// be tuned per deployment and is echoed with each result.

#include <array>
#include <cmath>
#include <map>
#include <numbers>
#include <string>
#include <string_view>

#include "fissure/descriptors.hpp"

namespace fissure {

enum class SeverityBand { Low, Moderate, High, Critical };

constexpr std::string_view to_string(SeverityBand b) noexcept {
    switch (b) {
    case SeverityBand::Low: return "low";
    case SeverityBand::Moderate: return "moderate";
    case SeverityBand::High: return "high";
    case SeverityBand::Critical: return "critical";
    }
    return "low";
}

struct SeverityParams {
    std::map<TopologyClass, double> geometry_factor = {
        {TopologyClass::Linear, 1.0},
        {TopologyClass::Branched, 1.12},
        {TopologyClass::Complex, 1.25},
        {TopologyClass::Network, 1.4},
    };
    double stress_proxy = 1.0;
    double ref_width = 1.0;
    std::array<double, 3> band_edges = {25.0, 75.0, 200.0};

    void validate() const {
        for (TopologyClass c : kTopologyClasses) {
            auto it = geometry_factor.find(c);
            if (it == geometry_factor.end() || !(it->second > 0.0)) {
                throw Error(ErrorCode::ParamOutOfRange,
                            "geometry factor for " + std::string(to_string(c)) + " must be > 0");
            }
        }
        if (!(stress_proxy >= 0.0)) throw Error(ErrorCode::ParamOutOfRange, "stress proxy must be >= 0");
        if (!(ref_width > 0.0)) throw Error(ErrorCode::ParamOutOfRange, "reference width must be > 0");
        if (!(band_edges[0] < band_edges[1] && band_edges[1] < band_edges[2])) {
            throw Error(ErrorCode::ParamOutOfRange, "band edges must be strictly ascending");
        }
    }
};

inline constexpr std::string_view kSeverityFormula =
    "Y(topology_class) * stress_proxy * sqrt(pi * length) * (1 + avg_width / ref_width) * tortuosity_or_1";

struct SeverityResult {
    double index = 0.0;
    SeverityBand band = SeverityBand::Low;
    // Inputs echoed for auditability.
    double length = 0.0;
    double avg_width = 0.0;
    double tortuosity_used = 1.0;
    double geometry_factor = 1.0;
    TopologyClass topology_class = TopologyClass::Linear;
    SeverityParams params;
};

inline SeverityBand severity_band(double index, const std::array<double, 3>& edges) noexcept {
    if (index < edges[0]) return SeverityBand::Low;
    if (index < edges[1]) return SeverityBand::Moderate;
    if (index < edges[2]) return SeverityBand::High;
    return SeverityBand::Critical;
}

inline SeverityResult severity_index(const MorphologyReport& report, const SeverityParams& params = {}) {
    params.validate();
    if (!std::isfinite(report.length)) throw Error(ErrorCode::MissingDescriptor, "length is absent");
    if (report.length < 0.0) throw Error(ErrorCode::ParamOutOfRange, "length must be >= 0");
    if (!std::isfinite(report.avg_width)) throw Error(ErrorCode::MissingDescriptor, "avg_width is absent");

    SeverityResult r;
    r.length = report.length;
    r.avg_width = report.avg_width;
    r.topology_class = report.topology_class;
    r.geometry_factor = params.geometry_factor.at(report.topology_class);
    r.tortuosity_used = report.tortuosity.value_or(1.0);
    r.params = params;
    r.index = r.geometry_factor * params.stress_proxy * std::sqrt(std::numbers::pi * report.length) *
              (1.0 + report.avg_width / params.ref_width) * r.tortuosity_used;
    r.band = severity_band(r.index, params.band_edges);
    return r;
}

}  // namespace fissure
