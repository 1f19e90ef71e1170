#pragma once

// Pipeline configuration: defaults, key=value and JSON loading, validation,
// and a stable hash of the resolved values.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>

#include "fissure/junction.hpp"
#include "fissure/objectives.hpp"
#include "fissure/serialize.hpp"
#include "fissure/severity.hpp"
#include "fissure/skeleton.hpp"

namespace fissure {

enum class Predictor { Classical, ExternalMaps };

constexpr std::string_view to_string(Predictor p) noexcept {
    return p == Predictor::Classical ? "classical" : "external-maps";
}

inline Predictor predictor_from_string(std::string_view s) {
    if (s == "classical") return Predictor::Classical;
    if (s == "external-maps") return Predictor::ExternalMaps;
    throw Error(ErrorCode::InvalidConfig, "predictor must be classical or external-maps, got '" + std::string(s) + "'");
}

inline std::uint64_t fnv1a64(std::string_view bytes) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

namespace detail {

inline double parse_number(const std::string& key, const std::string& text) {
    std::size_t used = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &used);
    } catch (const std::exception&) {
        used = 0;
    }
    if (used == 0 || used != text.size() || !std::isfinite(v)) {
        throw Error(ErrorCode::InvalidConfig, "'" + key + "' needs a number, got '" + text + "'");
    }
    return v;
}

}  // namespace detail

struct PipelineConfig {
    Predictor predictor = Predictor::Classical;
    double skeleton_threshold = 0.5;
    double sigma = 5.0;
    std::optional<double> truncation_radius;  ///< defaults to 3 sigma
    double peak_threshold = 0.5;
    std::optional<double> nms_radius;  ///< defaults to 2 sigma
    double match_radius = 5.0;
    double prune_len = kDefaultPruneLength;
    double scale_mm_per_px = kDefaultScaleMmPerPx;
    SeverityParams severity;
    LossConfig loss;
    std::uint64_t seed = 0;

    // Run settings; they do not change results and are left out of the hash.
    int jobs = 1;
    std::filesystem::path out = "out";
    std::filesystem::path maps;  ///< root holding skeleton_prob/ and junction_prob/

    HeatmapSpec heatmap_spec() const { return {sigma, truncation_radius.value_or(3.0 * sigma)}; }
    double resolved_nms_radius() const { return nms_radius.value_or(2.0 * sigma); }

    void validate() const {
        auto fail = [](const std::string& m) { throw Error(ErrorCode::InvalidConfig, m); };
        if (!(skeleton_threshold >= 0.0 && skeleton_threshold <= 1.0)) fail("skeleton_threshold must be in [0,1]");
        if (!(peak_threshold >= 0.0 && peak_threshold <= 1.0)) fail("peak_threshold must be in [0,1]");
        if (!(resolved_nms_radius() >= 1.0)) fail("nms_radius must be >= 1");
        if (!(match_radius > 0.0)) fail("match_radius must be > 0");
        if (!(prune_len >= 0.0)) fail("prune_len must be >= 0");
        if (!(scale_mm_per_px > 0.0)) fail("scale_mm_per_px must be > 0");
        if (jobs < 1) fail("jobs must be >= 1");
        try {
            heatmap_spec().validate();
            severity.validate();
            loss.validate();
        } catch (const Error& e) {
            fail(e.what());
        }
    }

    /// Resolved values in a fixed key order.
    Json to_json() const {
        return {
            {"predictor", std::string(to_string(predictor))},
            {"skeleton_threshold", skeleton_threshold},
            {"sigma", sigma},
            {"truncation_radius", heatmap_spec().truncation_radius},
            {"peak_threshold", peak_threshold},
            {"nms_radius", resolved_nms_radius()},
            {"match_radius", match_radius},
            {"prune_len", prune_len},
            {"scale_mm_per_px", scale_mm_per_px},
            {"severity", fissure::to_json(severity)},
            {"lambda1", loss.lambda1},
            {"epsilon", loss.epsilon},
            {"seed", seed},
        };
    }

    std::string hash() const {
        char buf[17];
        std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(to_json().dump())));
        return buf;
    }

    /// Sets one key from its text form. Used for both config files and CLI flags.
    void set(const std::string& key, const std::string& value) {
        auto num = [&]() { return detail::parse_number(key, value); };
        auto integer = [&]() -> long long {
            const double v = num();
            if (v != std::floor(v)) throw Error(ErrorCode::InvalidConfig, "'" + key + "' needs an integer, got '" + value + "'");
            return static_cast<long long>(v);
        };
        if (key == "predictor") {
            predictor = predictor_from_string(value);
        } else if (key == "skeleton_threshold") {
            skeleton_threshold = num();
        } else if (key == "sigma") {
            sigma = num();
        } else if (key == "truncation_radius") {
            truncation_radius = num();
        } else if (key == "peak_threshold") {
            peak_threshold = num();
        } else if (key == "nms_radius") {
            nms_radius = num();
        } else if (key == "match_radius") {
            match_radius = num();
        } else if (key == "prune_len") {
            prune_len = num();
        } else if (key == "scale_mm_per_px") {
            scale_mm_per_px = num();
        } else if (key == "stress_proxy") {
            severity.stress_proxy = num();
        } else if (key == "ref_width") {
            severity.ref_width = num();
        } else if (key == "band_edges") {
            std::array<double, 3> edges{};
            std::istringstream in(value);
            std::string part;
            std::size_t n = 0;
            while (std::getline(in, part, ',')) {
                if (n == 3) throw Error(ErrorCode::InvalidConfig, "band_edges needs exactly 3 values");
                edges[n++] = detail::parse_number(key, part);
            }
            if (n != 3) throw Error(ErrorCode::InvalidConfig, "band_edges needs exactly 3 values");
            severity.band_edges = edges;
        } else if (key.rfind("geometry_factor.", 0) == 0) {
            const TopologyClass c = [&] {
                try {
                    return topology_class_from_string(key.substr(16));
                } catch (const Error&) {
                    throw Error(ErrorCode::InvalidConfig, "unknown geometry factor class in '" + key + "'");
                }
            }();
            severity.geometry_factor[c] = num();
        } else if (key == "lambda1") {
            loss.lambda1 = num();
        } else if (key == "epsilon") {
            loss.epsilon = num();
        } else if (key == "seed") {
            std::size_t used = 0;
            try {
                if (value.empty() || value[0] == '-') throw std::invalid_argument("sign");
                seed = std::stoull(value, &used, 10);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used == 0 || used != value.size()) {
                throw Error(ErrorCode::InvalidConfig, "seed needs an unsigned 64-bit integer, got '" + value + "'");
            }
        } else if (key == "jobs") {
            jobs = static_cast<int>(integer());
        } else if (key == "out") {
            out = value;
        } else if (key == "maps") {
            maps = value;
        } else {
            throw Error(ErrorCode::InvalidConfig, "unknown key '" + key + "'");
        }
    }

    void set_json(const std::string& key, const Json& v) {
        if (v.is_object()) {
            for (const auto& [k, sub] : v.items()) set_json(key + "." + k, sub);
        } else if (v.is_array()) {
            std::string joined;
            for (const auto& e : v) {
                if (!joined.empty()) joined += ",";
                joined += e.is_string() ? e.get<std::string>() : e.dump();
            }
            set(key, joined);
        } else if (v.is_string()) {
            set(key, v.get<std::string>());
        } else if (v.is_number()) {
            set(key, v.dump());
        } else {
            throw Error(ErrorCode::InvalidConfig, "'" + key + "' has an unsupported value type");
        }
    }

    /// Loads a JSON object or flat key=value lines ('#' starts a comment).
    void load_file(const std::filesystem::path& path) {
        std::string text;
        try {
            text = read_text(path);
        } catch (const Error& e) {
            throw Error(ErrorCode::InvalidConfig, e.what());
        }
        const auto first = text.find_first_not_of(" \t\r\n");
        if (first != std::string::npos && text[first] == '{') {
            Json doc;
            try {
                doc = Json::parse(text);
            } catch (const nlohmann::json::parse_error& e) {
                throw Error(ErrorCode::InvalidConfig, path.string() + ": " + e.what());
            }
            for (const auto& [k, v] : doc.items()) {
                if (k == "severity" && v.is_object()) {
                    for (const auto& [sk, sv] : v.items()) set_json(sk, sv);
                } else {
                    set_json(k, v);
                }
            }
            return;
        }
        std::istringstream in(text);
        std::string line;
        std::size_t n = 0;
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            if (a == std::string::npos) return std::string();
            const auto b = s.find_last_not_of(" \t\r");
            return s.substr(a, b - a + 1);
        };
        while (std::getline(in, line)) {
            ++n;
            if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            const auto eq = line.find('=');
            if (eq == std::string::npos) {
                throw Error(ErrorCode::InvalidConfig, path.string() + ":" + std::to_string(n) + ": expected key=value");
            }
            try {
                set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
            } catch (const Error& e) {
                throw Error(ErrorCode::InvalidConfig, path.string() + ":" + std::to_string(n) + ": " + e.what());
            }
        }
    }
};

}  // namespace fissure
