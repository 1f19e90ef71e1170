#pragma once

// JSON encodings of graphs, junction sets, reports, severity results and
// synthetic ground truth. Key order is fixed so output is byte-stable.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include "json.hpp"

#include "fissure/dataset.hpp"
#include "fissure/descriptors.hpp"
#include "fissure/junction.hpp"
#include "fissure/severity.hpp"
#include "fissure/skeleton.hpp"

namespace fissure {

using Json = nlohmann::ordered_json;

template <class T>
Json optional_json(const std::optional<T>& v) {
    return v ? Json(*v) : Json(nullptr);
}

inline Json point_json(PixelCoord p) { return Json::array({p.x, p.y}); }

inline Json to_json(const SkeletonGraph& g) {
    Json nodes = Json::array();
    for (const auto& n : g.nodes) nodes.push_back({{"x", n.pos.x}, {"y", n.pos.y}, {"degree", n.degree}});
    Json edges = Json::array();
    for (const auto& e : g.edges) {
        Json path = Json::array();
        for (PixelCoord p : e.path) path.push_back(point_json(p));
        edges.push_back({{"from", e.from}, {"to", e.to}, {"length_px", e.steps.value()}, {"path", std::move(path)}});
    }
    return {{"nodes", std::move(nodes)}, {"edges", std::move(edges)}, {"components", g.components}, {"cycles", g.cycles}};
}

inline Json to_json(const JunctionSet& j) {
    Json points = Json::array();
    for (std::size_t i = 0; i < j.points.size(); ++i) {
        const float c = i < j.confidences.size() ? j.confidences[i] : 1.0f;
        points.push_back({{"x", j.points[i].x}, {"y", j.points[i].y}, {"confidence", static_cast<double>(c)}});
    }
    return {{"points", std::move(points)}};
}

inline JunctionSet junctions_from_json(const Json& doc) {
    JunctionSet out;
    if (!doc.is_object() || !doc.contains("points") || !doc["points"].is_array()) {
        throw Error(ErrorCode::FormatMismatch, "junction set needs a 'points' array");
    }
    for (const auto& p : doc["points"]) {
        if (!p.is_object() || !p.contains("x") || !p.contains("y")) {
            throw Error(ErrorCode::FormatMismatch, "junction point needs x and y");
        }
        const double c = p.value("confidence", 1.0);
        if (!(c >= 0.0 && c <= 1.0)) throw Error(ErrorCode::FormatMismatch, "junction confidence outside [0,1]");
        out.add({p["x"].get<int>(), p["y"].get<int>()}, static_cast<float>(c));
    }
    return out;
}

/// The report's descriptor keys; notes on absent values are kept separately.
inline Json to_json(const MorphologyReport& r) {
    Json endpoints = nullptr;
    if (r.endpoints_used) endpoints = Json::array({point_json(r.endpoints_used->first), point_json(r.endpoints_used->second)});
    return {
        {"length", r.length},
        {"avg_width", r.avg_width},
        {"orientation_deg", optional_json(r.orientation_deg)},
        {"junction_count", r.junction_count},
        {"tortuosity", optional_json(r.tortuosity)},
        {"topology_class", std::string(to_string(r.topology_class))},
        {"scale_mm_per_px", r.scale_mm_per_px},
        {"components", r.components},
        {"endpoints_used", std::move(endpoints)},
    };
}

inline Json notes_json(const MorphologyReport& r) {
    Json n = Json::object();
    for (const auto& [k, v] : r.notes) n[k] = v;
    return n;
}

inline Json to_json(const SeverityParams& p) {
    Json gf = Json::object();
    for (TopologyClass c : kTopologyClasses) gf[std::string(to_string(c))] = p.geometry_factor.at(c);
    return {
        {"geometry_factor", std::move(gf)},
        {"stress_proxy", p.stress_proxy},
        {"ref_width", p.ref_width},
        {"band_edges", Json::array({p.band_edges[0], p.band_edges[1], p.band_edges[2]})},
    };
}

inline Json to_json(const SeverityResult& s) {
    return {
        {"index", s.index},
        {"band", std::string(to_string(s.band))},
        {"formula", std::string(kSeverityFormula)},
        {"inputs",
         {{"length", s.length},
          {"avg_width", s.avg_width},
          {"tortuosity_used", s.tortuosity_used},
          {"geometry_factor", s.geometry_factor},
          {"topology_class", std::string(to_string(s.topology_class))}}},
        {"params", to_json(s.params)},
    };
}

inline Json to_json(const GroundTruth& t) {
    Json junctions = Json::array();
    for (PixelCoord p : t.junctions) junctions.push_back(point_json(p));
    return {
        {"kind", t.kind},
        {"exact", t.exact},
        {"length_px", t.length_px},
        {"junction_count", t.junction_count},
        {"junction_count_max", t.junction_count_max},
        {"topology_class", std::string(to_string(t.topology_class))},
        {"components", t.components},
        {"cycles", t.cycles},
        {"orientation_deg", optional_json(t.orientation_deg)},
        {"tortuosity", optional_json(t.tortuosity)},
        {"isotropic", t.isotropic},
        {"pure_cycle", t.pure_cycle},
        {"junctions", std::move(junctions)},
    };
}

inline GroundTruth ground_truth_from_json(const Json& j) {
    GroundTruth t;
    try {
        t.kind = j.at("kind").get<std::string>();
        t.exact = j.at("exact").get<bool>();
        t.length_px = j.at("length_px").get<double>();
        t.junction_count = j.at("junction_count").get<std::size_t>();
        t.junction_count_max = j.at("junction_count_max").get<std::size_t>();
        t.topology_class = topology_class_from_string(j.at("topology_class").get<std::string>());
        t.components = j.at("components").get<int>();
        t.cycles = j.at("cycles").get<int>();
        if (!j.at("orientation_deg").is_null()) t.orientation_deg = j["orientation_deg"].get<double>();
        if (!j.at("tortuosity").is_null()) t.tortuosity = j["tortuosity"].get<double>();
        t.isotropic = j.at("isotropic").get<bool>();
        t.pure_cycle = j.at("pure_cycle").get<bool>();
        for (const auto& p : j.at("junctions")) t.junctions.push_back({p.at(0).get<int>(), p.at(1).get<int>()});
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::FormatMismatch, std::string("ground truth: ") + e.what());
    }
    return t;
}

inline std::string dump_pretty(const Json& j) { return j.dump(2) + "\n"; }

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::UnreadableFile, "cannot write " + path.string());
    out << text;
    if (!out) throw Error(ErrorCode::UnreadableFile, "write failed for " + path.string());
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::UnreadableFile, "cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline Json read_json(const std::filesystem::path& path) {
    try {
        return Json::parse(read_text(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::FormatMismatch, path.string() + ": " + e.what());
    }
}

inline void save_junctions(const std::filesystem::path& path, const JunctionSet& j) { write_text(path, dump_pretty(to_json(j))); }

inline JunctionSet load_junctions(const std::filesystem::path& path) { return junctions_from_json(read_json(path)); }

}  // namespace fissure
