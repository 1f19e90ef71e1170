#pragma once

// Corpus manifests: one JSON object per line, paths relative to the
// manifest's directory.

#include <algorithm>
#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fissure/serialize.hpp"

namespace fissure {

inline constexpr std::array<std::string_view, 3> kSplits = {"train", "val", "test"};

struct SampleRecord {
    std::string id;
    std::string image;
    std::string mask;
    std::optional<std::string> skeleton;
    std::optional<std::string> heatmap;
    std::optional<std::string> junctions;
    std::optional<std::string> topology_label;
    std::string split = "train";
    std::optional<Json> ground_truth;
};

struct Manifest {
    std::filesystem::path base_dir;  ///< directory relative paths are resolved against
    std::vector<SampleRecord> records;

    std::filesystem::path resolve(const std::string& rel) const { return base_dir / rel; }

    std::map<std::string, std::size_t> split_counts() const {
        std::map<std::string, std::size_t> out;
        for (std::string_view s : kSplits) out[std::string(s)] = 0;
        for (const auto& r : records) ++out[r.split];
        return out;
    }
};

inline Json to_json(const SampleRecord& r) {
    Json j = Json::object();
    j["id"] = r.id;
    j["image"] = r.image;
    j["mask"] = r.mask;
    if (r.skeleton) j["skeleton"] = *r.skeleton;
    if (r.heatmap) j["heatmap"] = *r.heatmap;
    if (r.junctions) j["junctions"] = *r.junctions;
    if (r.topology_label) j["topology_label"] = *r.topology_label;
    j["split"] = r.split;
    if (r.ground_truth) j["ground_truth"] = *r.ground_truth;
    return j;
}

namespace detail {

inline std::string require_string(const Json& j, const char* key, std::size_t line) {
    if (!j.contains(key)) throw Error(ErrorCode::MalformedManifest, "line " + std::to_string(line) + ": missing '" + key + "'");
    if (!j[key].is_string()) throw Error(ErrorCode::MalformedManifest, "line " + std::to_string(line) + ": '" + key + "' must be a string");
    return j[key].get<std::string>();
}

inline std::optional<std::string> optional_string(const Json& j, const char* key, std::size_t line) {
    if (!j.contains(key) || j[key].is_null()) return std::nullopt;
    return require_string(j, key, line);
}

}  // namespace detail

inline SampleRecord record_from_json(const Json& j, std::size_t line) {
    if (!j.is_object()) throw Error(ErrorCode::MalformedManifest, "line " + std::to_string(line) + ": not a JSON object");
    SampleRecord r;
    r.id = detail::require_string(j, "id", line);
    if (r.id.empty()) throw Error(ErrorCode::MalformedManifest, "line " + std::to_string(line) + ": empty id");
    r.image = detail::require_string(j, "image", line);
    r.mask = detail::require_string(j, "mask", line);
    r.skeleton = detail::optional_string(j, "skeleton", line);
    r.heatmap = detail::optional_string(j, "heatmap", line);
    r.junctions = detail::optional_string(j, "junctions", line);
    r.topology_label = detail::optional_string(j, "topology_label", line);
    if (r.topology_label) {
        try {
            topology_class_from_string(*r.topology_label);
        } catch (const Error&) {
            throw Error(ErrorCode::MalformedManifest, "line " + std::to_string(line) + ": unknown topology label '" + *r.topology_label + "'");
        }
    }
    r.split = detail::require_string(j, "split", line);
    if (std::find(kSplits.begin(), kSplits.end(), r.split) == kSplits.end()) {
        throw Error(ErrorCode::MalformedManifest, "line " + std::to_string(line) + ": split must be train, val or test");
    }
    if (j.contains("ground_truth") && !j["ground_truth"].is_null()) r.ground_truth = j["ground_truth"];
    return r;
}

inline Manifest parse_manifest(const std::string& text, std::filesystem::path base_dir = {}) {
    Manifest m;
    m.base_dir = std::move(base_dir);
    std::istringstream in(text);
    std::string line;
    std::size_t n = 0;
    std::map<std::string, std::size_t> seen;
    while (std::getline(in, line)) {
        ++n;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        Json j;
        try {
            j = Json::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw Error(ErrorCode::MalformedManifest, "line " + std::to_string(n) + ": " + e.what());
        }
        SampleRecord r = record_from_json(j, n);
        if (auto it = seen.find(r.id); it != seen.end()) {
            throw Error(ErrorCode::MalformedManifest,
                        "line " + std::to_string(n) + ": duplicate id '" + r.id + "' (first on line " + std::to_string(it->second) + ")");
        }
        seen[r.id] = n;
        m.records.push_back(std::move(r));
    }
    return m;
}

inline std::string format_manifest(const std::vector<SampleRecord>& records) {
    std::string out;
    for (const auto& r : records) out += to_json(r).dump() + "\n";
    return out;
}

inline Manifest read_manifest(const std::filesystem::path& path) {
    return parse_manifest(read_text(path), path.parent_path());
}

inline void write_manifest(const std::filesystem::path& path, const std::vector<SampleRecord>& records) {
    write_text(path, format_manifest(records));
}

/// Throws MissingFile naming the first record whose referenced file is absent.
inline void verify_files(const Manifest& m) {
    for (const auto& r : m.records) {
        auto check = [&](const char* what, const std::optional<std::string>& rel) {
            if (!rel) return;
            const auto p = m.resolve(*rel);
            if (!std::filesystem::is_regular_file(p)) {
                throw Error(ErrorCode::MissingFile, "sample '" + r.id + "': " + what + " " + p.string() + " not found");
            }
        };
        check("image", r.image);
        check("mask", r.mask);
        check("skeleton", r.skeleton);
        check("heatmap", r.heatmap);
        check("junctions", r.junctions);
    }
}

}  // namespace fissure
