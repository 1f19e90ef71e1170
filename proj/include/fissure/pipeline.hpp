#pragma once

// Corpus commands: synthetic generation, annotation extension, analysis,
// evaluation, baseline comparison, loss reporting and reference-map export.
// Each returns a process exit status: 0 success, 1 some samples failed.
// Configuration and I/O problems that stop a whole command are thrown as
// fissure::Error and mapped to status 2 by the caller.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "fissure/config.hpp"
#include "fissure/dataset.hpp"
#include "fissure/descriptors.hpp"
#include "fissure/io.hpp"
#include "fissure/junction.hpp"
#include "fissure/manifest.hpp"
#include "fissure/metrics.hpp"
#include "fissure/objectives.hpp"
#include "fissure/serialize.hpp"
#include "fissure/severity.hpp"
#include "fissure/skeleton.hpp"

namespace fissure {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitSampleFailures = 1;
inline constexpr int kExitConfigError = 2;

/// Runs f(0..n-1) on up to `jobs` threads. Callers store results by index, so
/// output never depends on scheduling.
template <class F>
void parallel_for(std::size_t n, int jobs, F&& f) {
    const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = next++; i < n; i = next++) f(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

struct SampleFailure {
    std::string id;
    std::string code;
    std::string message;
};

inline Json to_json(const SampleFailure& f) { return {{"id", f.id}, {"code", f.code}, {"message", f.message}}; }

namespace detail {

template <class F>
std::optional<SampleFailure> guarded(const std::string& id, F&& f) {
    try {
        f();
        return std::nullopt;
    } catch (const Error& e) {
        return SampleFailure{id, std::string(to_string(e.code())), e.what()};
    } catch (const std::exception& e) {
        return SampleFailure{id, "InternalError", e.what()};
    }
}

inline void report_failures(const std::vector<SampleFailure>& failures, std::ostream& err) {
    for (const auto& f : failures) err << "sample '" << f.id << "' failed: " << f.message << "\n";
}

inline void make_dirs(const fs::path& root, std::initializer_list<const char*> subdirs) {
    std::error_code ec;
    fs::create_directories(root, ec);
    for (const char* d : subdirs) fs::create_directories(root / d, ec);
    if (!fs::is_directory(root)) throw Error(ErrorCode::UnreadableFile, "cannot create output directory " + root.string());
}

inline std::string relative_path(const fs::path& target, const fs::path& base) {
    return fs::relative(fs::absolute(target), fs::absolute(base)).generic_string();
}

/// Fixed 50/10/40 split pattern by sample index.
inline std::string split_for_index(std::size_t i) {
    const std::size_t r = i % 10;
    if (r < 5) return "train";
    if (r == 5) return "val";
    return "test";
}

inline std::string labels_csv(const std::vector<std::pair<SampleRecord, std::size_t>>& rows) {
    std::string out = "id,topology_class,junction_count\n";
    for (const auto& [rec, n] : rows) out += rec.id + "," + rec.topology_label.value_or("") + "," + std::to_string(n) + "\n";
    return out;
}

inline void write_layers(const fs::path& out, SampleRecord& rec, const ExtendedLayers& x) {
    const std::string& id = rec.id;
    save_mask(out / "skeletons" / (id + ".png"), x.skeleton.grid);
    save_heatmap(out / "heatmaps" / (id + ".fgrid"), x.heatmap);
    save_junctions(out / "junctions" / (id + ".json"), x.junctions);
    rec.skeleton = "skeletons/" + id + ".png";
    rec.heatmap = "heatmaps/" + id + ".fgrid";
    rec.junctions = "junctions/" + id + ".json";
    rec.topology_label = std::string(to_string(x.topology_class));
}

inline Json topology_counts(const std::vector<TopologyClass>& classes) {
    Json j = Json::object();
    for (TopologyClass c : kTopologyClasses) j[std::string(to_string(c))] = std::count(classes.begin(), classes.end(), c);
    return j;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Synthetic corpus

struct SynthOptions {
    std::size_t count = 10;
    std::vector<ShapeKind> kinds{kShapeKinds.begin(), kShapeKinds.end()};
    int canvas = 160;
};

inline int run_synth(const SynthOptions& opt, const PipelineConfig& cfg, std::ostream& log = std::cout,
                     std::ostream& err = std::cerr) {
    cfg.validate();
    if (opt.count == 0) throw Error(ErrorCode::ParamOutOfRange, "count must be > 0");
    if (opt.kinds.empty()) throw Error(ErrorCode::ParamOutOfRange, "at least one shape kind is needed");
    if (opt.canvas < 96) throw Error(ErrorCode::ParamOutOfRange, "canvas must be >= 96");
    detail::make_dirs(cfg.out, {"images", "masks", "skeletons", "heatmaps", "junctions"});

    std::vector<std::pair<SampleRecord, std::size_t>> rows(opt.count);
    std::vector<std::optional<SampleFailure>> failed(opt.count);
    std::vector<TopologyClass> classes(opt.count);
    parallel_for(opt.count, cfg.jobs, [&](std::size_t i) {
        const ShapeKind kind = opt.kinds[i % opt.kinds.size()];
        char id[64];
        std::snprintf(id, sizeof id, "synth_%05zu_%s", i, std::string(to_string(kind)).c_str());
        failed[i] = detail::guarded(id, [&] {
            Rng rng(sample_seed(cfg.seed, i));
            const SynthParams params = random_synth_params(kind, rng, opt.canvas);
            const SynthShape shape = synth_shape(kind, params);
            const GrayImage image = render_crack_image(shape.mask, rng);
            SampleRecord rec;
            rec.id = id;
            rec.image = "images/" + rec.id + ".png";
            rec.mask = "masks/" + rec.id + ".png";
            rec.split = detail::split_for_index(i);
            rec.ground_truth = to_json(shape.truth);
            save_gray(cfg.out / rec.image, image);
            save_mask(cfg.out / rec.mask, shape.mask);
            const ExtendedLayers layers = extend_sample(image, shape.mask, cfg.heatmap_spec(), cfg.prune_len);
            detail::write_layers(cfg.out, rec, layers);
            classes[i] = layers.topology_class;
            rows[i] = {std::move(rec), layers.junctions.size()};
        });
    });

    std::vector<SampleFailure> failures;
    std::vector<std::pair<SampleRecord, std::size_t>> kept;
    std::vector<SampleRecord> records;
    std::vector<TopologyClass> kept_classes;
    for (std::size_t i = 0; i < opt.count; ++i) {
        if (failed[i]) {
            failures.push_back(*failed[i]);
            continue;
        }
        kept.push_back(rows[i]);
        records.push_back(rows[i].first);
        kept_classes.push_back(classes[i]);
    }
    write_manifest(cfg.out / "manifest.jsonl", records);
    write_text(cfg.out / "labels.csv", detail::labels_csv(kept));

    Json kinds = Json::array();
    for (ShapeKind k : opt.kinds) kinds.push_back(std::string(to_string(k)));
    Manifest m{cfg.out, records};
    const auto split_counts = m.split_counts();
    Json splits = Json::object();
    for (std::string_view k : kSplits) splits[std::string(k)] = split_counts.at(std::string(k));
    Json failure_list = Json::array();
    for (const auto& f : failures) failure_list.push_back(to_json(f));
    const Json summary = {
        {"generator", std::string(Rng::kAlgorithm)},
        {"seed", cfg.seed},
        {"count", opt.count},
        {"canvas", opt.canvas},
        {"kinds", std::move(kinds)},
        {"config_hash", cfg.hash()},
        {"splits", splits},
        {"topology_counts", detail::topology_counts(kept_classes)},
        {"failures", std::move(failure_list)},
    };
    write_text(cfg.out / "synth.json", dump_pretty(summary));

    log << "synth: " << records.size() << " of " << opt.count << " samples written to " << cfg.out.string() << " (train "
        << splits["train"] << ", val " << splits["val"] << ", test " << splits["test"] << ")\n";
    detail::report_failures(failures, err);
    return failures.empty() ? kExitOk : kExitSampleFailures;
}

// ---------------------------------------------------------------------------
// Annotation extension

inline int run_extend(const fs::path& manifest_path, const PipelineConfig& cfg, std::ostream& log = std::cout,
                      std::ostream& err = std::cerr) {
    cfg.validate();
    const Manifest m = read_manifest(manifest_path);
    detail::make_dirs(cfg.out, {"skeletons", "heatmaps", "junctions"});
    if (m.records.empty()) err << "warning: manifest " << manifest_path.string() << " has no samples\n";

    const std::size_t n = m.records.size();
    std::vector<std::pair<SampleRecord, std::size_t>> rows(n);
    std::vector<std::optional<SampleFailure>> failed(n);
    std::vector<TopologyClass> classes(n);
    parallel_for(n, cfg.jobs, [&](std::size_t i) {
        const SampleRecord& in = m.records[i];
        failed[i] = detail::guarded(in.id, [&] {
            const GrayImage image = load_gray(m.resolve(in.image));
            const BinaryMask mask = load_mask(m.resolve(in.mask));
            const ExtendedLayers layers = extend_sample(image, mask, cfg.heatmap_spec(), cfg.prune_len);
            SampleRecord rec = in;
            rec.image = detail::relative_path(m.resolve(in.image), cfg.out);
            rec.mask = detail::relative_path(m.resolve(in.mask), cfg.out);
            detail::write_layers(cfg.out, rec, layers);
            classes[i] = layers.topology_class;
            rows[i] = {std::move(rec), layers.junctions.size()};
        });
    });

    std::vector<SampleFailure> failures;
    std::vector<std::pair<SampleRecord, std::size_t>> kept;
    std::vector<SampleRecord> records;
    std::vector<TopologyClass> kept_classes;
    for (std::size_t i = 0; i < n; ++i) {
        if (failed[i]) {
            failures.push_back(*failed[i]);
            continue;
        }
        kept.push_back(rows[i]);
        records.push_back(rows[i].first);
        kept_classes.push_back(classes[i]);
    }
    write_manifest(cfg.out / "manifest.jsonl", records);
    write_text(cfg.out / "labels.csv", detail::labels_csv(kept));

    const Json counts = detail::topology_counts(kept_classes);
    log << "extend: " << records.size() << " of " << n << " samples (";
    bool first = true;
    for (const auto& [k, v] : counts.items()) {
        log << (first ? "" : ", ") << k << " " << v;
        first = false;
    }
    log << ")\n";
    detail::report_failures(failures, err);
    return failures.empty() ? kExitOk : kExitSampleFailures;
}

// ---------------------------------------------------------------------------
// Analysis

struct Analysis {
    Skeleton skeleton;
    JunctionSet junctions;
    MorphologyReport report;
    SeverityResult severity;
    int graph_nodes = 0;
    int graph_edges = 0;
    int cycles = 0;
};

/// Skeleton and junctions from the configured predictor. The classical path
/// thins the mask; the external path thresholds a skeleton probability map,
/// re-thins it, and takes junction peaks from a junction probability map.
inline std::pair<Skeleton, JunctionSet> predict_structure(const std::string& id, const BinaryMask& mask,
                                                         const PipelineConfig& cfg) {
    if (cfg.predictor == Predictor::Classical) {
        Skeleton skel = prune_spurs(thin_mask(mask), cfg.prune_len);
        JunctionSet j = extract_junctions(skel);
        return {std::move(skel), std::move(j)};
    }
    const fs::path skel_path = cfg.maps / "skeleton_prob" / (id + ".fgrid");
    const fs::path junc_path = cfg.maps / "junction_prob" / (id + ".fgrid");
    for (const auto& p : {skel_path, junc_path}) {
        if (!fs::is_regular_file(p)) throw Error(ErrorCode::MissingFile, "sample '" + id + "': " + p.string() + " not found");
    }
    const Heatmap prob = load_heatmap(skel_path);
    const Heatmap jprob = load_heatmap(junc_path);
    require_same_shape(prob, mask, "skeleton probability map vs mask");
    require_same_shape(jprob, mask, "junction probability map vs mask");
    BinaryMask bin(prob.width(), prob.height());
    const auto pv = prob.data();
    auto bv = bin.data();
    const float threshold = static_cast<float>(cfg.skeleton_threshold);
    for (std::size_t i = 0; i < pv.size(); ++i) bv[i] = pv[i] >= threshold ? 1 : 0;
    Skeleton skel = prune_spurs(thin_mask(bin), cfg.prune_len);
    JunctionSet j = extract_peaks(jprob, static_cast<float>(cfg.peak_threshold), cfg.resolved_nms_radius());
    return {std::move(skel), std::move(j)};
}

inline Analysis analyze_sample(const std::string& id, const BinaryMask& mask, const PipelineConfig& cfg) {
    Analysis a;
    std::tie(a.skeleton, a.junctions) = predict_structure(id, mask, cfg);
    a.report = full_report(mask, a.skeleton, a.junctions, cfg.scale_mm_per_px);
    a.severity = severity_index(a.report, cfg.severity);
    const SkeletonGraph g = build_graph(a.skeleton);
    a.graph_nodes = static_cast<int>(g.nodes.size());
    a.graph_edges = static_cast<int>(g.edges.size());
    a.cycles = g.cycles;
    return a;
}

// Overlay palette: image in gray, mask blended half-way toward amber,
// skeleton pixels red, each junction a cyan square outline of radius 3 with
// a cyan center pixel.
inline constexpr std::array<std::uint8_t, 3> kOverlayMaskTint = {255, 176, 0};
inline constexpr std::array<std::uint8_t, 3> kOverlaySkeleton = {255, 0, 0};
inline constexpr std::array<std::uint8_t, 3> kOverlayJunction = {0, 224, 255};
inline constexpr int kOverlayMarkerRadius = 3;

inline RgbImage render_overlay(const GrayImage& image, const BinaryMask& mask, const Skeleton& skel,
                               const JunctionSet& junctions) {
    require_same_shape(image, mask, "overlay image vs mask");
    require_same_shape(mask, skel.grid, "overlay mask vs skeleton");
    RgbImage out(mask.width(), mask.height());
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            const int g = static_cast<int>(std::lround(std::clamp(image(x, y), 0.0f, 1.0f) * 255.0f));
            std::array<std::uint8_t, 3> c = {static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(g)};
            if (mask(x, y)) {
                for (int k = 0; k < 3; ++k) c[k] = static_cast<std::uint8_t>((g + kOverlayMaskTint[k] + 1) / 2);
            }
            if (skel.grid(x, y)) c = kOverlaySkeleton;
            out.set(x, y, c);
        }
    }
    for (PixelCoord p : junctions.points) {
        const int r = kOverlayMarkerRadius;
        for (int d = -r; d <= r; ++d) {
            out.set(p.x + d, p.y - r, kOverlayJunction);
            out.set(p.x + d, p.y + r, kOverlayJunction);
            out.set(p.x - r, p.y + d, kOverlayJunction);
            out.set(p.x + r, p.y + d, kOverlayJunction);
        }
        out.set(p.x, p.y, kOverlayJunction);
    }
    return out;
}

inline Json analysis_json(const std::string& id, const Analysis& a, const PipelineConfig& cfg) {
    return {
        {"id", id},
        {"status", "ok"},
        {"predictor", std::string(to_string(cfg.predictor))},
        {"config_hash", cfg.hash()},
        {"config", cfg.to_json()},
        {"report", to_json(a.report)},
        {"notes", notes_json(a.report)},
        {"severity", to_json(a.severity)},
        {"junctions", to_json(a.junctions)["points"]},
        {"graph", {{"nodes", a.graph_nodes}, {"edges", a.graph_edges}, {"components", a.report.components}, {"cycles", a.cycles}}},
    };
}

inline Json failure_json(const SampleFailure& f, const PipelineConfig& cfg) {
    return {
        {"id", f.id},
        {"status", "error"},
        {"predictor", std::string(to_string(cfg.predictor))},
        {"config_hash", cfg.hash()},
        {"config", cfg.to_json()},
        {"error", {{"code", f.code}, {"message", f.message}}},
    };
}

// ---------------------------------------------------------------------------
// Evaluation

/// Mask, skeleton and junctions of one sample on either side of an evaluation.
struct AnnotatedSample {
    std::string id;
    BinaryMask mask;
    Skeleton skeleton;
    JunctionSet junctions;
};

/// Loads a sample's annotation layers. A missing skeleton is derived from the
/// mask, a skeleton file that is not one pixel wide is thinned, and missing
/// junctions are extracted from the skeleton.
inline AnnotatedSample load_annotated(const Manifest& m, const SampleRecord& r, double prune_len) {
    AnnotatedSample s;
    s.id = r.id;
    s.mask = load_mask(m.resolve(r.mask));
    if (r.skeleton) {
        s.skeleton = load_skeleton(m.resolve(*r.skeleton));
        if (!s.skeleton.thinned) s.skeleton = thin_mask(s.skeleton.grid);
        require_same_shape(s.mask, s.skeleton.grid, "mask vs skeleton");
    } else {
        s.skeleton = prune_spurs(thin_mask(s.mask), prune_len);
    }
    s.junctions = r.junctions ? load_junctions(m.resolve(*r.junctions)) : extract_junctions(s.skeleton);
    for (PixelCoord p : s.junctions.points) {
        if (!s.mask.contains(p.x, p.y)) throw Error(ErrorCode::PointOutOfBounds, "junction outside the grid");
    }
    return s;
}

struct DescriptorValues {
    std::optional<double> length;
    std::optional<double> avg_width;
    std::optional<double> orientation_deg;
    std::optional<double> tortuosity;
    double junction_count = 0.0;
};

inline DescriptorValues measure_descriptors(const AnnotatedSample& s, double scale) {
    DescriptorValues v;
    v.junction_count = static_cast<double>(s.junctions.size());
    const SkeletonGraph g = build_graph(s.skeleton);
    const double len_px = g.total_length_px();
    v.length = len_px * scale;
    if (len_px > 0.0) v.avg_width = average_width(s.mask, len_px, scale);
    try {
        v.orientation_deg = orientation(s.skeleton);
    } catch (const Error&) {
    }
    try {
        v.tortuosity = tortuosity(g);
    } catch (const Error&) {
    }
    return v;
}

inline constexpr std::array<std::string_view, 5> kDescriptorNames = {"length", "avg_width", "orientation_deg", "tortuosity",
                                                                     "junction_count"};

struct SampleEval {
    std::string id;
    SegScore skeleton;
    SegScore mask;
    bool preserved = false;
    MatchResult match;
    std::vector<ScoredMatch> scored;
    DescriptorValues pred;
    DescriptorValues ref;
    TopologyClass pred_class = TopologyClass::Linear;
    TopologyClass ref_class = TopologyClass::Linear;
};

struct EvalSummary {
    std::size_t samples = 0;
    std::string config_hash;
    double match_radius = 0.0;
    SegScore skeleton_mean;
    SegScore mask_mean;
    PreservationRate preservation;
    int tp = 0;
    int fp = 0;
    int fn = 0;
    PRF junction;
    double average_precision = 0.0;
    std::vector<std::pair<std::string, std::optional<DescriptorAgreement>>> descriptors;
    ConfusionMatrix topology;
    std::vector<std::string> notes;
    std::vector<SampleEval> per_sample;
};

inline SampleEval evaluate_pair(const AnnotatedSample& pred, const AnnotatedSample& ref, const PipelineConfig& cfg) {
    require_same_shape(pred.mask, ref.mask, "prediction vs reference");
    SampleEval e;
    e.id = ref.id;
    e.skeleton = seg_score(pred.skeleton.grid, ref.skeleton.grid);
    e.mask = seg_score(pred.mask, ref.mask);
    e.preserved = topology_preserved(pred.skeleton, ref.skeleton);
    e.match = match_junctions(pred.junctions, ref.junctions, cfg.match_radius);
    for (std::size_t i = 0; i < pred.junctions.size(); ++i) {
        const double c = i < pred.junctions.confidences.size() ? pred.junctions.confidences[i] : 1.0;
        e.scored.push_back({c, static_cast<bool>(e.match.pred_is_tp[i])});
    }
    e.pred = measure_descriptors(pred, cfg.scale_mm_per_px);
    e.ref = measure_descriptors(ref, cfg.scale_mm_per_px);
    e.pred_class = classify_topology(pred.junctions.size());
    e.ref_class = classify_topology(ref.junctions.size());
    return e;
}

/// Folds per-sample results in index order; every aggregate is a sum or a
/// sorted merge, so the result does not depend on evaluation order.
inline EvalSummary summarize(std::vector<SampleEval> per_sample, const PipelineConfig& cfg) {
    if (per_sample.empty()) throw Error(ErrorCode::EmptyInput, "no sample pairs to evaluate");
    EvalSummary s;
    s.samples = per_sample.size();
    s.config_hash = cfg.hash();
    s.match_radius = cfg.match_radius;
    const double n = static_cast<double>(s.samples);
    std::vector<bool> flags;
    std::vector<ScoredMatch> scored;
    std::vector<std::string> true_labels, pred_labels;
    std::set<std::string> seg_notes;
    for (const auto& e : per_sample) {
        s.skeleton_mean.dice += e.skeleton.dice;
        s.skeleton_mean.iou += e.skeleton.iou;
        s.skeleton_mean.precision += e.skeleton.precision;
        s.skeleton_mean.recall += e.skeleton.recall;
        s.mask_mean.dice += e.mask.dice;
        s.mask_mean.iou += e.mask.iou;
        s.mask_mean.precision += e.mask.precision;
        s.mask_mean.recall += e.mask.recall;
        for (const auto& note : e.skeleton.notes) seg_notes.insert("skeleton overlap, " + note);
        flags.push_back(e.preserved);
        s.tp += e.match.tp;
        s.fp += e.match.fp;
        s.fn += e.match.fn;
        scored.insert(scored.end(), e.scored.begin(), e.scored.end());
        true_labels.emplace_back(to_string(e.ref_class));
        pred_labels.emplace_back(to_string(e.pred_class));
    }
    for (auto* o : {&s.skeleton_mean, &s.mask_mean}) {
        o->dice /= n;
        o->iou /= n;
        o->precision /= n;
        o->recall /= n;
    }
    s.notes.assign(seg_notes.begin(), seg_notes.end());
    s.preservation = preservation_from_flags(flags);
    s.junction = junction_prf(s.tp, s.fp, s.fn);
    if (s.tp + s.fp == 0 && s.tp + s.fn == 0) s.notes.push_back("no junctions predicted or referenced: precision, recall and F1 set to 1");
    s.average_precision = average_precision(std::move(scored), s.tp + s.fn);

    for (std::string_view name : kDescriptorNames) {
        std::vector<double> p, r;
        for (const auto& e : per_sample) {
            std::optional<double> a, b;
            if (name == "length") {
                a = e.pred.length;
                b = e.ref.length;
            } else if (name == "avg_width") {
                a = e.pred.avg_width;
                b = e.ref.avg_width;
            } else if (name == "orientation_deg") {
                a = e.pred.orientation_deg;
                b = e.ref.orientation_deg;
                if (a && b) {
                    // Angles are axial: compare along the shorter way round 180 degrees.
                    double d = std::fmod(*a - *b + 90.0, 180.0);
                    if (d < 0) d += 180.0;
                    a = *b + d - 90.0;
                }
            } else if (name == "tortuosity") {
                a = e.pred.tortuosity;
                b = e.ref.tortuosity;
            } else {
                a = e.pred.junction_count;
                b = e.ref.junction_count;
            }
            if (a && b) {
                p.push_back(*a);
                r.push_back(*b);
            }
        }
        if (p.empty()) {
            s.descriptors.emplace_back(std::string(name), std::nullopt);
            s.notes.push_back(std::string(name) + ": no sample has the descriptor on both sides");
            continue;
        }
        DescriptorAgreement agr = descriptor_agreement(p, r);
        if (p.size() < s.samples) {
            agr.notes.push_back("defined on both sides for " + std::to_string(p.size()) + " of " + std::to_string(s.samples) + " samples");
        }
        s.descriptors.emplace_back(std::string(name), std::move(agr));
    }

    std::vector<std::string> classes;
    for (TopologyClass c : kTopologyClasses) classes.emplace_back(to_string(c));
    s.topology = confusion(true_labels, pred_labels, classes);
    s.per_sample = std::move(per_sample);
    return s;
}

inline Json seg_json(const SegScore& s) {
    return {{"dice", s.dice}, {"iou", s.iou}, {"precision", s.precision}, {"recall", s.recall}};
}

inline Json to_json(const ConfusionMatrix& m) {
    return {{"classes", m.classes}, {"counts", m.counts}, {"total", m.total()}, {"correct", m.trace()},
            {"accuracy", optional_json(m.accuracy())}, {"notes", m.notes}};
}

inline Json to_json(const EvalSummary& s) {
    Json desc = Json::object();
    for (const auto& [name, a] : s.descriptors) {
        if (!a) {
            desc[name] = nullptr;
            continue;
        }
        desc[name] = {{"n", a->n}, {"mae", a->mae}, {"rmse", a->rmse}, {"mape_percent", optional_json(a->mape_percent)},
                      {"mape_skipped", a->mape_skipped}, {"pearson_r", optional_json(a->pearson_r)}, {"notes", a->notes}};
    }
    Json per = Json::array();
    for (const auto& e : s.per_sample) {
        per.push_back({{"id", e.id},
                       {"skeleton_dice", e.skeleton.dice},
                       {"topology_preserved", e.preserved},
                       {"tp", e.match.tp},
                       {"fp", e.match.fp},
                       {"fn", e.match.fn},
                       {"pred_class", std::string(to_string(e.pred_class))},
                       {"ref_class", std::string(to_string(e.ref_class))}});
    }
    return {
        {"samples", s.samples},
        {"config_hash", s.config_hash},
        {"match_radius", s.match_radius},
        {"segmentation",
         {{"skeleton", seg_json(s.skeleton_mean)},
          {"mask", seg_json(s.mask_mean)},
          {"topology_preservation",
           {{"preserved", s.preservation.preserved},
            {"total", s.preservation.total},
            {"fraction", s.preservation.fraction()},
            {"text", s.preservation.text()}}}}},
        {"junctions",
         {{"tp", s.tp},
          {"fp", s.fp},
          {"fn", s.fn},
          {"precision", s.junction.precision},
          {"recall", s.junction.recall},
          {"f1", s.junction.f1},
          {"average_precision", s.average_precision}}},
        {"descriptors", std::move(desc)},
        {"topology", to_json(s.topology)},
        {"notes", s.notes},
        {"per_sample", std::move(per)},
    };
}

inline std::string confusion_csv(const ConfusionMatrix& m) {
    std::string out = "true\\pred";
    for (const auto& c : m.classes) out += "," + c;
    out += "\n";
    for (std::size_t i = 0; i < m.classes.size(); ++i) {
        out += m.classes[i];
        for (long long v : m.counts[i]) out += "," + std::to_string(v);
        out += "\n";
    }
    return out;
}

/// CSV tables laid out as: segmentation and topology preservation; junction
/// detection; descriptor agreement; per-class topology accuracy.
inline std::map<std::string, std::string> eval_tables(const EvalSummary& s) {
    auto f3 = [](double v) { return format_fixed(v, 3); };
    std::map<std::string, std::string> t;
    t["table_segmentation.csv"] = "metric,value\n"
                                  "skeleton_dice," + f3(s.skeleton_mean.dice) + "\n"
                                  "skeleton_iou," + f3(s.skeleton_mean.iou) + "\n"
                                  "skeleton_precision," + f3(s.skeleton_mean.precision) + "\n"
                                  "skeleton_recall," + f3(s.skeleton_mean.recall) + "\n"
                                  "mask_dice," + f3(s.mask_mean.dice) + "\n"
                                  "mask_iou," + f3(s.mask_mean.iou) + "\n"
                                  "topology_preservation," + s.preservation.text() + "\n";
    t["table_junctions.csv"] = "metric,value\n"
                               "true_positives," + std::to_string(s.tp) + "\n"
                               "false_positives," + std::to_string(s.fp) + "\n"
                               "false_negatives," + std::to_string(s.fn) + "\n"
                               "precision," + f3(s.junction.precision) + "\n"
                               "recall," + f3(s.junction.recall) + "\n"
                               "f1," + f3(s.junction.f1) + "\n"
                               "average_precision," + f3(s.average_precision) + "\n";
    std::string d = "descriptor,n,mae,rmse,mape_percent,pearson_r\n";
    for (const auto& [name, a] : s.descriptors) {
        if (!a) {
            d += name + ",0,,,,\n";
            continue;
        }
        d += name + "," + std::to_string(a->n) + "," + f3(a->mae) + "," + f3(a->rmse) + "," +
             (a->mape_percent ? format_fixed(*a->mape_percent, 1) : "") + "," + (a->pearson_r ? f3(*a->pearson_r) : "") + "\n";
    }
    t["table_descriptors.csv"] = d;
    std::string c = "class,support,correct,accuracy\n";
    for (std::size_t i = 0; i < s.topology.classes.size(); ++i) {
        long long support = 0;
        for (long long v : s.topology.counts[i]) support += v;
        const long long ok = s.topology.counts[i][i];
        c += s.topology.classes[i] + "," + std::to_string(support) + "," + std::to_string(ok) + "," +
             (support > 0 ? f3(static_cast<double>(ok) / static_cast<double>(support)) : "") + "\n";
    }
    const auto acc = s.topology.accuracy();
    c += "overall," + std::to_string(s.topology.total()) + "," + std::to_string(s.topology.trace()) + "," +
         (acc ? f3(*acc) : "") + "\n";
    t["table_topology.csv"] = c;
    t["confusion.csv"] = confusion_csv(s.topology);
    return t;
}

inline void write_eval(const fs::path& dir, const EvalSummary& s) {
    write_text(dir / "eval_summary.json", dump_pretty(to_json(s)));
    for (const auto& [name, text] : eval_tables(s)) write_text(dir / name, text);
}

inline std::string eval_text(const EvalSummary& s) {
    std::string out;
    out += "samples: " + std::to_string(s.samples) + "\n";
    out += "skeleton dice/iou: " + format_fixed(s.skeleton_mean.dice, 3) + "/" + format_fixed(s.skeleton_mean.iou, 3) + "\n";
    out += "topology preservation: " + s.preservation.text() + "\n";
    out += "junctions tp/fp/fn: " + std::to_string(s.tp) + "/" + std::to_string(s.fp) + "/" + std::to_string(s.fn) + "\n";
    out += "junction P/R/F1: " + format_fixed(s.junction.precision, 3) + "/" + format_fixed(s.junction.recall, 3) + "/" +
           format_fixed(s.junction.f1, 3) + "  AP " + format_fixed(s.average_precision, 3) + "\n";
    for (const auto& [name, a] : s.descriptors) {
        out += name + ": ";
        out += a ? "MAE " + format_fixed(a->mae, 3) + ", r " + (a->pearson_r ? format_fixed(*a->pearson_r, 3) : "n/a") : "n/a";
        out += "\n";
    }
    const auto acc = s.topology.accuracy();
    out += "topology accuracy: " + (acc ? format_fixed(*acc, 3) : std::string("n/a")) + "\n";
    for (const auto& n : s.notes) out += "note: " + n + "\n";
    for (const auto& n : s.topology.notes) out += "note: " + n + "\n";
    return out;
}

/// Evaluates aligned prediction/reference pairs on up to cfg.jobs threads.
inline EvalSummary evaluate(const std::vector<AnnotatedSample>& pred, const std::vector<AnnotatedSample>& ref,
                            const PipelineConfig& cfg) {
    if (pred.size() != ref.size()) throw Error(ErrorCode::LengthMismatch, "prediction and reference counts differ");
    std::vector<SampleEval> per(pred.size());
    parallel_for(pred.size(), cfg.jobs, [&](std::size_t i) { per[i] = evaluate_pair(pred[i], ref[i], cfg); });
    return summarize(std::move(per), cfg);
}

// ---------------------------------------------------------------------------
// Commands over existing corpora

struct AnalyzeInput {
    fs::path manifest;  ///< corpus input; when empty, image + mask name one sample
    fs::path image;
    fs::path mask;
    std::string id;
};

inline int run_analyze(const AnalyzeInput& input, const PipelineConfig& cfg, std::ostream& log = std::cout,
                       std::ostream& err = std::cerr) {
    cfg.validate();
    if (cfg.predictor == Predictor::ExternalMaps && cfg.maps.empty()) {
        throw Error(ErrorCode::InvalidConfig, "predictor external-maps needs a maps directory");
    }
    Manifest m;
    if (!input.manifest.empty()) {
        m = read_manifest(input.manifest);
    } else {
        if (input.mask.empty()) throw Error(ErrorCode::InvalidConfig, "analyze needs a manifest or a mask");
        SampleRecord r;
        r.id = input.id.empty() ? input.mask.stem().string() : input.id;
        r.mask = fs::absolute(input.mask).string();
        r.image = fs::absolute(input.image.empty() ? input.mask : input.image).string();
        r.split = "test";
        m.records.push_back(std::move(r));
    }
    detail::make_dirs(cfg.out, {"images", "masks", "skeletons", "junctions", "reports", "overlays"});
    if (m.records.empty()) err << "warning: nothing to analyze\n";

    const std::size_t n = m.records.size();
    std::vector<std::optional<SampleFailure>> failed(n);
    std::vector<SampleRecord> out_records(n);
    std::vector<TopologyClass> classes(n);
    std::vector<AnnotatedSample> predicted(n);
    parallel_for(n, cfg.jobs, [&](std::size_t i) {
        const SampleRecord& in = m.records[i];
        failed[i] = detail::guarded(in.id, [&] {
            const GrayImage image = load_gray(m.resolve(in.image));
            const BinaryMask mask = load_mask(m.resolve(in.mask));
            require_same_shape(image, mask, "image vs mask");
            const Analysis a = analyze_sample(in.id, mask, cfg);
            SampleRecord rec;
            rec.id = in.id;
            rec.image = "images/" + in.id + ".png";
            rec.mask = "masks/" + in.id + ".png";
            rec.skeleton = "skeletons/" + in.id + ".png";
            rec.junctions = "junctions/" + in.id + ".json";
            rec.topology_label = std::string(to_string(a.report.topology_class));
            rec.split = in.split;
            fs::copy_file(m.resolve(in.image), cfg.out / rec.image, fs::copy_options::overwrite_existing);
            fs::copy_file(m.resolve(in.mask), cfg.out / rec.mask, fs::copy_options::overwrite_existing);
            save_mask(cfg.out / *rec.skeleton, a.skeleton.grid);
            save_junctions(cfg.out / *rec.junctions, a.junctions);
            save_rgb(cfg.out / "overlays" / (in.id + ".png"), render_overlay(image, mask, a.skeleton, a.junctions));
            write_text(cfg.out / "reports" / (in.id + ".json"), dump_pretty(analysis_json(in.id, a, cfg)));
            classes[i] = a.report.topology_class;
            predicted[i] = AnnotatedSample{in.id, mask, a.skeleton, a.junctions};
            out_records[i] = std::move(rec);
        });
        if (failed[i]) {
            try {
                write_text(cfg.out / "reports" / (in.id + ".json"), dump_pretty(failure_json(*failed[i], cfg)));
            } catch (const Error&) {
            }
        }
    });

    std::vector<SampleFailure> failures;
    std::vector<SampleRecord> records;
    std::vector<TopologyClass> kept_classes;
    std::vector<std::size_t> ok_index;
    for (std::size_t i = 0; i < n; ++i) {
        if (failed[i]) {
            failures.push_back(*failed[i]);
            continue;
        }
        records.push_back(out_records[i]);
        kept_classes.push_back(classes[i]);
        ok_index.push_back(i);
    }
    write_manifest(cfg.out / "manifest.jsonl", records);
    Json failure_list = Json::array();
    for (const auto& f : failures) failure_list.push_back(to_json(f));
    Json summary = {
        {"predictor", std::string(to_string(cfg.predictor))},
        {"config_hash", cfg.hash()},
        {"config", cfg.to_json()},
        {"samples", n},
        {"succeeded", records.size()},
        {"failed", failures.size()},
        {"topology_counts", detail::topology_counts(kept_classes)},
        {"failures", std::move(failure_list)},
    };

    // When the input corpus carries reference skeletons, score against them.
    const bool has_refs = !ok_index.empty() && std::all_of(ok_index.begin(), ok_index.end(), [&](std::size_t i) {
        return m.records[i].skeleton.has_value();
    });
    if (has_refs) {
        std::vector<AnnotatedSample> preds, refs(ok_index.size());
        for (std::size_t i : ok_index) preds.push_back(predicted[i]);
        std::vector<std::optional<SampleFailure>> ref_failed(ok_index.size());
        parallel_for(ok_index.size(), cfg.jobs, [&](std::size_t k) {
            const SampleRecord& r = m.records[ok_index[k]];
            ref_failed[k] = detail::guarded(r.id, [&] { refs[k] = load_annotated(m, r, cfg.prune_len); });
        });
        const bool refs_ok = std::none_of(ref_failed.begin(), ref_failed.end(), [](const auto& f) { return f.has_value(); });
        if (refs_ok) {
            const EvalSummary s = evaluate(preds, refs, cfg);
            write_eval(cfg.out / "eval", s);
            summary["eval"] = "eval/eval_summary.json";
        } else {
            for (const auto& f : ref_failed)
                if (f) err << "reference for sample '" << f->id << "' unusable, skipping evaluation: " << f->message << "\n";
        }
    }
    write_text(cfg.out / "reports" / "summary.json", dump_pretty(summary));

    log << "analyze: " << records.size() << " of " << n << " samples, predictor " << to_string(cfg.predictor)
        << ", config " << cfg.hash() << "\n";
    detail::report_failures(failures, err);
    return failures.empty() ? kExitOk : kExitSampleFailures;
}

namespace detail {

/// Pairs records by id; throws IdMismatch listing every unmatched id.
inline std::vector<std::pair<std::size_t, std::size_t>> pair_by_id(const Manifest& pred, const Manifest& ref) {
    std::map<std::string, std::size_t> pred_ids;
    for (std::size_t i = 0; i < pred.records.size(); ++i) pred_ids[pred.records[i].id] = i;
    std::set<std::string> ref_ids;
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    std::vector<std::string> missing;
    for (std::size_t j = 0; j < ref.records.size(); ++j) {
        ref_ids.insert(ref.records[j].id);
        auto it = pred_ids.find(ref.records[j].id);
        if (it == pred_ids.end()) {
            missing.push_back("missing from predictions: " + ref.records[j].id);
        } else {
            pairs.emplace_back(it->second, j);
        }
    }
    for (const auto& [id, i] : pred_ids)
        if (!ref_ids.count(id)) missing.push_back("missing from references: " + id);
    if (!missing.empty()) {
        std::string msg;
        for (const auto& s : missing) msg += (msg.empty() ? "" : "; ") + s;
        throw Error(ErrorCode::IdMismatch, msg);
    }
    return pairs;
}

}  // namespace detail

inline int run_eval(const fs::path& pred_manifest, const fs::path& ref_manifest, const PipelineConfig& cfg,
                    std::ostream& log = std::cout, std::ostream& err = std::cerr) {
    cfg.validate();
    const Manifest pm = read_manifest(pred_manifest);
    const Manifest rm = read_manifest(ref_manifest);
    const auto pairs = detail::pair_by_id(pm, rm);
    std::vector<AnnotatedSample> preds(pairs.size()), refs(pairs.size());
    std::vector<std::optional<SampleFailure>> failed(pairs.size());
    parallel_for(pairs.size(), cfg.jobs, [&](std::size_t k) {
        const auto [i, j] = pairs[k];
        failed[k] = detail::guarded(rm.records[j].id, [&] {
            preds[k] = load_annotated(pm, pm.records[i], cfg.prune_len);
            refs[k] = load_annotated(rm, rm.records[j], cfg.prune_len);
            require_same_shape(preds[k].mask, refs[k].mask, "prediction vs reference");
        });
    });
    std::vector<SampleFailure> failures;
    std::vector<AnnotatedSample> p, r;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        if (failed[k]) {
            failures.push_back(*failed[k]);
            continue;
        }
        p.push_back(std::move(preds[k]));
        r.push_back(std::move(refs[k]));
    }
    detail::make_dirs(cfg.out, {});
    const EvalSummary s = evaluate(p, r, cfg);
    write_eval(cfg.out, s);
    log << eval_text(s);
    detail::report_failures(failures, err);
    return failures.empty() ? kExitOk : kExitSampleFailures;
}

struct ComparisonRow {
    std::string metric;
    std::optional<double> baseline;
    std::optional<double> proposed;
};

inline std::vector<ComparisonRow> comparison_rows(const EvalSummary& b, const EvalSummary& p) {
    std::vector<ComparisonRow> rows = {
        {"skeleton_dice", b.skeleton_mean.dice, p.skeleton_mean.dice},
        {"skeleton_iou", b.skeleton_mean.iou, p.skeleton_mean.iou},
        {"topology_preservation_percent", 100.0 * b.preservation.fraction(), 100.0 * p.preservation.fraction()},
        {"junction_precision", b.junction.precision, p.junction.precision},
        {"junction_recall", b.junction.recall, p.junction.recall},
        {"junction_f1", b.junction.f1, p.junction.f1},
        {"junction_ap", b.average_precision, p.average_precision},
    };
    for (std::size_t k = 0; k < b.descriptors.size(); ++k) {
        const auto& da = b.descriptors[k].second;
        const auto& db = p.descriptors[k].second;
        rows.push_back({b.descriptors[k].first + "_mae", da ? std::optional<double>(da->mae) : std::nullopt,
                        db ? std::optional<double>(db->mae) : std::nullopt});
    }
    rows.push_back({"topology_accuracy", b.topology.accuracy(), p.topology.accuracy()});
    return rows;
}

/// "-37.6%" style text for the relative change, "n/a" without a nonzero baseline.
inline std::string change_text(std::optional<double> baseline, std::optional<double> proposed) {
    if (!baseline || !proposed || *baseline == 0.0) return "n/a";
    if (*proposed == *baseline) return "0.0%";
    return signed_fixed(percent_change(*baseline, *proposed), 1) + "%";
}

inline std::string comparison_csv(const std::vector<ComparisonRow>& rows) {
    std::string out = "metric,baseline,proposed,delta,change\n";
    auto num = [](std::optional<double> v) { return v ? format_fixed(*v, 3) : std::string("n/a"); };
    for (const auto& r : rows) {
        const std::string delta = (r.baseline && r.proposed) ? format_fixed(*r.proposed - *r.baseline, 3) : "n/a";
        out += r.metric + "," + num(r.baseline) + "," + num(r.proposed) + "," + delta + "," + change_text(r.baseline, r.proposed) + "\n";
    }
    return out;
}

/// Runs the classical pipeline and the configured predictor over one corpus
/// with reference annotations and tabulates the differences.
inline int run_baseline_compare(const fs::path& manifest_path, const PipelineConfig& cfg, std::ostream& log = std::cout,
                                std::ostream& err = std::cerr) {
    cfg.validate();
    if (cfg.predictor == Predictor::ExternalMaps && cfg.maps.empty()) {
        throw Error(ErrorCode::InvalidConfig, "predictor external-maps needs a maps directory");
    }
    const Manifest m = read_manifest(manifest_path);
    for (const auto& r : m.records) {
        if (!r.skeleton) throw Error(ErrorCode::MissingFile, "sample '" + r.id + "' has no reference skeleton");
    }
    PipelineConfig base_cfg = cfg;
    base_cfg.predictor = Predictor::Classical;

    const std::size_t n = m.records.size();
    std::vector<AnnotatedSample> refs(n), base(n), prop(n);
    std::vector<std::optional<SampleFailure>> failed(n);
    parallel_for(n, cfg.jobs, [&](std::size_t i) {
        const SampleRecord& r = m.records[i];
        failed[i] = detail::guarded(r.id, [&] {
            refs[i] = load_annotated(m, r, cfg.prune_len);
            auto [bs, bj] = predict_structure(r.id, refs[i].mask, base_cfg);
            base[i] = AnnotatedSample{r.id, refs[i].mask, std::move(bs), std::move(bj)};
            auto [ps, pj] = predict_structure(r.id, refs[i].mask, cfg);
            prop[i] = AnnotatedSample{r.id, refs[i].mask, std::move(ps), std::move(pj)};
        });
    });
    std::vector<SampleFailure> failures;
    std::vector<AnnotatedSample> rv, bv, pv;
    for (std::size_t i = 0; i < n; ++i) {
        if (failed[i]) {
            failures.push_back(*failed[i]);
            continue;
        }
        rv.push_back(std::move(refs[i]));
        bv.push_back(std::move(base[i]));
        pv.push_back(std::move(prop[i]));
    }
    const EvalSummary sb = evaluate(bv, rv, base_cfg);
    const EvalSummary sp = evaluate(pv, rv, cfg);
    detail::make_dirs(cfg.out, {"baseline", "proposed"});
    write_eval(cfg.out / "baseline", sb);
    write_eval(cfg.out / "proposed", sp);
    const auto rows = comparison_rows(sb, sp);
    const std::string table = comparison_csv(rows);
    write_text(cfg.out / "comparison.csv", table);
    Json jrows = Json::array();
    for (const auto& r : rows) {
        jrows.push_back({{"metric", r.metric},
                         {"baseline", optional_json(r.baseline)},
                         {"proposed", optional_json(r.proposed)},
                         {"change", change_text(r.baseline, r.proposed)}});
    }
    write_text(cfg.out / "comparison.json",
               dump_pretty({{"baseline_predictor", "classical"},
                            {"proposed_predictor", std::string(to_string(cfg.predictor))},
                            {"config_hash", cfg.hash()},
                            {"samples", rv.size()},
                            {"rows", std::move(jrows)}}));
    log << "baseline comparison: classical vs " << to_string(cfg.predictor) << " over " << rv.size() << " samples\n" << table;
    detail::report_failures(failures, err);
    return failures.empty() ? kExitOk : kExitSampleFailures;
}

/// Writes reference skeletons and junction heatmaps as FGRID probability maps
/// laid out for the external-maps predictor.
inline int run_export_maps(const fs::path& manifest_path, const PipelineConfig& cfg, std::ostream& log = std::cout,
                           std::ostream& err = std::cerr) {
    cfg.validate();
    const Manifest m = read_manifest(manifest_path);
    detail::make_dirs(cfg.out, {"skeleton_prob", "junction_prob"});
    const std::size_t n = m.records.size();
    std::vector<std::optional<SampleFailure>> failed(n);
    parallel_for(n, cfg.jobs, [&](std::size_t i) {
        const SampleRecord& r = m.records[i];
        failed[i] = detail::guarded(r.id, [&] {
            const AnnotatedSample s = load_annotated(m, r, cfg.prune_len);
            Heatmap prob(s.skeleton.grid.width(), s.skeleton.grid.height(), 0.0f);
            const auto sv = s.skeleton.grid.data();
            auto pv = prob.data();
            for (std::size_t k = 0; k < sv.size(); ++k) pv[k] = sv[k] ? 1.0f : 0.0f;
            const Heatmap hm = r.heatmap ? load_heatmap(m.resolve(*r.heatmap))
                                         : make_heatmap(s.junctions, prob.width(), prob.height(), cfg.heatmap_spec());
            require_same_shape(hm, prob, "heatmap vs skeleton");
            save_heatmap(cfg.out / "skeleton_prob" / (r.id + ".fgrid"), prob);
            save_heatmap(cfg.out / "junction_prob" / (r.id + ".fgrid"), hm);
        });
    });
    std::vector<SampleFailure> failures;
    for (const auto& f : failed)
        if (f) failures.push_back(*f);
    log << "maps: " << (n - failures.size()) << " of " << n << " samples written to " << cfg.out.string() << "\n";
    detail::report_failures(failures, err);
    return failures.empty() ? kExitOk : kExitSampleFailures;
}

/// Per-image loss values of external probability maps against reference
/// skeletons and heatmaps.
inline int run_loss(const fs::path& manifest_path, const PipelineConfig& cfg, std::ostream& log = std::cout,
                    std::ostream& err = std::cerr) {
    cfg.validate();
    if (cfg.maps.empty()) throw Error(ErrorCode::InvalidConfig, "loss needs a maps directory");
    const Manifest m = read_manifest(manifest_path);
    const std::size_t n = m.records.size();
    struct Row {
        double dice = 0, bce = 0, skel = 0, mse = 0;
    };
    std::vector<Row> rows(n);
    std::vector<std::optional<SampleFailure>> failed(n);
    parallel_for(n, cfg.jobs, [&](std::size_t i) {
        const SampleRecord& r = m.records[i];
        failed[i] = detail::guarded(r.id, [&] {
            if (!r.skeleton || !r.heatmap) throw Error(ErrorCode::MissingFile, "sample '" + r.id + "' needs reference skeleton and heatmap");
            const Skeleton target = load_skeleton(m.resolve(*r.skeleton));
            const Heatmap target_hm = load_heatmap(m.resolve(*r.heatmap));
            const Heatmap skel_prob = load_heatmap(cfg.maps / "skeleton_prob" / (r.id + ".fgrid"));
            const Heatmap junc_prob = load_heatmap(cfg.maps / "junction_prob" / (r.id + ".fgrid"));
            rows[i].dice = dice_loss(skel_prob, target.grid, cfg.loss);
            rows[i].bce = bce_loss(skel_prob, target.grid, cfg.loss);
            rows[i].skel = skeleton_loss(skel_prob, target.grid, cfg.loss);
            rows[i].mse = heatmap_mse(junc_prob, target_hm);
        });
    });
    std::string csv = "image_id,dice_loss,bce_loss,skeleton_loss,heatmap_mse\n";
    std::vector<SampleFailure> failures;
    Row mean;
    std::size_t ok = 0;
    char buf[256];
    for (std::size_t i = 0; i < n; ++i) {
        if (failed[i]) {
            failures.push_back(*failed[i]);
            continue;
        }
        std::snprintf(buf, sizeof buf, ",%.6f,%.6f,%.6f,%.6f\n", rows[i].dice, rows[i].bce, rows[i].skel, rows[i].mse);
        csv += m.records[i].id + buf;
        mean.dice += rows[i].dice;
        mean.bce += rows[i].bce;
        mean.skel += rows[i].skel;
        mean.mse += rows[i].mse;
        ++ok;
    }
    detail::make_dirs(cfg.out, {});
    write_text(cfg.out / "losses.csv", csv);
    if (ok > 0) {
        const double k = static_cast<double>(ok);
        std::snprintf(buf, sizeof buf, "loss: %zu samples, mean skeleton loss %.6f (dice %.6f, bce %.6f), mean heatmap mse %.6f\n",
                      ok, mean.skel / k, mean.dice / k, mean.bce / k, mean.mse / k);
        log << buf;
    } else {
        log << "loss: no samples\n";
    }
    detail::report_failures(failures, err);
    return failures.empty() ? kExitOk : kExitSampleFailures;
}

}  // namespace fissure
