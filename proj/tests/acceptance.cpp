// Prints one PASS/FAIL line per acceptance criterion; exits nonzero if any fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <sstream>
#include <string>

#include "fissure/pipeline.hpp"
#include "grid_text.hpp"

using namespace fissure;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    void require(bool ok, const std::string& what) {
        if (ok) return;
        if (pass) detail = what;
        pass = false;
    }
};

int failures = 0;

void criterion(int n, const char* name, double budget_s, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o.pass = false;
        o.detail = std::string("exception: ") + e.what();
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.require(s <= budget_s, "over time budget");
    if (!o.pass) ++failures;
    std::printf("%s %2d %-32s %9.3f ms%s%s\n", o.pass ? "PASS" : "FAIL", n, name, s * 1e3, o.detail.empty() ? "" : "  ",
                o.detail.c_str());
    std::fflush(stdout);
}

bool has_block(const BinaryMask& m) {
    for (int y = 0; y + 1 < m.height(); ++y)
        for (int x = 0; x + 1 < m.width(); ++x)
            if (m(x, y) && m(x + 1, y) && m(x, y + 1) && m(x + 1, y + 1)) return true;
    return false;
}

bool subset(const BinaryMask& a, const BinaryMask& b) {
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a.data()[i] && !b.data()[i]) return false;
    return true;
}

double axial_gap(double a, double b) {
    const double d = std::fabs(std::fmod(a - b + 360.0, 180.0));
    return std::min(d, 180.0 - d);
}

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

int run_cli(const std::string& args) {
    const std::string cmd = std::string(FISSURE_CLI) + " " + args + " >/dev/null 2>&1";
    const int raw = std::system(cmd.c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

std::string fixed3(double v) { return format_fixed(v, 3); }

}  // namespace

int main() {
    criterion(1, "junction P/R/F1 arithmetic", 0.001, [] {
        Outcome o;
        const PRF r = junction_prf(301, 65, 11);
        const std::string got = fixed3(r.precision) + "/" + fixed3(r.recall) + "/" + fixed3(r.f1);
        const std::string four = format_fixed(r.precision, 4) + "/" + format_fixed(r.recall, 4) + "/" + format_fixed(r.f1, 4);
        o.require(got == "0.822/0.964/0.887",
                  "half-up display gives " + got + ", expected 0.822/0.964/0.887; 4-decimal values " + four +
                      " agree, the last digit needs truncation");
        return o;
    });

    criterion(2, "confusion accuracy from cells", 0.001, [] {
        Outcome o;
        ConfusionMatrix m = confusion_from_counts({"linear", "branched", "complex", "network"},
                                                  {{110, 4, 0, 0}, {8, 45, 4, 0}, {0, 6, 16, 1}, {0, 0, 1, 5}});
        o.require(std::fabs(*m.accuracy() - 0.880) <= 1e-9, "accuracy " + std::to_string(*m.accuracy()));
        o.require(!check_stated_accuracy(m, 0.835) && m.notes.size() == 1 &&
                      m.notes[0] == "stated accuracy 83.5% disagrees with cell counts: 176/200 = 88.0%",
                  "discrepancy note missing");
        return o;
    });

    criterion(3, "percentage change", 0.001, [] {
        Outcome o;
        const std::string a = change_text(19.7, 12.3), b = change_text(0.48, 0.31);
        o.require(a == "-37.6%" && b == "-35.4%", a + " " + b);
        return o;
    });

    criterion(4, "heatmap closed form", 1.0, [] {
        Outcome o;
        const Heatmap h = make_heatmap(JunctionSet::ground_truth({{30, 30}}), 61, 61, HeatmapSpec::with_sigma(5.0));
        o.require(h(30, 30) == 1.0f, "peak not 1");
        for (auto [x, y] : {std::pair{35, 30}, {25, 30}, {30, 35}, {30, 25}, {33, 34}})
            o.require(std::fabs(h(x, y) - std::exp(-0.5)) <= 1e-6, "value at sigma");
        return o;
    });

    criterion(5, "heatmap round trip", 30.0, [] {
        Outcome o;
        Rng rng(5);
        const HeatmapSpec spec = HeatmapSpec::with_sigma(5.0);
        for (int t = 0; t < 100; ++t) {
            JunctionSet j;
            const int want = rng.uniform_int(1, 40);
            const int border = static_cast<int>(std::ceil(3.0 * spec.sigma));
            for (int tries = 0; tries < 20000 && static_cast<int>(j.size()) < want; ++tries) {
                const PixelCoord p{rng.uniform_int(border, 639 - border), rng.uniform_int(border, 639 - border)};
                bool ok = true;
                for (const auto& q : j.points) ok &= distance(p, q) > 4.0 * spec.sigma;
                if (ok) j.add(p);
            }
            const JunctionSet p = extract_peaks(make_heatmap(j, 640, 640, spec), 0.5f, 2.0 * spec.sigma);
            const PRF r = junction_prf(match_junctions(p, j, 1.0));
            o.require(r.precision == 1.0 && r.recall == 1.0, "set " + std::to_string(t));
        }
        return o;
    });

    criterion(6, "thinness and topology", 60.0, [] {
        Outcome o;
        Rng rng(2024);
        for (int t = 0; t < 200; ++t) {
            const BinaryMask m = testutil::random_blobs(rng, rng.uniform_int(8, 64), rng.uniform_int(8, 64));
            const Skeleton s = thin_mask(m);
            const std::string tag = "blob " + std::to_string(t);
            o.require(!has_block(s.grid), tag + " has a 2x2 block");
            o.require(subset(s.grid, m), tag + " leaves the mask");
            o.require(component_count(s.grid, 8) == component_count(m, 8), tag + " component count");
        }
        return o;
    });

    criterion(7, "descriptor oracles", 60.0, [] {
        Outcome o;
        int shapes = 0;
        for (std::size_t k = 0; k < kShapeKinds.size(); ++k) {
            for (int i = 0; i < 10; ++i) {
                const ShapeKind kind = kShapeKinds[k];
                Rng rng(sample_seed(7, static_cast<std::uint64_t>(i * 10) + k));
                const SynthShape s = synth_shape(kind, random_synth_params(kind, rng));
                const GroundTruth& gt = s.truth;
                const Skeleton sk = prune_spurs(thin_mask(s.mask), kDefaultPruneLength);
                const SkeletonGraph g = build_graph(sk);
                const MorphologyReport r = full_report(s.mask, sk, extract_junctions(sk));
                const std::string tag = gt.kind + " #" + std::to_string(i);
                if (gt.exact) {
                    o.require(std::fabs(r.length - gt.length_px) <= 1e-9, tag + " length");
                    o.require(foreground_pixels(sk.grid) == gt.centerline, tag + " centerline");
                } else {
                    o.require(std::fabs(r.length - gt.length_px) <= 0.02 * gt.length_px, tag + " length");
                }
                o.require(r.junction_count >= gt.junction_count && r.junction_count <= gt.junction_count_max, tag + " junctions");
                if (gt.junction_count == gt.junction_count_max) o.require(r.topology_class == gt.topology_class, tag + " class");
                o.require(g.components == gt.components && g.cycles == gt.cycles, tag + " topology");
                if (gt.isotropic) o.require(!r.orientation_deg, tag + " isotropic");
                if (gt.orientation_deg)
                    o.require(r.orientation_deg && axial_gap(*r.orientation_deg, *gt.orientation_deg) <= (gt.exact ? 1e-6 : 1.0),
                              tag + " orientation");
                if (gt.pure_cycle) o.require(!r.tortuosity, tag + " cycle tortuosity");
                if (gt.tortuosity && kind != ShapeKind::Grid)
                    o.require(r.tortuosity && std::fabs(*r.tortuosity - *gt.tortuosity) <= (gt.exact ? 1e-9 : 0.02 * *gt.tortuosity),
                              tag + " tortuosity");
                ++shapes;
            }
        }
        o.require(shapes >= 50, "too few shapes");
        o.detail += (o.detail.empty() ? "" : "; ") + std::to_string(shapes) + " shapes";
        return o;
    });

    criterion(8, "width and tortuosity identities", 60.0, [] {
        Outcome o;
        Rng rng(7);
        for (int t = 0; t < 200; ++t) {
            const BinaryMask m = testutil::random_blobs(rng, 40, 40);
            const Skeleton s = thin_mask(m);
            const double scale = rng.uniform(0.05, 4.0);
            const MorphologyReport r = full_report(m, s, extract_junctions(s), scale);
            if (!(r.length > 0.0)) continue;
            const double area = static_cast<double>(foreground_count(m)) * scale;
            o.require(std::fabs(r.avg_width * r.length - area * scale) <= 1e-9 * area * scale, "width identity");
        }
        for (int len = 2; len <= 60; ++len) {
            BinaryMask line(64, 64), diag(64, 64);
            for (int i = 0; i < len; ++i) {
                line(i, 10) = 1;
                diag(i, i) = 1;
            }
            for (const auto& m : {line, diag}) {
                const double t = tortuosity(build_graph(Skeleton{m, true}));
                o.require(std::fabs(t - 1.0) <= 1e-9, "straight line tortuosity " + std::to_string(t));
            }
        }
        Rng trees(123);
        for (int t = 0; t < 500; ++t) {
            const SkeletonGraph g = build_graph(random_tree(trees, 48, 48, trees.uniform_int(2, 160)));
            o.require(tortuosity(g) >= 1.0, "tree " + std::to_string(t));
        }
        return o;
    });

    criterion(9, "metric identities", 60.0, [] {
        Outcome o;
        Rng rng(500);
        for (int t = 0; t < 500; ++t) {
            const SegScore s = seg_score(testutil::random_blobs(rng, 20, 16), testutil::random_blobs(rng, 20, 16));
            o.require(std::fabs(s.dice - 2.0 * s.iou / (1.0 + s.iou)) <= 1e-9, "dice/iou pair " + std::to_string(t));
        }
        for (int t = 0; t < 200; ++t) {
            const int n = rng.uniform_int(2, 40);
            std::vector<double> p(n), q(n);
            const double k = rng.uniform(0.1, 10.0), off = rng.uniform(-50.0, 50.0);
            for (int i = 0; i < n; ++i) {
                p[i] = 3.0 * rng.normal();
                q[i] = k * p[i] + off;
            }
            const auto a = descriptor_agreement(q, p);
            o.require(a.pearson_r && std::fabs(*a.pearson_r - 1.0) <= 1e-9, "pearson series " + std::to_string(t));
        }
        for (int t = 0; t < 100; ++t) {
            std::vector<ScoredMatch> s;
            const int n = rng.uniform_int(1, 30);
            for (int i = 0; i < n; ++i) s.push_back({rng.uniform(), true});
            o.require(average_precision(s, n) == 1.0, "ap list " + std::to_string(t));
        }
        return o;
    });

    criterion(10, "loss evaluators", 10.0, [] {
        Outcome o;
        Rng rng(31);
        for (int t = 0; t < 100; ++t) {
            const BinaryMask target = testutil::random_blobs(rng, 24, 24);
            Heatmap perfect(24, 24);
            for (std::size_t i = 0; i < target.size(); ++i) perfect.data()[i] = target.data()[i] ? 1.0f : 0.0f;
            o.require(std::fabs(bce_loss(Heatmap(24, 24, 0.5f), target) - std::log(2.0)) <= 1e-6, "bce at 0.5");
            o.require(dice_loss(perfect, target) <= 1e-6, "dice of perfect prediction");
            Heatmap a(24, 24), b(24, 24);
            for (auto& v : a.data()) v = static_cast<float>(rng.uniform());
            for (auto& v : b.data()) v = static_cast<float>(rng.uniform());
            o.require(heatmap_mse(a, b) == heatmap_mse(b, a), "mse symmetry");
            o.require(heatmap_mse(a, a) == 0.0, "mse at identity");
        }
        return o;
    });

    criterion(11, "topology thresholds", 0.001, [] {
        Outcome o;
        const std::pair<std::size_t, TopologyClass> table[] = {{0, TopologyClass::Linear},  {1, TopologyClass::Branched},
                                                               {2, TopologyClass::Branched}, {3, TopologyClass::Complex},
                                                               {5, TopologyClass::Complex},  {6, TopologyClass::Network}};
        for (auto [n, c] : table) o.require(classify_topology(n) == c, std::to_string(n) + " junctions");
        return o;
    });

    criterion(12, "determinism", 120.0, [] {
        Outcome o;
        std::map<std::string, std::string> synth_ref, analyze_ref;
        for (int run = 0; run < 3; ++run) {
            const int jobs = run == 2 ? 8 : 1;
            const fs::path dir = testutil::scratch_dir("accept_det_" + std::to_string(run));
            const std::string j = " --seed 42 --jobs " + std::to_string(jobs);
            o.require(run_cli("synth --count 20" + j + " --out " + (dir / "synth").string()) == 0, "synth exit code");
            o.require(run_cli("analyze --manifest " + (dir / "synth" / "manifest.jsonl").string() + j + " --out " +
                              (dir / "analyze").string()) == 0,
                      "analyze exit code");
            auto synth = testutil::tree_snapshot(dir / "synth");
            auto analyze = testutil::tree_snapshot(dir / "analyze");
            for (auto& [path, bytes] : analyze) {
                // Reports name their inputs by path, which differs per scratch directory.
                std::string::size_type at;
                while ((at = bytes.find(dir.string())) != std::string::npos) bytes.replace(at, dir.string().size(), "<root>");
            }
            if (run == 0) {
                synth_ref = synth;
                analyze_ref = analyze;
                o.require(synth.size() > 20 && analyze.size() > 20, "output trees too small");
            } else {
                const std::string tag = run == 1 ? "second run" : "jobs 8";
                o.require(synth == synth_ref, "synth differs on " + tag);
                o.require(analyze == analyze_ref, "analyze differs on " + tag);
            }
        }
        return o;
    });

    criterion(13, "augmentation equivariance", 60.0, [] {
        Outcome o;
        for (int i = 0; i < 50; ++i) {
            const ShapeKind kind = kShapeKinds[static_cast<std::size_t>(i) % kShapeKinds.size()];
            Rng rng(sample_seed(11, static_cast<std::uint64_t>(i)));
            const SynthShape s = synth_shape(kind, random_synth_params(kind, rng, 128));
            Rng tex(static_cast<std::uint64_t>(i));
            const ExtendedLayers layers = extend_sample(GrayImage(128, 128), s.mask);
            const AlignedSample base{render_crack_image(s.mask, tex), s.mask, layers.skeleton, layers.heatmap};
            const MorphologyReport r0 = full_report(base.mask, base.skeleton, extract_junctions(base.skeleton));
            for (int variant = 0; variant < 4; ++variant) {
                AugmentSpec spec;
                spec.seed = static_cast<std::uint64_t>(i);
                spec.hflip = variant == 0;
                spec.vflip = variant == 1;
                spec.rotation_deg = variant == 2 ? 90.0 : (variant == 3 ? 270.0 : 0.0);
                const AugmentResult out = augment_sample(base, spec);
                const std::string tag = "sample " + std::to_string(i) + " variant " + std::to_string(variant);
                if (!out.sample) {
                    o.require(false, tag + " rejected");
                    continue;
                }
                const AlignedSample& a = *out.sample;
                const MorphologyReport r = full_report(a.mask, a.skeleton, extract_junctions(a.skeleton));
                o.require(r.length == r0.length, tag + " length");
                o.require(r.junction_count == r0.junction_count, tag + " junctions");
                o.require(r.topology_class == r0.topology_class, tag + " class");
                o.require(r.orientation_deg.has_value() == r0.orientation_deg.has_value(), tag + " orientation presence");
                if (r.orientation_deg && r0.orientation_deg) {
                    const double expect = variant < 2 ? 180.0 - *r0.orientation_deg : *r0.orientation_deg + 90.0;
                    o.require(axial_gap(*r.orientation_deg, expect) <= 1e-6, tag + " orientation");
                }
            }
        }
        return o;
    });

    std::printf("%d of 13 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
