// Command-line front end: corpus generation, annotation, analysis, evaluation
// and metric arithmetic.

#include <cstdint>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "fissure/pipeline.hpp"

namespace {

using fissure::PipelineConfig;

struct Overrides {
    std::string config_file;
    std::map<std::string, std::string> values;
    std::vector<std::pair<CLI::Option*, std::string>> options;
};

void add_pipeline_flags(CLI::App* sub, Overrides& ov) {
    sub->add_option("--config", ov.config_file, "Config file, JSON or key=value lines");
    const std::vector<std::pair<std::string, std::string>> flags = {
        {"sigma", "Gaussian spread of junction heatmaps, pixels"},
        {"peak-threshold", "Minimum heatmap value for a junction peak"},
        {"nms-radius", "Non-maximum suppression radius, pixels (default 2 sigma)"},
        {"match-radius", "Junction matching radius, pixels"},
        {"prune-len", "Minimum spur length kept by pruning, pixels"},
        {"scale-mm-per-px", "Physical scale of one pixel"},
        {"predictor", "classical or external-maps"},
        {"skeleton-threshold", "Threshold for external skeleton probability maps"},
        {"maps", "Directory with skeleton_prob/ and junction_prob/ FGRID maps"},
        {"jobs", "Samples processed concurrently"},
        {"seed", "Random seed"},
        {"out", "Output directory"},
    };
    for (const auto& [flag, help] : flags) {
        std::string key = flag;
        for (char& c : key)
            if (c == '-') c = '_';
        CLI::Option* opt = sub->add_option("--" + flag, ov.values[key], help);
        ov.options.emplace_back(opt, key);
    }
}

PipelineConfig resolve_config(const Overrides& ov) {
    PipelineConfig cfg;
    if (!ov.config_file.empty()) cfg.load_file(ov.config_file);
    for (const auto& [opt, key] : ov.options) {
        if (opt->count() > 0) cfg.set(key, ov.values.at(key));
    }
    cfg.validate();
    return cfg;
}

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::stringstream in(text);
    std::string part;
    while (std::getline(in, part, ',')) {
        if (!part.empty()) out.push_back(part);
    }
    return out;
}

int metrics_prf(int tp, int fp, int fn) {
    const fissure::PRF r = fissure::junction_prf(tp, fp, fn);
    std::cout << "precision " << fissure::format_fixed(r.precision, 3) << "\n"
              << "recall " << fissure::format_fixed(r.recall, 3) << "\n"
              << "f1 " << fissure::format_fixed(r.f1, 3) << "\n";
    return fissure::kExitOk;
}

int metrics_confusion(const std::string& cells, double stated) {
    const auto parts = split_list(cells);
    const std::size_t k = fissure::kTopologyClasses.size();
    if (parts.size() != k * k) {
        throw fissure::Error(fissure::ErrorCode::LengthMismatch,
                             "expected " + std::to_string(k * k) + " cell counts, got " + std::to_string(parts.size()));
    }
    std::vector<std::string> classes;
    for (auto c : fissure::kTopologyClasses) classes.emplace_back(fissure::to_string(c));
    std::vector<std::vector<long long>> counts(k, std::vector<long long>(k));
    for (std::size_t i = 0; i < parts.size(); ++i) counts[i / k][i % k] = std::stoll(parts[i]);
    fissure::ConfusionMatrix m = fissure::confusion_from_counts(classes, counts);
    if (stated >= 0.0) fissure::check_stated_accuracy(m, stated);
    std::cout << fissure::confusion_csv(m);
    const auto acc = m.accuracy();
    std::cout << "accuracy " << (acc ? fissure::format_fixed(*acc, 3) : std::string("n/a")) << "\n";
    for (const auto& n : m.notes) std::cout << "note: " << n << "\n";
    return fissure::kExitOk;
}

int metrics_change(double baseline, double proposed) {
    std::cout << fissure::change_text(baseline, proposed) << "\n";
    return fissure::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fissure: crack mask morphology, annotation and evaluation"};
    app.require_subcommand(1);

    Overrides synth_ov, extend_ov, analyze_ov, eval_ov, baseline_ov, maps_ov, loss_ov;

    fissure::SynthOptions synth_opt;
    std::string kinds_text;
    auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus with analytic ground truth");
    synth->add_option("--count", synth_opt.count, "Number of samples")->check(CLI::PositiveNumber);
    synth->add_option("--kinds", kinds_text, "Comma-separated shape kinds (default: all)");
    synth->add_option("--canvas", synth_opt.canvas, "Square canvas size, pixels");
    add_pipeline_flags(synth, synth_ov);

    std::string extend_manifest;
    auto* extend = app.add_subcommand("extend", "Derive skeleton, junction heatmap and topology label layers");
    extend->add_option("--manifest", extend_manifest, "Input manifest (JSON lines)")->required();
    add_pipeline_flags(extend, extend_ov);

    fissure::AnalyzeInput analyze_in;
    auto* analyze = app.add_subcommand("analyze", "Skeletons, junctions, descriptors and severity per image");
    auto* analyze_manifest = analyze->add_option("--manifest", analyze_in.manifest, "Input manifest");
    auto* analyze_mask = analyze->add_option("--mask", analyze_in.mask, "Single mask PNG");
    analyze->add_option("--image", analyze_in.image, "Image PNG for the single mask (default: the mask)");
    analyze->add_option("--id", analyze_in.id, "Sample id for the single mask (default: file stem)");
    analyze_manifest->excludes(analyze_mask);
    add_pipeline_flags(analyze, analyze_ov);

    std::string pred_manifest, ref_manifest;
    auto* eval = app.add_subcommand("eval", "Score a prediction corpus against a reference corpus");
    eval->add_option("--pred", pred_manifest, "Prediction manifest")->required();
    eval->add_option("--ref", ref_manifest, "Reference manifest")->required();
    add_pipeline_flags(eval, eval_ov);

    std::string baseline_manifest;
    auto* baseline = app.add_subcommand("baseline", "Compare the classical pipeline with the configured predictor");
    baseline->add_option("--manifest", baseline_manifest, "Corpus with reference annotations")->required();
    add_pipeline_flags(baseline, baseline_ov);

    std::string maps_manifest;
    auto* maps = app.add_subcommand("maps", "Export reference layers as external probability maps");
    maps->add_option("--manifest", maps_manifest, "Corpus with reference annotations")->required();
    add_pipeline_flags(maps, maps_ov);

    std::string loss_manifest;
    auto* loss = app.add_subcommand("loss", "Loss values of external probability maps against references");
    loss->add_option("--manifest", loss_manifest, "Corpus with reference annotations")->required();
    add_pipeline_flags(loss, loss_ov);

    auto* metrics = app.add_subcommand("metrics", "Metric arithmetic from counts");
    metrics->require_subcommand(1);
    int tp = 0, fp = 0, fn = 0;
    auto* prf = metrics->add_subcommand("prf", "Precision, recall and F1 from match counts");
    prf->add_option("--tp", tp)->required()->check(CLI::NonNegativeNumber);
    prf->add_option("--fp", fp)->required()->check(CLI::NonNegativeNumber);
    prf->add_option("--fn", fn)->required()->check(CLI::NonNegativeNumber);
    std::string cells;
    double stated = -1.0;
    auto* conf = metrics->add_subcommand("confusion", "Accuracy from 4x4 topology confusion cells, rows = true class");
    conf->add_option("--cells", cells, "16 comma-separated counts in row order")->required();
    conf->add_option("--stated-accuracy", stated, "Separately reported accuracy to check, as a fraction");
    double base_value = 0.0, proposed_value = 0.0;
    auto* change = metrics->add_subcommand("change", "Relative change from a baseline value");
    change->add_option("--baseline", base_value)->required();
    change->add_option("--proposed", proposed_value)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? fissure::kExitOk : fissure::kExitConfigError;
    }

    try {
        if (*synth) {
            if (!kinds_text.empty()) {
                synth_opt.kinds.clear();
                for (const auto& k : split_list(kinds_text)) synth_opt.kinds.push_back(fissure::shape_kind_from_string(k));
            }
            return fissure::run_synth(synth_opt, resolve_config(synth_ov));
        }
        if (*extend) return fissure::run_extend(extend_manifest, resolve_config(extend_ov));
        if (*analyze) return fissure::run_analyze(analyze_in, resolve_config(analyze_ov));
        if (*eval) return fissure::run_eval(pred_manifest, ref_manifest, resolve_config(eval_ov));
        if (*baseline) return fissure::run_baseline_compare(baseline_manifest, resolve_config(baseline_ov));
        if (*maps) return fissure::run_export_maps(maps_manifest, resolve_config(maps_ov));
        if (*loss) return fissure::run_loss(loss_manifest, resolve_config(loss_ov));
        if (*prf) return metrics_prf(tp, fp, fn);
        if (*conf) return metrics_confusion(cells, stated);
        if (*change) return metrics_change(base_value, proposed_value);
    } catch (const fissure::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return fissure::kExitConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return fissure::kExitConfigError;
    }
    return fissure::kExitOk;
}
