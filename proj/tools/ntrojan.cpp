#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ntrojan/errors.hpp"
#include "ntrojan/harness.hpp"
#include "ntrojan/model_format.hpp"
#include "ntrojan/nn.hpp"
#include "ntrojan/sentinel.hpp"
#include "ntrojan/trigger.hpp"
#include "ntrojan/trojan.hpp"

using namespace ntrojan;
namespace fs = std::filesystem;

namespace {

enum Exit : int { kOk = 0, kUsage = 1, kInvalid = 2, kIntegrity = 3 };

Mode parse_mode(const std::string& name) {
    const auto mode = mode_from_string(name);
    if (!mode) throw ConfigError("unknown mode \"" + name + "\" (benign, false-positive, false-negative, swap)");
    return *mode;
}

void write_text(const fs::path& path, const std::string& text) {
    write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string describe(const MatrixMatch& m) {
    std::ostringstream out;
    out << to_string(m.mode);
    if (m.primary) out << " primary " << *m.primary << " secondary " << *m.secondary;
    return out.str();
}

struct GenDataArgs {
    std::uint64_t seed = 0;
    std::uint32_t classes = 10;
    std::uint32_t dim = 16;
    std::uint32_t per_class = 300;
    float spread = 0.2f;
    std::string out;
};

int gen_data(const GenDataArgs& a) {
    const Dataset d = gen_blobs(a.seed, a.classes, a.dim, a.per_class, a.spread);
    save_dataset(d, a.out);
    std::printf("wrote %zu samples (%u classes, dim %u) to %s\n", d.samples.size(), d.n_classes, d.dim,
                a.out.c_str());
    return kOk;
}

struct TrainArgs {
    std::string data;
    TrainOptions options;
    std::string out;
};

int train(const TrainArgs& a) {
    const Dataset d = load_dataset(a.data);
    const TrainResult r = train_mlp(d, a.options);
    save_model(r.model, a.out);
    std::printf("train accuracy %.2f%%, final loss %.6f, wrote %s\n", 100.0 * r.train_accuracy, r.final_loss,
                a.out.c_str());
    return kOk;
}

struct InferArgs {
    std::string model;
    std::string data;
    std::vector<float> input;
};

int infer(const InferArgs& a) {
    const Model m = load_model(a.model);
    if (!a.input.empty()) {
        if (a.input.size() != m.input_dim()) {
            throw DimensionError("--input has " + std::to_string(a.input.size()) + " values, model expects " +
                                 std::to_string(m.input_dim()));
        }
        const Vector y = forward(m, a.input);
        const Prediction p = predict_detail(m, a.input);
        std::printf("predicted %zu confidence %.6f\n", p.label, p.confidence);
        std::printf("output");
        for (float v : y) std::printf(" %.9g", v);
        std::printf("\n");
        return kOk;
    }
    const Dataset d = load_dataset(a.data);
    if (d.dim != m.input_dim()) throw DimensionError("dataset dimension does not match the model input");
    std::printf("index,label,predicted,confidence\n");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < d.samples.size(); ++i) {
        const Prediction p = predict_detail(m, d.samples[i].features);
        hits += p.label == d.samples[i].label;
        std::printf("%zu,%u,%zu,%.6f\n", i, d.samples[i].label, p.label, p.confidence);
    }
    std::fprintf(stderr, "accuracy %.2f%% (%zu/%zu)\n", 100.0 * static_cast<double>(hits) / d.samples.size(), hits,
                 d.samples.size());
    return kOk;
}

struct InjectArgs {
    std::string model;
    std::string mode = "benign";
    std::size_t primary = 0;
    std::size_t secondary = 1;
    std::string out;
};

int inject_cmd(const InjectArgs& a) {
    const TrojanConfig cfg{parse_mode(a.mode), a.primary, a.secondary};
    const Model tm = inject(load_model(a.model), cfg);
    save_model(tm, a.out);
    std::printf("appended %s trojan layer %zu (%zux%zu), wrote %s\n", std::string(to_string(cfg.mode)).c_str(),
                tm.layers.size() - 1, tm.output_dim(), tm.output_dim(), a.out.c_str());
    return kOk;
}

struct SetModeArgs {
    std::string model;
    std::string from;
    std::string to;
    std::size_t primary = 0;
    std::size_t secondary = 1;
    std::optional<std::size_t> layer;
    std::string emit;
    bool in_place = false;
};

int set_mode(const SetModeArgs& a) {
    const TrojanConfig from{parse_mode(a.from), a.primary, a.secondary};
    const TrojanConfig to{parse_mode(a.to), a.primary, a.secondary};
    const Model m = load_model(a.model);
    const std::size_t layer = a.layer.value_or(m.layers.size() - 1);
    if (layer >= m.layers.size()) throw ConfigError("--layer " + std::to_string(layer) + " is out of range");
    const Matrix& w = m.layers[layer].weights;
    if (!w.square()) throw DimensionError("layer " + std::to_string(layer) + " is not square");
    validate(from, w.rows());
    if (w != build_mode_matrix(w.rows(), from)) {
        throw ConfigError("layer " + std::to_string(layer) + " is not in mode " + std::string(to_string(from.mode)) +
                          " for this class pair");
    }
    const WeightPatch patch = diff_modes(layout_of(m).layers[layer], from, to, layer);
    if (a.in_place) {
        const PatchReport r = apply_patch_file(a.model, patch);
        std::printf("applied %zu edits (%llu bytes) to %s\n", r.edits_applied,
                    static_cast<unsigned long long>(r.bytes_written), a.model.c_str());
    } else if (!a.emit.empty()) {
        save_patch(patch, a.emit);
        std::printf("wrote %zu edits (%zu bytes) to %s\n", patch.edits.size(), patch.payload_bytes(), a.emit.c_str());
    } else {
        std::fputs(export_patch(patch).c_str(), stdout);
    }
    return kOk;
}

struct PatchArgs {
    std::string model;
    std::string patch;
};

int patch_cmd(const PatchArgs& a) {
    const PatchReport r = apply_patch_file(a.model, load_patch(a.patch));
    std::printf("applied %zu edits (%llu bytes) to %s\n", r.edits_applied,
                static_cast<unsigned long long>(r.bytes_written), a.model.c_str());
    return kOk;
}

struct EvalArgs {
    std::string original;
    std::string trojan;
    std::string data;
    std::string mode;
    std::optional<std::size_t> primary;
    std::optional<std::size_t> secondary;
    double threshold = kDefaultConfidence;
    std::size_t pairs = 0;
    std::uint64_t seed = 0;
    std::string csv;
};

int eval_cmd(const EvalArgs& a) {
    const Model original = load_model(a.original);
    const Dataset d = load_dataset(a.data);
    std::vector<EvalReport> reports;
    if (a.pairs > 0) {
        const std::vector<Mode> modes{Mode::Benign, Mode::FalsePositive, Mode::FalseNegative, Mode::Swap};
        const auto pairs = draw_class_pairs(a.seed, original.output_dim(), a.pairs);
        reports = run_test_matrix(original, d, pairs, modes, a.threshold);
    } else {
        if (a.trojan.empty()) throw ConfigError("eval needs --trojan or --pairs");
        const Model trojaned = load_model(a.trojan);
        TrojanConfig cfg{Mode::Benign, a.primary.value_or(0), a.secondary.value_or(1)};
        if (!a.mode.empty()) {
            cfg.mode = parse_mode(a.mode);
        } else {
            const auto match = classify_matrix(trojaned.layers.back().weights);
            if (!match) throw ConfigError("top layer of --trojan is not a mode matrix; pass --mode");
            cfg.mode = match->mode;
            if (match->primary) {
                cfg.primary = *match->primary;
                cfg.secondary = *match->secondary;
            }
        }
        reports.push_back(evaluate(original, trojaned, d, cfg, a.threshold));
    }
    std::fputs(render_report(reports).c_str(), stdout);
    if (!a.csv.empty()) write_text(a.csv, render_csv(reports));
    return kOk;
}

struct ScanArgs {
    std::string model;
    float tolerance = kDefaultTolerance;
};

int scan(const ScanArgs& a) {
    const auto findings = scan_model(load_model(a.model), a.tolerance);
    for (const TrojanFinding& f : findings) {
        std::printf("layer %zu %s %s max_deviation %g\n", f.layer, std::string(to_string(f.verdict)).c_str(),
                    describe(f.match).c_str(), static_cast<double>(f.match.max_deviation));
    }
    if (findings.empty()) {
        std::printf("no findings\n");
        return kOk;
    }
    return kIntegrity;
}

struct ManifestArgs {
    std::string model;
    std::string out;
};

int manifest(const ManifestArgs& a) {
    const IntegrityManifest man = manifest_create(a.model);
    if (a.out.empty()) {
        std::fputs(export_manifest(man).c_str(), stdout);
    } else {
        save_manifest(man, a.out);
        std::printf("wrote manifest for %zu layers to %s\n", man.layers.size(), a.out.c_str());
    }
    return kOk;
}

struct VerifyArgs {
    std::string model;
    std::string manifest;
};

int verify(const VerifyArgs& a) {
    const IntegrityManifest man = load_manifest(a.manifest);
    const VerifyReport r = manifest_verify(a.model, man);
    if (!r.readable) {
        std::printf("UNREADABLE %s\n", r.error.c_str());
        return kIntegrity;
    }
    std::printf("structure %s\n", r.structure_match ? "ok" : "MODIFIED");
    for (const LayerCheck& c : r.layers) std::printf("layer %zu %s\n", c.index, c.match ? "ok" : "MODIFIED");
    if (r.clean()) {
        std::printf("CLEAN\n");
        return kOk;
    }
    std::printf("TAMPERED");
    for (std::size_t l : r.flagged_layers()) std::printf(" %zu", l);
    std::printf("\n");
    return kIntegrity;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Trojan layer injection, mode switching and integrity checks for NTMF classifiers"};
    app.require_subcommand(1);
    app.fallthrough(false);
    std::function<int()> action;

    GenDataArgs gd;
    auto* c_gen = app.add_subcommand("gen-data", "Generate a seeded Gaussian-blob dataset");
    c_gen->add_option("--seed", gd.seed, "Random seed")->required();
    c_gen->add_option("--classes", gd.classes, "Number of classes")->capture_default_str();
    c_gen->add_option("--dim", gd.dim, "Feature dimension")->capture_default_str();
    c_gen->add_option("--per-class", gd.per_class, "Samples per class")->capture_default_str();
    c_gen->add_option("--spread", gd.spread, "Per-feature standard deviation")->capture_default_str();
    c_gen->add_option("--out", gd.out, "Output .ntds file")->required();
    c_gen->callback([&] { action = [&] { return gen_data(gd); }; });

    TrainArgs tr;
    auto* c_train = app.add_subcommand("train", "Train a one-hidden-layer MLP classifier");
    c_train->add_option("--data", tr.data, "Training .ntds file")->required()->check(CLI::ExistingFile);
    c_train->add_option("--hidden", tr.options.hidden_dim, "Hidden units")->capture_default_str();
    c_train->add_option("--epochs", tr.options.epochs, "Full-batch epochs")->capture_default_str();
    c_train->add_option("--lr", tr.options.learning_rate, "Learning rate")->capture_default_str();
    c_train->add_option("--seed", tr.options.seed, "Initialization seed")->required();
    c_train->add_option("--out", tr.out, "Output .ntmf file")->required();
    c_train->callback([&] { action = [&] { return train(tr); }; });

    InferArgs inf;
    auto* c_infer = app.add_subcommand("infer", "Run a model on a dataset or a single input");
    c_infer->add_option("--model", inf.model, "Model .ntmf file")->required()->check(CLI::ExistingFile);
    auto* o_data = c_infer->add_option("--data", inf.data, "Dataset .ntds file")->check(CLI::ExistingFile);
    auto* o_input = c_infer->add_option("--input", inf.input, "Comma-separated feature vector")->delimiter(',');
    o_data->excludes(o_input);
    c_infer->callback([&] {
        if (inf.data.empty() && inf.input.empty()) throw CLI::RequiredError("--data or --input");
        action = [&] { return infer(inf); };
    });

    InjectArgs inj;
    auto* c_inject = app.add_subcommand("inject", "Append a trojan layer on top of a classifier");
    c_inject->add_option("--model", inj.model, "Target .ntmf file")->required()->check(CLI::ExistingFile);
    c_inject->add_option("--mode", inj.mode, "benign, false-positive, false-negative or swap")->capture_default_str();
    c_inject->add_option("--primary", inj.primary, "Primary class")->capture_default_str();
    c_inject->add_option("--secondary", inj.secondary, "Secondary class")->capture_default_str();
    c_inject->add_option("--out", inj.out, "Output .ntmf file")->required();
    c_inject->callback([&] { action = [&] { return inject_cmd(inj); }; });

    SetModeArgs sm;
    auto* c_set = app.add_subcommand("set-mode", "Build the byte patch switching a trojan layer between modes");
    c_set->add_option("--model", sm.model, "Trojaned .ntmf file")->required()->check(CLI::ExistingFile);
    c_set->add_option("--from", sm.from, "Current mode")->required();
    c_set->add_option("--to", sm.to, "Target mode")->required();
    c_set->add_option("--primary", sm.primary, "Primary class")->capture_default_str();
    c_set->add_option("--secondary", sm.secondary, "Secondary class")->capture_default_str();
    c_set->add_option("--layer", sm.layer, "Trojan layer index (default: last)");
    auto* o_emit = c_set->add_option("--emit", sm.emit, "Write the patch here (default: stdout)");
    auto* o_in_place = c_set->add_flag("--in-place", sm.in_place, "Patch --model directly");
    o_emit->excludes(o_in_place);
    c_set->callback([&] { action = [&] { return set_mode(sm); }; });

    PatchArgs pa;
    auto* c_patch = app.add_subcommand("patch", "Apply a patch file to a model in place");
    c_patch->add_option("--model", pa.model, "Target .ntmf file")->required()->check(CLI::ExistingFile);
    c_patch->add_option("--patch", pa.patch, "Patch .ntp file")->required()->check(CLI::ExistingFile);
    c_patch->callback([&] { action = [&] { return patch_cmd(pa); }; });

    EvalArgs ev;
    auto* c_eval = app.add_subcommand("eval", "Score a trojaned model against the original");
    c_eval->add_option("--original", ev.original, "Original .ntmf file")->required()->check(CLI::ExistingFile);
    auto* o_trojan = c_eval->add_option("--trojan", ev.trojan, "Trojaned .ntmf file")->check(CLI::ExistingFile);
    c_eval->add_option("--data", ev.data, "Test .ntds file")->required()->check(CLI::ExistingFile);
    c_eval->add_option("--mode", ev.mode, "Trojan mode (default: read from the trojan layer)");
    c_eval->add_option("--primary", ev.primary, "Primary class");
    c_eval->add_option("--secondary", ev.secondary, "Secondary class");
    c_eval->add_option("--threshold", ev.threshold, "Confidence threshold")->capture_default_str();
    auto* o_pairs = c_eval->add_option("--pairs", ev.pairs, "Run all modes over this many seeded class pairs");
    c_eval->add_option("--seed", ev.seed, "Seed for --pairs")->capture_default_str();
    c_eval->add_option("--csv", ev.csv, "Also write the CSV report here");
    o_pairs->excludes(o_trojan);
    c_eval->callback([&] {
        if (ev.trojan.empty() && ev.pairs == 0) throw CLI::RequiredError("--trojan or --pairs");
        action = [&] { return eval_cmd(ev); };
    });

    ScanArgs sc;
    auto* c_scan = app.add_subcommand("scan", "Look for trojan mode layers");
    c_scan->add_option("--model", sc.model, "Model .ntmf file")->required()->check(CLI::ExistingFile);
    c_scan->add_option("--tolerance", sc.tolerance, "Maximum cell deviation")->capture_default_str();
    c_scan->callback([&] { action = [&] { return scan(sc); }; });

    ManifestArgs ma;
    auto* c_man = app.add_subcommand("manifest", "Write per-layer SHA-256 digests of a model file");
    c_man->add_option("--model", ma.model, "Model .ntmf file")->required()->check(CLI::ExistingFile);
    c_man->add_option("--out", ma.out, "Manifest file (default: stdout)");
    c_man->callback([&] { action = [&] { return manifest(ma); }; });

    VerifyArgs ve;
    auto* c_verify = app.add_subcommand("verify", "Check a model file against a manifest");
    c_verify->add_option("--model", ve.model, "Model .ntmf file")->required();
    c_verify->add_option("--manifest", ve.manifest, "Manifest file")->required()->check(CLI::ExistingFile);
    c_verify->callback([&] { action = [&] { return verify(ve); }; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        return action();
    } catch (const PatchMismatchError& e) {
        std::fprintf(stderr, "error: %s (offset %llu)\n", e.what(), static_cast<unsigned long long>(e.offset()));
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
    }
    return kInvalid;
}
