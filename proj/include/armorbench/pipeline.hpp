#pragma once

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "advtrain.hpp"
#include "attacks.hpp"
#include "common.hpp"
#include "config.hpp"
#include "dataset.hpp"
#include "detectors.hpp"
#include "metrics.hpp"
#include "model.hpp"

namespace armorbench {

// ---------------------------------------------------------------------------
// Logging: line-oriented, timestamp-free by default so runs diff cleanly.
// ---------------------------------------------------------------------------

struct StageLogger {
    bool timestamps = false;

    void line(const std::string& msg) const {
        if (timestamps) {
            const std::time_t now =
                std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
            char stamp[32];
            std::tm tm_utc{};
            gmtime_r(&now, &tm_utc);
            std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
            std::fprintf(stdout, "%s %s\n", stamp, msg.c_str());
        } else {
            std::fprintf(stdout, "%s\n", msg.c_str());
        }
        std::fflush(stdout);
    }
};

// ---------------------------------------------------------------------------
// Artifact layout under output_dir. Every subcommand reads and writes only
// these paths.
// ---------------------------------------------------------------------------

struct ArtifactPaths {
    std::filesystem::path dir;

    explicit ArtifactPaths(const std::filesystem::path& d) : dir(d) {}

    std::filesystem::path train_set() const { return dir / "train.adat"; }
    std::filesystem::path val_set() const { return dir / "val.adat"; }
    std::filesystem::path annotations() const { return dir / "annotations.csv"; }
    std::filesystem::path base_checkpoint() const { return dir / "base.avlm"; }
    std::filesystem::path advset(const std::string& name) const {
        return dir / ("adv_" + name + ".aadv");
    }
    std::filesystem::path attack_success() const { return dir / "attack_success.json"; }
    std::filesystem::path train_advset() const { return dir / "advset.aadv"; }
    std::filesystem::path finetuned_checkpoint() const { return dir / "finetuned.avlm"; }
    std::filesystem::path monitor_csv() const { return dir / "monitor.csv"; }
    std::filesystem::path eval_json(const std::string& which) const {
        return dir / ("eval_" + which + ".json");
    }
    std::filesystem::path confusion_csv(const std::string& tag) const {
        return dir / ("confusion_" + tag + ".csv");
    }
    std::filesystem::path confusion_svg(const std::string& tag) const {
        return dir / ("confusion_" + tag + ".svg");
    }
    std::filesystem::path detector_file(DetectorKind kind) const {
        return dir / ("detector_" + to_string(kind) + ".adet");
    }
    std::filesystem::path detectors_json() const { return dir / "detectors.json"; }
    std::filesystem::path sweep_csv() const { return dir / "sweep.csv"; }
    std::filesystem::path sweep_summary_csv() const { return dir / "sweep_summary.csv"; }
    std::filesystem::path report_json() const { return dir / "report.json"; }
    std::filesystem::path attack_success_svg() const { return dir / "attack_success_rates.svg"; }
    std::filesystem::path detector_accuracy_svg() const { return dir / "detector_accuracy.svg"; }
};

inline void require_artifact(const std::filesystem::path& p) {
    if (!std::filesystem::exists(p))
        throw DependencyError("missing required artifact " + p.string() +
                              " (run the producing subcommand first)");
}

inline void write_json_file(const json& j, const std::filesystem::path& path) {
    const std::string s = j.dump(2) + "\n";
    write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

inline json read_json_file(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    try {
        return json::parse(bytes.begin(), bytes.end());
    } catch (const json::parse_error& e) {
        throw FormatError(path.string() + " is not valid JSON: " + e.what());
    }
}

namespace detail {

inline std::string fmt_pct(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f%%", v * 100.0);
    return buf;
}

// Concatenate datasets into one with fresh consecutive ids (the id-ordering
// invariant would otherwise break when sets share original ids).
inline LabeledDataset concat_renumbered(const std::vector<const LabeledDataset*>& parts) {
    LabeledDataset out;
    if (parts.empty()) throw InputError("concat_renumbered: no parts");
    out.class_names = parts.front()->class_names;
    out.source = parts.front()->source;
    std::int64_t next = 0;
    for (const auto* p : parts)
        for (const auto& s : p->samples) {
            out.samples.push_back(s);
            out.samples.back().id = next++;
        }
    out.validate();
    return out;
}

inline AttackConfig stage_attack_config(const RunConfig& cfg) {
    AttackConfig a = cfg.attack;
    a.seed = cfg.seed;
    return a;
}

// The static adversarial validation set: sequential + fused examples of the
// validation images, attacked against the baseline model.
inline LabeledDataset load_adv_val(const ArtifactPaths& paths) {
    require_artifact(paths.advset("sequential"));
    require_artifact(paths.advset("fused"));
    const LabeledDataset seq = load_advset(paths.advset("sequential")).to_labeled_dataset();
    const LabeledDataset fus = load_advset(paths.advset("fused")).to_labeled_dataset();
    return concat_renumbered({&seq, &fus});
}

inline ModelArch arch_for(const LabeledDataset& ds, const ModelConfig& mc) {
    if (ds.samples.empty()) throw InputError("dataset has no samples");
    const ImageSample& s = ds.samples.front();
    ModelArch a;
    a.input_dim = s.channels * s.height * s.width;
    a.hidden_dim = mc.hidden_dim;
    a.embed_dim = mc.embed_dim;
    a.num_classes = static_cast<int>(ds.class_names.size());
    a.validate();
    return a;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Subcommand bodies.
// ---------------------------------------------------------------------------

inline void run_gen_data(const RunConfig& cfg, const StageLogger& log) {
    const ArtifactPaths paths(cfg.output_dir);
    std::filesystem::create_directories(paths.dir);

    LabeledDataset full;
    if (cfg.data.source == "synthetic") {
        full = gen_synthetic(cfg.seed, static_cast<std::size_t>(cfg.data.n), cfg.data.classes,
                             cfg.data.height, cfg.data.width);
        log.line("gen-data: generated " + std::to_string(full.size()) + " synthetic samples, " +
                 std::to_string(cfg.data.classes) + " classes");
    } else {
        require_artifact(cfg.data.cifar_path);
        full = parse_cifar10_batch(read_file_bytes(cfg.data.cifar_path));
        log.line("gen-data: parsed " + std::to_string(full.size()) + " CIFAR-10 records from " +
                 cfg.data.cifar_path);
    }

    auto [train_ds, val_ds] = split(full, cfg.data.train_fraction, cfg.seed);
    save_dataset(train_ds, paths.train_set());
    save_dataset(val_ds, paths.val_set());
    write_annotations(full, paths.annotations());
    log.line("gen-data: wrote " + paths.train_set().string() + " (" +
             std::to_string(train_ds.size()) + "), " + paths.val_set().string() + " (" +
             std::to_string(val_ds.size()) + "), " + paths.annotations().string());
}

inline void run_train_base(const RunConfig& cfg, const StageLogger& log) {
    const ArtifactPaths paths(cfg.output_dir);
    require_artifact(paths.train_set());
    require_artifact(paths.val_set());
    const LabeledDataset train_ds = load_dataset(paths.train_set());
    const LabeledDataset val_ds = load_dataset(paths.val_set());

    DualEncoderModel m = init_model(detail::arch_for(train_ds, cfg.model), cfg.seed,
                                    train_ds.class_names, cfg.model.temperature);
    TrainConfig tc;
    tc.epochs = cfg.train.epochs;
    tc.lr = cfg.train.lr;
    tc.momentum = cfg.train.momentum;
    tc.batch_size = cfg.train.batch_size;
    tc.train_temperature = cfg.train.train_temperature;
    tc.seed = cfg.seed;

    const auto epoch_log = train(m, train_ds, tc, &val_ds, nullptr);
    for (const auto& e : epoch_log)
        log.line("train-base: epoch " + std::to_string(e.epoch) + " loss " +
                 std::to_string(e.train_loss) + " clean-val " + detail::fmt_pct(e.clean_val_acc));
    save_checkpoint(m, paths.base_checkpoint());
    log.line("train-base: wrote " + paths.base_checkpoint().string());
}

inline void run_attack(const RunConfig& cfg, const StageLogger& log) {
    const ArtifactPaths paths(cfg.output_dir);
    require_artifact(paths.base_checkpoint());
    require_artifact(paths.val_set());
    const DualEncoderModel model = load_checkpoint(paths.base_checkpoint());
    const LabeledDataset val_ds = load_dataset(paths.val_set());
    if (val_ds.samples.empty()) throw InputError("attack: validation set is empty");
    const AttackConfig acfg = detail::stage_attack_config(cfg);

    const std::size_t n = val_ds.size();
    std::vector<AdvExample> v_fgsm(n), v_deepfool(n), v_autoattack(n), v_sequential(n), v_fused(n);
    std::vector<std::string> failure_slots(n);

    parallel_for(n, cfg.threads, [&](std::size_t i) {
        const ImageSample& s = val_ds.samples[i];
        // A degenerate-geometry failure falls back to the unperturbed image so
        // every variant keeps one record per validation sample.
        auto fallback = [&](const std::vector<std::string>& chain) {
            AdvExample ex;
            ex.original_id = s.id;
            ex.label = s.label;
            ex.adv_pixels = s.pixels;
            ex.chain = chain;
            finalize_example(model, ex, s.pixels);
            return ex;
        };
        try {
            v_fgsm[i] = fgsm(model, s, acfg.epsilon);
        } catch (const AttackError& e) {
            failure_slots[i] += std::string("fgsm: ") + e.what() + "; ";
            v_fgsm[i] = fallback({"fgsm"});
        }
        try {
            v_deepfool[i] = deepfool(model, s, acfg.deepfool_max_iter, acfg.deepfool_overshoot);
        } catch (const AttackError& e) {
            failure_slots[i] += std::string("deepfool: ") + e.what() + "; ";
            v_deepfool[i] = fallback({"deepfool"});
        }
        try {
            v_autoattack[i] = autoattack_lite(model, s, acfg);
        } catch (const AttackError& e) {
            failure_slots[i] += std::string("autoattack: ") + e.what() + "; ";
            v_autoattack[i] = fallback({"autoattack"});
        }
        try {
            v_sequential[i] = sequential_attack(model, s, acfg);
        } catch (const AttackError& e) {
            failure_slots[i] += std::string("sequential: ") + e.what() + "; ";
            v_sequential[i] = fallback({"fgsm", "deepfool", "autoattack"});
        }
        v_fused[i] = fuse_examples(model, s, v_fgsm[i], v_deepfool[i], v_autoattack[i],
                                   acfg.fuse_weights);
    });

    for (std::size_t i = 0; i < n; ++i)
        if (!failure_slots[i].empty())
            log.line("attack: sample " + std::to_string(val_ds.samples[i].id) +
                     " fell back to clean pixels (" + failure_slots[i] + ")");

    const json acfg_json = {{"epsilon", acfg.epsilon},
                            {"apgd_iters", acfg.apgd_iters},
                            {"apgd_restarts", acfg.apgd_restarts},
                            {"deepfool_max_iter", acfg.deepfool_max_iter},
                            {"deepfool_overshoot", acfg.deepfool_overshoot},
                            {"enable_dlr", acfg.enable_dlr},
                            {"fuse_weights", acfg.fuse_weights},
                            {"seed", acfg.seed}};
    const int h = val_ds.samples.front().height, w = val_ds.samples.front().width;

    json success = json::object();
    const std::vector<std::pair<std::string, const std::vector<AdvExample>*>> variants = {
        {"fgsm", &v_fgsm},
        {"deepfool", &v_deepfool},
        {"autoattack", &v_autoattack},
        {"sequential", &v_sequential},
        {"fused", &v_fused}};
    for (const auto& [name, examples] : variants) {
        save_advset(advset_from_examples(*examples, val_ds.class_names, h, w, acfg_json),
                    paths.advset(name));
        const SuccessRates rates = attack_success_rate(model, *examples);
        success[name] = rates.overall;
        log.line("attack: " + name + " success rate " + detail::fmt_pct(rates.overall) +
                 " -> " + paths.advset(name).string());
    }
    write_json_file(success, paths.attack_success());
    log.line("attack: wrote " + paths.attack_success().string());
}

inline void run_build_advset(const RunConfig& cfg, const StageLogger& log) {
    const ArtifactPaths paths(cfg.output_dir);
    require_artifact(paths.base_checkpoint());
    require_artifact(paths.train_set());
    const DualEncoderModel model = load_checkpoint(paths.base_checkpoint());
    const LabeledDataset train_ds = load_dataset(paths.train_set());

    const AdvTrainConfig acfg =
        cfg.advtrain.to_config(detail::stage_attack_config(cfg), cfg.seed, cfg.threads);
    const AdvBuildResult res = build_adversarial_dataset(model, train_ds, acfg);
    for (const auto& f : res.failures) log.line("build-advset: attack failure, kept clean: " + f);

    AdvDataset out;
    out.class_names = res.dataset.class_names;
    out.height = res.dataset.samples.front().height;
    out.width = res.dataset.samples.front().width;
    out.config = {{"mix", cfg.advtrain.mix}, {"seed", cfg.seed}};
    for (std::size_t i = 0; i < res.dataset.samples.size(); ++i) {
        const auto& s = res.dataset.samples[i];
        const auto chain = treatment_chain(res.treatment[i]);
        std::uint32_t idx = 0;
        for (; idx < out.chains.size(); ++idx)
            if (out.chains[idx] == chain) break;
        if (idx == out.chains.size()) out.chains.push_back(chain);
        AdvRecord r;
        r.id = s.id;
        r.label = s.label;
        r.chain_index = idx;
        r.pixels = s.pixels;
        out.records.push_back(std::move(r));
    }
    save_advset(out, paths.train_advset());
    log.line("build-advset: clean " + std::to_string(res.n_clean) + ", sequential " +
             std::to_string(res.n_sequential) + ", fused " + std::to_string(res.n_fused) +
             " -> " + paths.train_advset().string());
}

inline void run_retrain(const RunConfig& cfg, const StageLogger& log) {
    const ArtifactPaths paths(cfg.output_dir);
    require_artifact(paths.base_checkpoint());
    require_artifact(paths.train_advset());
    require_artifact(paths.val_set());
    const DualEncoderModel base = load_checkpoint(paths.base_checkpoint());
    const LabeledDataset adv_train = load_advset(paths.train_advset()).to_labeled_dataset();
    const LabeledDataset val_clean = load_dataset(paths.val_set());
    const LabeledDataset val_adv = detail::load_adv_val(paths);

    const AdvTrainConfig acfg =
        cfg.advtrain.to_config(detail::stage_attack_config(cfg), cfg.seed, cfg.threads);
    const RetrainResult res = retrain(base, adv_train, val_clean, val_adv, acfg);
    for (const auto& e : res.log)
        log.line("retrain: epoch " + std::to_string(e.epoch) + " loss " +
                 std::to_string(e.train_loss) + " clean-val " + detail::fmt_pct(e.clean_val_acc) +
                 " adv-val " + detail::fmt_pct(e.adv_val_acc));
    save_checkpoint(res.model, paths.finetuned_checkpoint());
    write_monitor_csv(res.log, paths.monitor_csv());
    log.line("retrain: best epoch " + std::to_string(res.best_epoch) + " -> " +
             paths.finetuned_checkpoint().string() + ", " + paths.monitor_csv().string());
}

inline void run_eval(const RunConfig& cfg, const StageLogger& log) {
    const ArtifactPaths paths(cfg.output_dir);
    require_artifact(paths.val_set());
    const LabeledDataset val_clean = load_dataset(paths.val_set());
    const LabeledDataset val_adv = detail::load_adv_val(paths);

    const std::vector<std::pair<std::string, std::filesystem::path>> models = {
        {"baseline", paths.base_checkpoint()}, {"finetuned", paths.finetuned_checkpoint()}};
    for (const auto& [which, ckpt] : models) {
        require_artifact(ckpt);
        const DualEncoderModel m = load_checkpoint(ckpt);
        const EvalReport clean = evaluate_model(m, val_clean);
        const EvalReport adv = evaluate_model(m, val_adv);

        write_json_file(json{{"clean", {{"metrics", metrics_to_json(clean.bundle)},
                                        {"n", clean.n_eval}}},
                             {"adversarial", {{"metrics", metrics_to_json(adv.bundle)},
                                              {"n", adv.n_eval}}}},
                        paths.eval_json(which));
        write_confusion_csv(clean.confusion, paths.confusion_csv(which + "_clean"));
        render_confusion_heatmap(clean.confusion, which + " / clean validation",
                                 paths.confusion_svg(which + "_clean"));
        write_confusion_csv(adv.confusion, paths.confusion_csv(which + "_adv"));
        render_confusion_heatmap(adv.confusion, which + " / adversarial validation",
                                 paths.confusion_svg(which + "_adv"));
        log.line("eval: " + which + " clean " + detail::fmt_pct(clean.bundle.accuracy) +
                 ", adversarial " + detail::fmt_pct(adv.bundle.accuracy) + " -> " +
                 paths.eval_json(which).string());
    }
}

// Feature rows interleave per validation image: clean, fgsm, deepfool,
// autoattack. The holdout cut lands on an image boundary so no image
// contributes rows to both portions.
inline FeatureSet pipeline_feature_set(const RunConfig& cfg, const ArtifactPaths& paths,
                                       const DualEncoderModel& model) {
    require_artifact(paths.val_set());
    const LabeledDataset val_ds = load_dataset(paths.val_set());
    std::vector<AdvDataset> advsets;
    for (const std::string& name : {"fgsm", "deepfool", "autoattack"}) {
        require_artifact(paths.advset(name));
        advsets.push_back(load_advset(paths.advset(name)));
        if (advsets.back().records.size() != val_ds.size())
            throw InputError("advset " + paths.advset(name).string() +
                             " does not match the validation set size");
    }

    std::vector<FeatureInput> inputs;
    inputs.reserve(val_ds.size() * 4);
    for (std::size_t i = 0; i < val_ds.size(); ++i) {
        const ImageSample& s = val_ds.samples[i];
        inputs.push_back({&s.pixels, s.label, false});
        for (const auto& adv : advsets) {
            const AdvRecord& r = adv.records[i];
            if (r.id != s.id)
                throw InputError("advset record id " + std::to_string(r.id) +
                                 " does not match validation sample id " + std::to_string(s.id));
            inputs.push_back({&r.pixels, s.label, true});
        }
    }
    const std::size_t train_images =
        static_cast<std::size_t>((1.0 - cfg.detectors.holdout_fraction) *
                                 static_cast<double>(val_ds.size()));
    if (train_images == 0 || train_images >= val_ds.size())
        throw ConfigError("detectors.holdout_fraction leaves an empty portion");
    return extract_features(model, inputs, train_images * 4);
}

inline std::filesystem::path feature_checkpoint_path(const RunConfig& cfg,
                                                     const ArtifactPaths& paths) {
    return cfg.detectors.feature_checkpoint == "finetuned" ? paths.finetuned_checkpoint()
                                                           : paths.base_checkpoint();
}

inline const std::vector<DetectorKind>& all_detector_kinds() {
    static const std::vector<DetectorKind> kinds = {DetectorKind::adaboost,
                                                    DetectorKind::gbdt_level,
                                                    DetectorKind::gbdt_leaf, DetectorKind::mlp};
    return kinds;
}

inline void run_train_detectors(const RunConfig& cfg, const StageLogger& log) {
    const ArtifactPaths paths(cfg.output_dir);
    const auto ckpt = feature_checkpoint_path(cfg, paths);
    require_artifact(ckpt);
    const DualEncoderModel model = load_checkpoint(ckpt);
    const FeatureSet fs = pipeline_feature_set(cfg, paths, model);
    const DetectorParams params = cfg.detectors.to_params(derive_seed(cfg.seed, "detectors"));

    json bundles = json::object();
    bundles["feature_checkpoint"] = cfg.detectors.feature_checkpoint;
    bundles["n_train_rows"] = fs.n_train;
    bundles["n_holdout_rows"] = fs.n - fs.n_train;
    for (DetectorKind kind : all_detector_kinds()) {
        const Detector det = train_detector(kind, fs, params);
        const MetricsBundle b = evaluate_detector(det, fs);
        save_detector(det, paths.detector_file(kind));
        bundles[to_string(kind)] = metrics_to_json(b);
        log.line("train-detectors: " + to_string(kind) + " holdout accuracy " +
                 detail::fmt_pct(b.accuracy) + " macro-F1 " + detail::fmt_pct(b.macro_f1) +
                 " -> " + paths.detector_file(kind).string());
    }
    write_json_file(bundles, paths.detectors_json());
    log.line("train-detectors: wrote " + paths.detectors_json().string());
}

inline void run_sweep(const RunConfig& cfg, const StageLogger& log) {
    const ArtifactPaths paths(cfg.output_dir);
    const auto ckpt = feature_checkpoint_path(cfg, paths);
    require_artifact(ckpt);
    const DualEncoderModel model = load_checkpoint(ckpt);
    const FeatureSet fs = pipeline_feature_set(cfg, paths, model);

    DetectorParams base = cfg.detectors.to_params(derive_seed(cfg.seed, "sweep"));
    base.adaboost_rounds = cfg.sweep.adaboost_rounds;
    base.gbdt.trees = cfg.sweep.gbdt_trees;
    base.mlp.epochs = cfg.sweep.mlp_epochs;

    const SweepResult sw = sensitivity_sweep(cfg.sweep.kind_enums(), cfg.sweep.lrs,
                                             cfg.sweep.depth_or_leaves, fs, base,
                                             derive_seed(cfg.seed, "sweep"));
    write_sweep_csv(sw, paths.sweep_csv());
    write_sweep_summary_csv(sw, paths.sweep_summary_csv());
    for (const auto& [kind, range] : sw.accuracy_range)
        log.line("sweep: " + kind + " accuracy range " + detail::fmt_pct(range));
    log.line("sweep: " + std::to_string(sw.rows.size()) + " cells -> " +
             paths.sweep_csv().string() + ", " + paths.sweep_summary_csv().string());
}

inline void run_report(const RunConfig& cfg, const StageLogger& log) {
    const ArtifactPaths paths(cfg.output_dir);
    require_artifact(paths.attack_success());
    require_artifact(paths.eval_json("baseline"));
    require_artifact(paths.eval_json("finetuned"));
    require_artifact(paths.detectors_json());

    const json success = read_json_file(paths.attack_success());
    const json eval_baseline = read_json_file(paths.eval_json("baseline"));
    const json eval_finetuned = read_json_file(paths.eval_json("finetuned"));
    const json det = read_json_file(paths.detectors_json());

    json detectors = json::array();
    std::vector<std::pair<std::string, double>> det_bars;
    for (DetectorKind kind : all_detector_kinds()) {
        const std::string name = to_string(kind);
        if (!det.contains(name))
            throw FormatError(paths.detectors_json().string() + " is missing detector '" + name +
                              "'");
        detectors.push_back({{"kind", name}, {"metrics", det.at(name)}});
        det_bars.emplace_back(name, det.at(name).at("accuracy").get<double>());
    }

    const json report = {{"baseline", eval_baseline.at("adversarial").at("metrics")},
                         {"finetuned", eval_finetuned.at("adversarial").at("metrics")},
                         {"attack_success", success},
                         {"detectors", detectors}};
    write_report(report, paths.report_json());

    std::vector<std::pair<std::string, double>> rate_bars;
    for (const std::string name : {"fgsm", "deepfool", "autoattack", "sequential", "fused"}) {
        if (!success.contains(name))
            throw FormatError(paths.attack_success().string() + " is missing rate '" + name + "'");
        rate_bars.emplace_back(name, success.at(name).get<double>());
    }
    render_bar_chart(rate_bars, "attack success rate (baseline model)",
                     paths.attack_success_svg());
    render_bar_chart(det_bars, "detector holdout accuracy", paths.detector_accuracy_svg());
    log.line("report: wrote " + paths.report_json().string() + ", " +
             paths.attack_success_svg().string() + ", " + paths.detector_accuracy_svg().string());
}

inline void run_pipeline(const RunConfig& cfg, const StageLogger& log) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto elapsed = [&] {
        const auto dt = std::chrono::steady_clock::now() - t0;
        const double s =
            static_cast<double>(
                std::chrono::duration_cast<std::chrono::milliseconds>(dt).count()) /
            1000.0;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.1fs", s);
        return std::string(buf);
    };
    struct Stage {
        const char* name;
        void (*fn)(const RunConfig&, const StageLogger&);
    };
    // The chain deliberately leaves out `sweep`, which stays a standalone
    // subcommand on top of the same artifacts.
    const Stage stages[] = {{"gen-data", run_gen_data},
                            {"train-base", run_train_base},
                            {"attack", run_attack},
                            {"build-advset", run_build_advset},
                            {"retrain", run_retrain},
                            {"eval", run_eval},
                            {"train-detectors", run_train_detectors},
                            {"report", run_report}};
    for (const auto& stage : stages) {
        log.line("pipeline: ==> " + std::string(stage.name));
        stage.fn(cfg, log);
        log.line("pipeline: <== " + std::string(stage.name) + " (total " + elapsed() + ")");
    }
}

}  // namespace armorbench
