#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <armorbench/pipeline.hpp>

#include "support/test_helpers.hpp"

using namespace armorbench;
using Catch::Matchers::ContainsSubstring;

namespace {

// Small enough for the whole chain to finish in seconds, large enough that
// every stage has real work (3 classes, 36 train / 12 val images).
RunConfig tiny_config(const std::filesystem::path& out_dir) {
    RunConfig cfg;
    cfg.seed = 11;
    cfg.output_dir = out_dir.string();
    cfg.data.n = 48;
    cfg.data.classes = 3;
    cfg.data.height = 8;
    cfg.data.width = 8;
    cfg.data.train_fraction = 0.75;
    cfg.model.hidden_dim = 16;
    cfg.model.embed_dim = 8;
    cfg.attack.apgd_iters = 5;
    cfg.attack.apgd_restarts = 1;
    cfg.attack.deepfool_max_iter = 10;
    cfg.train.epochs = 3;
    cfg.train.batch_size = 8;
    cfg.advtrain.epochs = 3;
    cfg.advtrain.batch_size = 8;
    cfg.detectors.holdout_fraction = 0.25;
    cfg.detectors.adaboost_rounds = 5;
    cfg.detectors.gbdt_trees = 5;
    cfg.detectors.gbdt_max_depth = 2;
    cfg.detectors.gbdt_max_leaves = 4;
    cfg.detectors.mlp_hidden = 8;
    cfg.detectors.mlp_epochs = 20;
    cfg.detectors.mlp_batch_size = 8;
    cfg.sweep.kinds = {"adaboost", "gbdt_leaf"};
    cfg.sweep.lrs = {0.1};
    cfg.sweep.depth_or_leaves = {1, 2};
    cfg.sweep.adaboost_rounds = 5;
    cfg.sweep.gbdt_trees = 5;
    cfg.sweep.mlp_epochs = 10;
    cfg.validate();
    return cfg;
}

std::vector<std::uint8_t> snapshot(const std::filesystem::path& p) { return read_file_bytes(p); }

std::size_t count_lines(const std::filesystem::path& p) {
    const auto bytes = read_file_bytes(p);
    std::size_t n = 0;
    for (auto b : bytes)
        if (b == '\n') ++n;
    return n;
}

}  // namespace

TEST_CASE("the pipeline produces a deterministic artifact tree") {
    testsupport::TempDir tmp("pipeline");
    const auto dir_a = tmp.path("a");
    const auto dir_b = tmp.path("b");
    const RunConfig cfg_a = tiny_config(dir_a);
    const RunConfig cfg_b = tiny_config(dir_b);
    const StageLogger log;

    run_pipeline(cfg_a, log);

    const ArtifactPaths a(dir_a);
    const std::vector<std::filesystem::path> expected = {
        a.train_set(),
        a.val_set(),
        a.annotations(),
        a.base_checkpoint(),
        a.advset("fgsm"),
        a.advset("deepfool"),
        a.advset("autoattack"),
        a.advset("sequential"),
        a.advset("fused"),
        a.attack_success(),
        a.train_advset(),
        a.finetuned_checkpoint(),
        a.monitor_csv(),
        a.eval_json("baseline"),
        a.eval_json("finetuned"),
        a.confusion_csv("baseline_clean"),
        a.confusion_csv("baseline_adv"),
        a.confusion_csv("finetuned_clean"),
        a.confusion_csv("finetuned_adv"),
        a.confusion_svg("baseline_clean"),
        a.confusion_svg("finetuned_adv"),
        a.detector_file(DetectorKind::adaboost),
        a.detector_file(DetectorKind::gbdt_level),
        a.detector_file(DetectorKind::gbdt_leaf),
        a.detector_file(DetectorKind::mlp),
        a.detectors_json(),
        a.report_json(),
        a.attack_success_svg(),
        a.detector_accuracy_svg(),
    };
    for (const auto& p : expected) {
        INFO("artifact " << p.string());
        CHECK(std::filesystem::exists(p));
    }
    // The sweep is a standalone subcommand, not a pipeline stage.
    CHECK_FALSE(std::filesystem::exists(a.sweep_csv()));

    const json report = read_json_file(a.report_json());
    REQUIRE(report.contains("baseline"));
    REQUIRE(report.contains("finetuned"));
    REQUIRE(report.contains("attack_success"));
    REQUIRE(report.contains("detectors"));
    CHECK(report.at("detectors").size() == 4);
    CHECK(report.at("detectors")[0].at("kind") == "adaboost");
    CHECK(report.at("detectors")[3].at("kind") == "mlp");
    for (const std::string name : {"fgsm", "deepfool", "autoattack", "sequential", "fused"})
        CHECK(report.at("attack_success").contains(name));

    // Rerunning the whole chain in place reproduces every key artifact byte
    // for byte.
    const auto report_bytes = snapshot(a.report_json());
    const auto monitor_bytes = snapshot(a.monitor_csv());
    const auto success_bytes = snapshot(a.attack_success());
    const auto detectors_bytes = snapshot(a.detectors_json());
    const auto finetuned_bytes = snapshot(a.finetuned_checkpoint());
    run_pipeline(cfg_a, log);
    CHECK(snapshot(a.report_json()) == report_bytes);
    CHECK(snapshot(a.monitor_csv()) == monitor_bytes);
    CHECK(snapshot(a.attack_success()) == success_bytes);
    CHECK(snapshot(a.detectors_json()) == detectors_bytes);
    CHECK(snapshot(a.finetuned_checkpoint()) == finetuned_bytes);

    // Driving the stages one by one matches the composite run exactly; none
    // of the compared artifacts embeds its output directory.
    run_gen_data(cfg_b, log);
    run_train_base(cfg_b, log);
    run_attack(cfg_b, log);
    run_build_advset(cfg_b, log);
    run_retrain(cfg_b, log);
    run_eval(cfg_b, log);
    run_train_detectors(cfg_b, log);
    run_report(cfg_b, log);
    const ArtifactPaths b(dir_b);
    CHECK(snapshot(b.report_json()) == report_bytes);
    CHECK(snapshot(b.monitor_csv()) == monitor_bytes);
    CHECK(snapshot(b.attack_success()) == success_bytes);
    CHECK(snapshot(b.detectors_json()) == detectors_bytes);
    CHECK(snapshot(b.finetuned_checkpoint()) == finetuned_bytes);
    CHECK(snapshot(b.train_set()) == snapshot(a.train_set()));
    CHECK(snapshot(b.annotations()) == snapshot(a.annotations()));
    CHECK(snapshot(b.eval_json("baseline")) == snapshot(a.eval_json("baseline")));
    CHECK(snapshot(b.eval_json("finetuned")) == snapshot(a.eval_json("finetuned")));

    // The sweep runs on top of the same artifacts and is itself reproducible.
    run_sweep(cfg_a, log);
    REQUIRE(std::filesystem::exists(a.sweep_csv()));
    REQUIRE(std::filesystem::exists(a.sweep_summary_csv()));
    CHECK(count_lines(a.sweep_csv()) == 1 + 2 * 2);  // header + kinds x grid
    CHECK(count_lines(a.sweep_summary_csv()) == 1 + 2);
    const auto sweep_bytes = snapshot(a.sweep_csv());
    const auto summary_bytes = snapshot(a.sweep_summary_csv());
    run_sweep(cfg_a, log);
    CHECK(snapshot(a.sweep_csv()) == sweep_bytes);
    CHECK(snapshot(a.sweep_summary_csv()) == summary_bytes);

    // The adversarial validation set concatenates the sequential and fused
    // attack sets with fresh consecutive ids.
    const LabeledDataset val_ds = load_dataset(a.val_set());
    const LabeledDataset adv_val = detail::load_adv_val(a);
    REQUIRE(adv_val.size() == 2 * val_ds.size());
    for (std::size_t i = 0; i < adv_val.size(); ++i)
        CHECK(adv_val.samples[i].id == static_cast<std::int64_t>(i));

    // Feature rows interleave clean, fgsm, deepfool, autoattack per image,
    // and the holdout cut lands on an image boundary.
    const DualEncoderModel base_model = load_checkpoint(a.base_checkpoint());
    const FeatureSet fs = pipeline_feature_set(cfg_a, a, base_model);
    REQUIRE(fs.n == 4 * val_ds.size());
    CHECK(fs.d == 8);
    CHECK(fs.n_train == 4 * 9);  // floor(0.75 * 12) images
    for (std::size_t i = 0; i < val_ds.size(); ++i) {
        CHECK(fs.adv_flags[4 * i] == 0);
        CHECK(fs.adv_flags[4 * i + 1] == 1);
        CHECK(fs.adv_flags[4 * i + 2] == 1);
        CHECK(fs.adv_flags[4 * i + 3] == 1);
        for (int v = 0; v < 4; ++v)
            CHECK(fs.labels[4 * i + static_cast<std::size_t>(v)] == val_ds.samples[i].label);
    }

    RunConfig starved = cfg_a;
    starved.detectors.holdout_fraction = 0.99;
    CHECK_THROWS_AS(pipeline_feature_set(starved, a, base_model), ConfigError);

    // A fgsm set that no longer matches the validation set is refused.
    AdvDataset fgsm_set = load_advset(a.advset("fgsm"));
    fgsm_set.records.pop_back();
    save_advset(fgsm_set, a.advset("fgsm"));
    CHECK_THROWS_WITH(pipeline_feature_set(cfg_a, a, base_model),
                      ContainsSubstring("does not match the validation set size"));
}

TEST_CASE("stages demand their upstream artifacts") {
    testsupport::TempDir tmp("deps");
    const RunConfig cfg = tiny_config(tmp.path("empty"));
    const StageLogger log;

    CHECK_THROWS_AS(run_train_base(cfg, log), DependencyError);
    CHECK_THROWS_AS(run_attack(cfg, log), DependencyError);
    CHECK_THROWS_AS(run_build_advset(cfg, log), DependencyError);
    CHECK_THROWS_AS(run_retrain(cfg, log), DependencyError);
    CHECK_THROWS_AS(run_eval(cfg, log), DependencyError);
    CHECK_THROWS_AS(run_train_detectors(cfg, log), DependencyError);
    CHECK_THROWS_AS(run_sweep(cfg, log), DependencyError);
    CHECK_THROWS_AS(run_report(cfg, log), DependencyError);
    CHECK_THROWS_WITH(run_eval(cfg, log),
                      ContainsSubstring("run the producing subcommand first"));
    CHECK_THROWS_WITH(run_eval(cfg, log), ContainsSubstring("missing required artifact"));

    RunConfig cifar = cfg;
    cifar.data.source = "cifar";
    cifar.data.cifar_path = tmp.path("absent.bin").string();
    cifar.validate();
    CHECK_THROWS_AS(run_gen_data(cifar, log), DependencyError);
}

TEST_CASE("gen-data ingests cifar batches") {
    testsupport::TempDir tmp("cifar");
    const LabeledDataset source = gen_synthetic(3, 10, 2, 32, 32);
    const auto raw = serialize_cifar10_batch(source);
    write_file_bytes(tmp.path("batch.bin"), raw);

    RunConfig cfg = tiny_config(tmp.path("out"));
    cfg.data.source = "cifar";
    cfg.data.cifar_path = tmp.path("batch.bin").string();
    cfg.data.train_fraction = 0.8;
    cfg.validate();

    const StageLogger log;
    run_gen_data(cfg, log);

    const ArtifactPaths paths(tmp.path("out"));
    const LabeledDataset train_ds = load_dataset(paths.train_set());
    const LabeledDataset val_ds = load_dataset(paths.val_set());
    CHECK(train_ds.size() == 8);
    CHECK(val_ds.size() == 2);
    CHECK(train_ds.class_names == cifar10_class_names());
    CHECK(train_ds.samples.front().height == 32);
    CHECK(std::filesystem::exists(paths.annotations()));
}

TEST_CASE("dataset concatenation renumbers ids") {
    const LabeledDataset first = gen_synthetic(5, 6, 2, 4, 4);
    const LabeledDataset second = gen_synthetic(6, 4, 2, 4, 4);

    const LabeledDataset merged = detail::concat_renumbered({&first, &second});
    REQUIRE(merged.size() == 10);
    for (std::size_t i = 0; i < merged.size(); ++i)
        CHECK(merged.samples[i].id == static_cast<std::int64_t>(i));
    CHECK(merged.samples[6].pixels == second.samples[0].pixels);
    CHECK(merged.samples[6].label == second.samples[0].label);
    CHECK(merged.class_names == first.class_names);

    CHECK_THROWS_AS(detail::concat_renumbered({}), InputError);
}
