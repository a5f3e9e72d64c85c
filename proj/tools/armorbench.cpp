// Command-line entry point: subcommand-driven pipeline orchestration over a
// single JSON config. Precedence for every setting is flag > config file >
// built-in default; ARMORBENCH_CONFIG supplies the default config path.

#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include <armorbench/armorbench.hpp>

namespace {

using armorbench::RunConfig;
using armorbench::StageLogger;

struct Overrides {
    std::optional<std::string> output_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    bool timestamps = false;
    std::optional<double> epsilon;
    std::optional<int> train_epochs;
    std::optional<int> retrain_epochs;
    std::optional<std::string> feature_checkpoint;
};

void apply_overrides(RunConfig& cfg, const Overrides& ov) {
    if (ov.output_dir) cfg.output_dir = *ov.output_dir;
    if (ov.seed) cfg.seed = *ov.seed;
    if (ov.threads) cfg.threads = *ov.threads;
    if (ov.timestamps) cfg.log_timestamps = true;
    if (ov.epsilon) cfg.attack.epsilon = *ov.epsilon;
    if (ov.train_epochs) cfg.train.epochs = *ov.train_epochs;
    if (ov.retrain_epochs) cfg.advtrain.epochs = *ov.retrain_epochs;
    if (ov.feature_checkpoint) cfg.detectors.feature_checkpoint = *ov.feature_checkpoint;
    cfg.validate();
}

struct Subcommand {
    const char* name;
    const char* description;
    void (*run)(const RunConfig&, const StageLogger&);
};

constexpr Subcommand kSubcommands[] = {
    {"gen-data", "generate or import the dataset and write the train/val split",
     armorbench::run_gen_data},
    {"train-base", "train the baseline dual-encoder classifier", armorbench::run_train_base},
    {"attack", "run all five attack variants against the validation set", armorbench::run_attack},
    {"build-advset", "build the mixed clean/adversarial training set",
     armorbench::run_build_advset},
    {"retrain", "fine-tune the baseline on the adversarial training set",
     armorbench::run_retrain},
    {"eval", "evaluate baseline and fine-tuned checkpoints on clean and adversarial data",
     armorbench::run_eval},
    {"train-detectors", "train the four detector families on encoder features",
     armorbench::run_train_detectors},
    {"sweep", "run the detector hyperparameter sensitivity sweep", armorbench::run_sweep},
    {"report", "assemble report.json and summary charts", armorbench::run_report},
    {"pipeline", "run the full chain from gen-data through report", armorbench::run_pipeline},
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adversarial-robustness workbench"};
    app.require_subcommand(0, 1);

    std::string config_path;
    bool print_defaults = false;
    Overrides ov;
    app.add_flag("--print-defaults", print_defaults,
                 "print the built-in default config as JSON and exit");

    const Subcommand* chosen = nullptr;
    for (const auto& sc : kSubcommands) {
        CLI::App* sub = app.add_subcommand(sc.name, sc.description);
        sub->add_option("--config", config_path, "JSON config file")
            ->envname("ARMORBENCH_CONFIG")
            ->required();
        sub->add_option("--output-dir", ov.output_dir, "override output_dir");
        sub->add_option("--seed", ov.seed, "override the global seed");
        sub->add_option("--threads", ov.threads, "override the worker thread count");
        sub->add_flag("--timestamps", ov.timestamps, "prefix log lines with UTC timestamps");
        sub->add_option("--epsilon", ov.epsilon, "override attack.epsilon");
        sub->add_option("--train-epochs", ov.train_epochs, "override train.epochs");
        sub->add_option("--retrain-epochs", ov.retrain_epochs, "override advtrain.epochs");
        sub->add_option("--feature-checkpoint", ov.feature_checkpoint,
                        "override detectors.feature_checkpoint (baseline|finetuned)");
        sub->callback([&chosen, &sc] { chosen = &sc; });
    }

    CLI11_PARSE(app, argc, argv);

    if (print_defaults) {
        RunConfig defaults;
        defaults.output_dir = "out";
        std::printf("%s\n", armorbench::dump_config(defaults).dump(2).c_str());
        return 0;
    }
    if (chosen == nullptr) {
        std::fprintf(stderr, "armorbench: a subcommand is required (see --help)\n");
        return 1;
    }

    try {
        RunConfig cfg = armorbench::load_config(config_path);
        apply_overrides(cfg, ov);
        StageLogger log;
        log.timestamps = cfg.log_timestamps;
        chosen->run(cfg, log);
        return 0;
    } catch (const armorbench::Error& e) {
        std::fprintf(stderr, "armorbench: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "armorbench: unexpected error: %s\n", e.what());
        return 1;
    }
}
