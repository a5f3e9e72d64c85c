#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "attacks.hpp"
#include "common.hpp"
#include "dataset.hpp"
#include "metrics.hpp"
#include "model.hpp"

namespace armorbench {

struct AdvTrainConfig {
    AttackConfig attack;
    std::array<double, 3> mix{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};  // clean, sequential, fused
    int epochs = 20;
    double lr = 0.05;
    double momentum = 0.9;
    int batch_size = 32;
    std::string optimizer = "sgd_momentum";
    std::uint64_t seed = 0;
    int threads = 1;

    void validate() const {
        attack.validate();
        double sum = 0.0;
        for (double m : mix) {
            if (m < 0.0) throw ConfigError("advtrain mix fractions must be nonnegative");
            sum += m;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("advtrain mix fractions must sum to 1");
        if (optimizer != "sgd_momentum") throw ConfigError("unknown optimizer '" + optimizer + "'");
    }
};

// Per-class quota split by the largest-remainder rule, so the three
// treatments stay proportional inside every class.
inline std::array<std::size_t, 3> largest_remainder_quota(std::size_t n,
                                                          const std::array<double, 3>& mix) {
    std::array<std::size_t, 3> base{};
    std::array<double, 3> rem{};
    std::size_t assigned = 0;
    for (int j = 0; j < 3; ++j) {
        const double q = mix[static_cast<std::size_t>(j)] * static_cast<double>(n);
        base[static_cast<std::size_t>(j)] = static_cast<std::size_t>(std::floor(q));
        rem[static_cast<std::size_t>(j)] = q - std::floor(q);
        assigned += base[static_cast<std::size_t>(j)];
    }
    std::array<int, 3> order{0, 1, 2};
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (rem[static_cast<std::size_t>(a)] != rem[static_cast<std::size_t>(b)])
            return rem[static_cast<std::size_t>(a)] > rem[static_cast<std::size_t>(b)];
        return a < b;
    });
    for (int j = 0; assigned < n; ++j, ++assigned)
        ++base[static_cast<std::size_t>(order[static_cast<std::size_t>(j % 3)])];
    return base;
}

enum class AdvTreatment { clean, sequential, fused };

struct AdvBuildResult {
    LabeledDataset dataset;                 // same ids/labels as the source, pixels replaced
    std::vector<AdvTreatment> treatment;    // parallel to dataset.samples
    std::size_t n_clean = 0, n_sequential = 0, n_fused = 0;
    std::vector<std::string> failures;      // attack failures that fell back to clean
};

// Build the combined adversarial training set: a seeded per-class partition
// of the source into clean / sequential-attack / fused examples. Labels are
// always the original true labels; attack failures fall back to clean and
// are logged, never dropped.
template <AttackModel M>
AdvBuildResult build_adversarial_dataset(const M& model, const LabeledDataset& dataset,
                                         const AdvTrainConfig& cfg) {
    cfg.validate();
    if (dataset.samples.empty()) throw InputError("build_adversarial_dataset: empty dataset");

    const std::size_t n = dataset.size();
    std::vector<AdvTreatment> plan(n, AdvTreatment::clean);

    // Group by class, shuffle within each class, then cut per-class quotas.
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < n; ++i) by_class[dataset.samples[i].label].push_back(i);
    Rng rng(derive_seed(cfg.seed, "advset_assign"));
    for (auto& [label, idx] : by_class) {
        rng.shuffle(idx);
        const auto quota = largest_remainder_quota(idx.size(), cfg.mix);
        std::size_t pos = 0;
        for (std::size_t j = 0; j < quota[0]; ++j) plan[idx[pos++]] = AdvTreatment::clean;
        for (std::size_t j = 0; j < quota[1]; ++j) plan[idx[pos++]] = AdvTreatment::sequential;
        for (std::size_t j = 0; j < quota[2]; ++j) plan[idx[pos++]] = AdvTreatment::fused;
    }

    AdvBuildResult out;
    out.dataset.class_names = dataset.class_names;
    out.dataset.source = dataset.source;
    out.dataset.samples = dataset.samples;  // replaced in place below

    std::vector<std::string> failure_slots(n);
    parallel_for(n, cfg.threads, [&](std::size_t i) {
        const ImageSample& src = dataset.samples[i];
        if (plan[i] == AdvTreatment::clean) return;
        try {
            if (plan[i] == AdvTreatment::sequential) {
                AdvExample ex = sequential_attack(model, src, cfg.attack);
                out.dataset.samples[i].pixels = std::move(ex.adv_pixels);
            } else {
                AdvExample f = fgsm(model, src, cfg.attack.epsilon);
                AdvExample d = deepfool(model, src, cfg.attack.deepfool_max_iter,
                                        cfg.attack.deepfool_overshoot);
                AdvExample a = autoattack_lite(model, src, cfg.attack);
                out.dataset.samples[i].pixels =
                    fuse(f.adv_pixels, d.adv_pixels, a.adv_pixels, cfg.attack.fuse_weights);
            }
        } catch (const AttackError& e) {
            failure_slots[i] = "sample " + std::to_string(src.id) + ": " + e.what();
            plan[i] = AdvTreatment::clean;
            out.dataset.samples[i].pixels = src.pixels;
        }
    });
    out.treatment = plan;

    for (std::size_t i = 0; i < n; ++i) {
        if (!failure_slots[i].empty()) out.failures.push_back(failure_slots[i]);
        switch (plan[i]) {
            case AdvTreatment::clean: ++out.n_clean; break;
            case AdvTreatment::sequential: ++out.n_sequential; break;
            case AdvTreatment::fused: ++out.n_fused; break;
        }
    }
    return out;
}

inline std::string to_string(AdvTreatment t) {
    switch (t) {
        case AdvTreatment::clean: return "clean";
        case AdvTreatment::sequential: return "sequential";
        default: return "fused";
    }
}

inline std::vector<std::string> treatment_chain(AdvTreatment t) {
    switch (t) {
        case AdvTreatment::clean: return {"clean"};
        case AdvTreatment::sequential: return {"fgsm", "deepfool", "autoattack"};
        default: return {"fused"};
    }
}

// ---------------------------------------------------------------------------
// Fine-tuning with clean/adversarial monitoring and best-checkpoint
// selection on adversarial validation accuracy (ties -> earliest epoch).
// ---------------------------------------------------------------------------

struct RetrainResult {
    DualEncoderModel model;
    std::vector<EpochLog> log;
    int best_epoch = -1;  // -1 when epochs == 0
};

inline RetrainResult retrain(const DualEncoderModel& model, const LabeledDataset& adv_dataset,
                             const LabeledDataset& val_clean, const LabeledDataset& val_adv,
                             const AdvTrainConfig& cfg) {
    cfg.validate();
    if (adv_dataset.samples.empty() || val_clean.samples.empty() || val_adv.samples.empty())
        throw InputError("retrain: datasets must be nonempty");
    if (cfg.epochs > 0 && !(cfg.lr > 0.0)) throw ConfigError("retrain: lr must be positive");

    RetrainResult out;
    out.model = model;
    if (cfg.epochs == 0) return out;

    DualEncoderModel current = model;
    SgdMomentum opt;
    opt.lr = cfg.lr;
    opt.momentum = cfg.momentum;

    Rng rng(derive_seed(cfg.seed, "retrain_shuffle"));
    std::vector<std::size_t> order(adv_dataset.size());
    std::iota(order.begin(), order.end(), 0);

    double best_acc = -1.0;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<const ImageSample*> batch;
            batch.reserve(end - start);
            for (std::size_t i = start; i < end; ++i)
                batch.push_back(&adv_dataset.samples[order[i]]);
            double loss;
            try {
                loss = train_step(current, batch, opt);
            } catch (const TrainingError&) {
                throw TrainingError("retraining diverged (non-finite loss) at epoch " +
                                    std::to_string(epoch));
            }
            loss_sum += loss * static_cast<double>(batch.size());
        }
        current.check_finite("retrain epoch " + std::to_string(epoch));

        EpochLog e;
        e.epoch = epoch;
        e.train_loss = loss_sum / static_cast<double>(adv_dataset.size());
        e.clean_val_acc = accuracy_on(current, val_clean);
        e.adv_val_acc = accuracy_on(current, val_adv);
        out.log.push_back(e);

        if (e.adv_val_acc > best_acc) {
            best_acc = e.adv_val_acc;
            out.model = current;
            out.best_epoch = epoch;
        }
    }
    return out;
}

inline void write_monitor_csv(const std::vector<EpochLog>& log, const std::filesystem::path& path) {
    std::string s = "epoch,train_loss,clean_val_acc,adv_val_acc\n";
    char buf[128];
    for (const auto& e : log) {
        std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g\n", e.epoch, e.train_loss,
                      e.clean_val_acc, e.adv_val_acc);
        s += buf;
    }
    write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

// ---------------------------------------------------------------------------
// Whole-dataset evaluation into a metrics bundle plus confusion matrix.
// ---------------------------------------------------------------------------

struct EvalReport {
    MetricsBundle bundle;
    ConfusionMatrix confusion;
    std::size_t n_eval = 0;
};

inline EvalReport evaluate_model(const DualEncoderModel& model, const LabeledDataset& dataset) {
    if (dataset.samples.empty()) throw InputError("evaluate_model: empty dataset");
    std::vector<int> y_true, y_pred;
    y_true.reserve(dataset.size());
    y_pred.reserve(dataset.size());
    for (const auto& s : dataset.samples) {
        y_true.push_back(s.label);
        y_pred.push_back(model.predict(s.pixels));
    }
    EvalReport r;
    r.confusion = confusion_matrix(y_true, y_pred, dataset.num_classes());
    r.bundle = metrics(r.confusion);
    r.n_eval = dataset.size();
    return r;
}

}  // namespace armorbench
