#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "common.hpp"
#include "image.hpp"
#include "model.hpp"

namespace armorbench {

// Anything the attacks can target: a K-class classifier with differentiable
// logits. The dual-encoder satisfies this; tests plug in small linear models.
template <typename M>
concept AttackModel = requires(const M& m, std::span<const float> x, int label, LossKind kind) {
    { m.num_classes() } -> std::convertible_to<int>;
    { m.input_dim() } -> std::convertible_to<std::size_t>;
    { m.logits(x) } -> std::same_as<std::vector<double>>;
    { m.loss_eval(x, label, kind) } -> std::same_as<LossEval>;
    { m.logits_and_grads(x) } ->
        std::same_as<std::pair<std::vector<double>, std::vector<std::vector<double>>>>;
};

struct AttackConfig {
    double epsilon = 8.0 / 255.0;
    int apgd_iters = 50;
    int apgd_restarts = 2;
    int deepfool_max_iter = 50;
    double deepfool_overshoot = 0.02;
    bool enable_dlr = true;
    std::array<double, 3> fuse_weights{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    std::uint64_t seed = 0;

    void validate() const {
        if (epsilon < 0.0) throw ConfigError("attack epsilon must be >= 0");
        if (apgd_iters < 0 || apgd_restarts < 0 || deepfool_max_iter < 0)
            throw ConfigError("attack iteration counts must be >= 0");
        if (deepfool_overshoot < 0.0) throw ConfigError("deepfool overshoot must be >= 0");
        double sum = 0.0;
        for (double w : fuse_weights) {
            if (w < 0.0) throw ConfigError("fuse weights must be nonnegative");
            sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("fuse weights must sum to 1");
    }
};

// An adversarial image plus provenance: which chain produced it, how far it
// sits from the original, and whether the model it was built against
// misclassifies it.
struct AdvExample {
    std::int64_t original_id = 0;
    int label = 0;
    std::vector<float> adv_pixels;
    std::vector<std::string> chain;
    std::string stage;
    double linf_norm = 0.0;
    double l2_norm = 0.0;
    bool success = false;
    int predicted_label = 0;
    int iterations = 0;
};

// ---------------------------------------------------------------------------
// Shared helpers.
// ---------------------------------------------------------------------------

inline std::vector<float> project_linf(std::span<const float> x, std::span<const float> x0,
                                       double epsilon) {
    check_same_shape(x.size(), x0.size(), "project_linf");
    std::vector<float> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double c = static_cast<double>(x0[i]);
        double v = std::clamp(static_cast<double>(x[i]), c - epsilon, c + epsilon);
        out[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
    return out;
}

inline std::vector<float> project_linf_d(std::span<const double> x, std::span<const float> x0,
                                         double epsilon) {
    check_same_shape(x.size(), x0.size(), "project_linf");
    std::vector<float> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double c = static_cast<double>(x0[i]);
        double v = std::clamp(x[i], c - epsilon, c + epsilon);
        out[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
    return out;
}

inline void check_finite_grad(std::span<const double> g, const char* attack, std::int64_t id) {
    for (double v : g)
        if (!std::isfinite(v))
            throw AttackError(std::string(attack) + ": non-finite gradient on sample " +
                              std::to_string(id));
}

template <AttackModel M>
inline void finalize_example(const M& model, AdvExample& ex, std::span<const float> original) {
    const auto z = model.logits(ex.adv_pixels);
    ex.predicted_label = argmax_label(z);
    ex.success = ex.predicted_label != ex.label;
    ex.linf_norm = linf_distance(ex.adv_pixels, original);
    ex.l2_norm = l2_distance(ex.adv_pixels, original);
}

// ---------------------------------------------------------------------------
// FGSM: one signed-gradient step of size epsilon, clipped to [0,1].
// ---------------------------------------------------------------------------

template <AttackModel M>
AdvExample fgsm(const M& model, const ImageSample& sample, double epsilon) {
    if (epsilon < 0.0) throw ConfigError("fgsm: epsilon must be >= 0");
    const auto ev = model.loss_eval(sample.pixels, sample.label, LossKind::ce);
    check_finite_grad(ev.grad, "fgsm", sample.id);

    AdvExample ex;
    ex.original_id = sample.id;
    ex.label = sample.label;
    ex.chain = {"fgsm"};
    ex.adv_pixels.resize(sample.pixels.size());
    for (std::size_t i = 0; i < sample.pixels.size(); ++i) {
        const double g = ev.grad[i];
        const double s = g > 0.0 ? 1.0 : (g < 0.0 ? -1.0 : 0.0);
        const double v = static_cast<double>(sample.pixels[i]) + epsilon * s;
        ex.adv_pixels[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
    ex.iterations = 1;
    finalize_example(model, ex, sample.pixels);
    return ex;
}

// ---------------------------------------------------------------------------
// DeepFool: repeatedly linearize the decision boundaries and apply the
// minimal step across the nearest one; the accumulated perturbation gets an
// overshoot factor (1+eta) so the crossing actually flips the prediction.
// Runs unconstrained (no epsilon ball); only the final image is clipped.
// ---------------------------------------------------------------------------

template <AttackModel M>
AdvExample deepfool_from(const M& model, std::span<const float> start, std::int64_t id, int label,
                         int max_iter, double overshoot) {
    if (max_iter < 0) throw ConfigError("deepfool: max_iter must be >= 0");
    if (overshoot < 0.0) throw ConfigError("deepfool: overshoot must be >= 0");
    const int K = model.num_classes();
    if (K < 2) throw ConfigError("deepfool: needs at least 2 classes");

    AdvExample ex;
    ex.original_id = id;
    ex.label = label;
    ex.chain = {"deepfool"};

    const std::size_t n = start.size();
    std::vector<double> r_tot(n, 0.0);
    std::vector<float> cur(start.begin(), start.end());

    {
        const auto z = model.logits(cur);
        if (argmax_label(z) != label) {
            // Already misclassified: nothing to do.
            ex.adv_pixels.assign(start.begin(), start.end());
            ex.iterations = 0;
            finalize_example(model, ex, start);
            return ex;
        }
    }

    int iters = 0;
    while (iters < max_iter) {
        auto [z, grads] = model.logits_and_grads(cur);
        if (argmax_label(z) != label) break;

        int best_k = -1;
        double best_ratio = std::numeric_limits<double>::infinity();
        double best_fk = 0.0, best_norm_sq = 0.0;
        for (int k = 0; k < K; ++k) {
            if (k == label) continue;
            double norm_sq = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double d = grads[static_cast<std::size_t>(k)][i] -
                                 grads[static_cast<std::size_t>(label)][i];
                norm_sq += d * d;
            }
            const double norm = std::sqrt(norm_sq);
            const double fk = std::abs(z[static_cast<std::size_t>(k)] -
                                       z[static_cast<std::size_t>(label)]);
            const double ratio = norm < 1e-12 ? std::numeric_limits<double>::infinity()
                                              : fk / norm;
            if (ratio < best_ratio) {
                best_ratio = ratio;
                best_k = k;
                best_fk = fk;
                best_norm_sq = norm_sq;
            }
        }
        if (best_k < 0 || !std::isfinite(best_ratio))
            throw DegenerateGeometryError("deepfool: all boundary gradients vanish on sample " +
                                          std::to_string(id));

        const double scale = best_fk / best_norm_sq;
        for (std::size_t i = 0; i < n; ++i)
            r_tot[i] += scale * (grads[static_cast<std::size_t>(best_k)][i] -
                                 grads[static_cast<std::size_t>(label)][i]);
        ++iters;

        for (std::size_t i = 0; i < n; ++i)
            cur[i] = static_cast<float>(static_cast<double>(start[i]) + (1.0 + overshoot) * r_tot[i]);
    }

    ex.adv_pixels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double v = static_cast<double>(start[i]) + (1.0 + overshoot) * r_tot[i];
        ex.adv_pixels[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
    ex.iterations = iters;
    finalize_example(model, ex, start);
    return ex;
}

template <AttackModel M>
AdvExample deepfool(const M& model, const ImageSample& sample, int max_iter, double overshoot) {
    return deepfool_from(model, sample.pixels, sample.id, sample.label, max_iter, overshoot);
}

// ---------------------------------------------------------------------------
// APGD: momentum-accelerated projected gradient ascent with a checkpointed
// step-size schedule. The step starts at 2*epsilon (so the first iterate is
// exactly the FGSM point when started from the original) and halves at
// checkpoints when progress stalls, restarting from the best point seen.
// Returns the first misclassified iterate when one appears — including the
// start point if the caller warm-starts — otherwise the best-loss iterate.
// ---------------------------------------------------------------------------

inline std::vector<int> apgd_checkpoints(int iters) {
    // The fraction sequence p_0=0, p_1=0.22, p_{j+1}=p_j+max(p_j-p_{j-1}-0.03,
    // 0.06) lives entirely on hundredths, so it is built in integer hundredths:
    // accumulating the doubles directly drifts ceil(0.57*100) up to 58.
    std::vector<int> w;
    long long q_prev = 0, q = 22;
    w.push_back(0);
    while (true) {
        const int wi = static_cast<int>((q * iters + 99) / 100);  // ceil(q/100 * iters)
        if (wi >= iters) break;
        if (wi > w.back()) w.push_back(wi);
        const long long q_next = q + std::max(q - q_prev - 3, 6LL);
        q_prev = q;
        q = q_next;
    }
    return w;
}

template <AttackModel M>
AdvExample apgd(const M& model, const ImageSample& sample, double epsilon, int iters,
                LossKind kind, std::span<const float> warm_start = {},
                std::vector<double>* best_loss_trace = nullptr) {
    if (iters < 1) throw ConfigError("apgd: iters must be >= 1");
    if (epsilon < 0.0) throw ConfigError("apgd: epsilon must be >= 0");
    const std::span<const float> x0(sample.pixels);
    const bool warm = !warm_start.empty();
    if (warm) check_same_shape(warm_start.size(), x0.size(), "apgd warm start");

    AdvExample ex;
    ex.original_id = sample.id;
    ex.label = sample.label;
    ex.chain = {"autoattack"};

    std::vector<float> x_prev = warm ? project_linf(warm_start, x0, epsilon)
                                     : std::vector<float>(x0.begin(), x0.end());

    auto ev = model.loss_eval(x_prev, sample.label, kind);
    check_finite_grad(ev.grad, "apgd", sample.id);
    if (warm && argmax_label(ev.logits) != sample.label) {
        // Warm start already adversarial; keep it.
        ex.adv_pixels = x_prev;
        ex.iterations = 0;
        finalize_example(model, ex, x0);
        return ex;
    }

    double step = 2.0 * epsilon;
    const double alpha = 0.75;  // momentum weight
    const double rho = 0.75;    // minimum fraction of ascent steps per checkpoint span

    auto signed_step = [&](std::span<const float> x, std::span<const double> g, double eta) {
        std::vector<double> out(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double s = g[i] > 0.0 ? 1.0 : (g[i] < 0.0 ? -1.0 : 0.0);
            out[i] = static_cast<double>(x[i]) + eta * s;
        }
        return out;
    };

    // First iterate: plain signed step (the FGSM point when starting cold).
    std::vector<float> x_cur = project_linf_d(signed_step(x_prev, ev.grad, step), x0, epsilon);
    auto ev_cur = model.loss_eval(x_cur, sample.label, kind);
    check_finite_grad(ev_cur.grad, "apgd", sample.id);

    std::vector<float> x_best = x_cur;
    double f_best = ev_cur.loss;
    if (best_loss_trace) best_loss_trace->push_back(f_best);
    if (argmax_label(ev_cur.logits) != sample.label) {
        ex.adv_pixels = x_cur;
        ex.iterations = 1;
        finalize_example(model, ex, x0);
        return ex;
    }

    const std::vector<int> ckpt = apgd_checkpoints(iters);
    std::size_t ckpt_idx = 1;
    int ascent_count = 0;
    double f_prev_iter = ev.loss;
    double f_best_at_prev_ckpt = f_best;
    double step_at_prev_ckpt = step;

    for (int k = 1; k < iters; ++k) {
        if (ev_cur.loss > f_prev_iter) ++ascent_count;
        f_prev_iter = ev_cur.loss;

        if (ckpt_idx < ckpt.size() && k == ckpt[ckpt_idx]) {
            const int span = ckpt[ckpt_idx] - ckpt[ckpt_idx - 1];
            const bool stalled = ascent_count < rho * span;
            const bool stuck = step == step_at_prev_ckpt && f_best == f_best_at_prev_ckpt;
            if (stalled || stuck) {
                step /= 2.0;
                x_cur = x_best;
                x_prev = x_best;
                ev_cur = model.loss_eval(x_cur, sample.label, kind);
            }
            ascent_count = 0;
            f_best_at_prev_ckpt = f_best;
            step_at_prev_ckpt = step;
            ++ckpt_idx;
        }

        // Momentum step: z is the plain ascent point, blended with the
        // previous displacement.
        std::vector<double> z = signed_step(x_cur, ev_cur.grad, step);
        std::vector<double> prop(z.size());
        for (std::size_t i = 0; i < z.size(); ++i) {
            const double zc = std::clamp(
                std::clamp(z[i], static_cast<double>(x0[i]) - epsilon,
                           static_cast<double>(x0[i]) + epsilon),
                0.0, 1.0);
            prop[i] = static_cast<double>(x_cur[i]) + alpha * (zc - static_cast<double>(x_cur[i])) +
                      (1.0 - alpha) * (static_cast<double>(x_cur[i]) - static_cast<double>(x_prev[i]));
        }
        std::vector<float> x_next = project_linf_d(prop, x0, epsilon);
        x_prev = std::move(x_cur);
        x_cur = std::move(x_next);
        ev_cur = model.loss_eval(x_cur, sample.label, kind);
        check_finite_grad(ev_cur.grad, "apgd", sample.id);

        if (ev_cur.loss > f_best) {
            f_best = ev_cur.loss;
            x_best = x_cur;
        }
        if (best_loss_trace) best_loss_trace->push_back(f_best);
        if (argmax_label(ev_cur.logits) != sample.label) {
            ex.adv_pixels = x_cur;
            ex.iterations = k + 1;
            finalize_example(model, ex, x0);
            return ex;
        }
    }

    ex.adv_pixels = x_best;
    ex.iterations = iters;
    finalize_example(model, ex, x0);
    return ex;
}

// ---------------------------------------------------------------------------
// AutoAttack-lite: an APGD-CE run from the original (whose first iterate is
// the FGSM point), optional APGD-CE restarts from random points in the ball,
// then one APGD-DLR run. First successful candidate wins; with no success the
// highest-CE candidate does (ties -> earliest).
// ---------------------------------------------------------------------------

template <AttackModel M>
AdvExample autoattack_lite(const M& model, const ImageSample& sample, const AttackConfig& cfg) {
    cfg.validate();
    if (cfg.apgd_iters < 1) throw ConfigError("autoattack_lite: apgd_iters must be >= 1");
    if (cfg.enable_dlr && model.num_classes() < 3)
        throw ConfigError("autoattack_lite: DLR stage requires at least 3 classes");

    Rng rng(derive_seed(cfg.seed, "autoattack:" + std::to_string(sample.id)));

    struct Candidate {
        AdvExample ex;
        std::string stage;
    };
    std::vector<Candidate> cands;

    auto finish = [&](AdvExample ex, const std::string& stage) {
        ex.chain = {"autoattack"};
        ex.stage = stage;
        return ex;
    };

    {
        AdvExample ex = apgd(model, sample, cfg.epsilon, cfg.apgd_iters, LossKind::ce);
        if (ex.success) return finish(std::move(ex), "apgd-ce");
        cands.push_back({std::move(ex), "apgd-ce"});
    }
    for (int r = 0; r < cfg.apgd_restarts; ++r) {
        std::vector<float> start(sample.pixels.size());
        for (std::size_t i = 0; i < start.size(); ++i) {
            const double v = static_cast<double>(sample.pixels[i]) +
                             rng.uniform(-cfg.epsilon, cfg.epsilon);
            start[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
        AdvExample ex = apgd(model, sample, cfg.epsilon, cfg.apgd_iters, LossKind::ce, start);
        if (ex.success) return finish(std::move(ex), "apgd-ce-restart" + std::to_string(r + 1));
        cands.push_back({std::move(ex), "apgd-ce-restart" + std::to_string(r + 1)});
    }
    if (cfg.enable_dlr) {
        AdvExample ex = apgd(model, sample, cfg.epsilon, cfg.apgd_iters, LossKind::dlr);
        if (ex.success) return finish(std::move(ex), "apgd-dlr");
        cands.push_back({std::move(ex), "apgd-dlr"});
    }

    // No candidate flips the label: keep the one with the highest CE loss.
    std::size_t best = 0;
    double best_ce = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cands.size(); ++i) {
        const double ce = loss_ce(model.logits(cands[i].ex.adv_pixels), sample.label);
        if (ce > best_ce) {
            best_ce = ce;
            best = i;
        }
    }
    return finish(std::move(cands[best].ex), cands[best].stage);
}

// ---------------------------------------------------------------------------
// Sequential attack integration: FGSM produces a base example, DeepFool
// refines it (result projected back into the epsilon ball so the budget
// holds), and APGD-CE warm-starts from the refinement.
// ---------------------------------------------------------------------------

template <AttackModel M>
AdvExample sequential_attack(const M& model, const ImageSample& sample, const AttackConfig& cfg) {
    cfg.validate();
    if (cfg.apgd_iters < 1) throw ConfigError("sequential_attack: apgd_iters must be >= 1");

    AdvExample base = fgsm(model, sample, cfg.epsilon);
    AdvExample refined = deepfool_from(model, base.adv_pixels, sample.id, sample.label,
                                       cfg.deepfool_max_iter, cfg.deepfool_overshoot);
    std::vector<float> projected = project_linf(refined.adv_pixels, sample.pixels, cfg.epsilon);

    AdvExample ex = apgd(model, sample, cfg.epsilon, cfg.apgd_iters, LossKind::ce, projected);
    ex.chain = {"fgsm", "deepfool", "autoattack"};
    ex.stage.clear();
    return ex;
}

// ---------------------------------------------------------------------------
// Feature-level fusion: pixel-wise weighted average of three adversarial
// images, clipped to [0,1].
// ---------------------------------------------------------------------------

inline std::vector<float> fuse(std::span<const float> a, std::span<const float> b,
                               std::span<const float> c, std::array<double, 3> weights = {
                                   1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}) {
    check_same_shape(a.size(), b.size(), "fuse");
    check_same_shape(a.size(), c.size(), "fuse");
    double sum = 0.0;
    for (double w : weights) {
        if (w < 0.0) throw ConfigError("fuse: weights must be nonnegative");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("fuse: weights must sum to 1");

    std::vector<float> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        // Sum the weighted terms in value order so permuting (images, weights)
        // together gives bit-identical output.
        std::array<double, 3> t{weights[0] * static_cast<double>(a[i]),
                                weights[1] * static_cast<double>(b[i]),
                                weights[2] * static_cast<double>(c[i])};
        std::sort(t.begin(), t.end());
        out[i] = static_cast<float>(std::clamp(t[0] + t[1] + t[2], 0.0, 1.0));
    }
    return out;
}

template <AttackModel M>
AdvExample fuse_examples(const M& model, const ImageSample& sample, const AdvExample& adv_fgsm,
                         const AdvExample& adv_deepfool, const AdvExample& adv_autoattack,
                         std::array<double, 3> weights = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}) {
    AdvExample ex;
    ex.original_id = sample.id;
    ex.label = sample.label;
    ex.chain = {"fused"};
    ex.adv_pixels = fuse(adv_fgsm.adv_pixels, adv_deepfool.adv_pixels,
                         adv_autoattack.adv_pixels, weights);
    finalize_example(model, ex, sample.pixels);
    return ex;
}

// ---------------------------------------------------------------------------
// Success accounting. Success is recomputed from live model predictions, not
// the stored flags, so the same set can be scored against any model.
// ---------------------------------------------------------------------------

inline std::string chain_name(const std::vector<std::string>& chain) {
    std::string s;
    for (const auto& c : chain) {
        if (!s.empty()) s += "+";
        s += c;
    }
    return s;
}

struct SuccessRates {
    double overall = 0.0;
    std::map<std::string, double> by_chain;
};

template <AttackModel M>
SuccessRates attack_success_rate(const M& model, const std::vector<AdvExample>& adv_set) {
    if (adv_set.empty()) throw InputError("attack_success_rate: empty adversarial set");
    SuccessRates out;
    std::map<std::string, std::pair<std::size_t, std::size_t>> tally;  // chain -> (hits, total)
    std::size_t hits = 0;
    for (const auto& ex : adv_set) {
        const bool miss = argmax_label(model.logits(ex.adv_pixels)) != ex.label;
        auto& t = tally[chain_name(ex.chain)];
        ++t.second;
        if (miss) {
            ++hits;
            ++t.first;
        }
    }
    out.overall = static_cast<double>(hits) / static_cast<double>(adv_set.size());
    for (const auto& [name, t] : tally)
        out.by_chain[name] = static_cast<double>(t.first) / static_cast<double>(t.second);
    return out;
}

// ---------------------------------------------------------------------------
// Adversarial dataset container (magic AADV): JSON metadata holding the
// attack config, the chain table, class names and dims; then per-example
// records id:i64, label:i32, chain_index:u32, float32 pixels.
// ---------------------------------------------------------------------------

inline constexpr char kAdvMagic[4] = {'A', 'A', 'D', 'V'};
inline constexpr std::uint32_t kAdvVersion = 1;

struct AdvRecord {
    std::int64_t id = 0;
    int label = 0;
    std::uint32_t chain_index = 0;
    std::vector<float> pixels;
};

struct AdvDataset {
    std::vector<std::vector<std::string>> chains;
    std::vector<AdvRecord> records;
    std::vector<std::string> class_names;
    int channels = 3;
    int height = 0;
    int width = 0;
    json config;

    std::vector<AdvExample> to_examples() const {
        std::vector<AdvExample> out;
        out.reserve(records.size());
        for (const auto& r : records) {
            AdvExample ex;
            ex.original_id = r.id;
            ex.label = r.label;
            ex.chain = chains.at(r.chain_index);
            ex.adv_pixels = r.pixels;
            out.push_back(std::move(ex));
        }
        return out;
    }

    LabeledDataset to_labeled_dataset() const {
        LabeledDataset ds;
        ds.class_names = class_names;
        ds.source = DataSource::synthetic;
        ds.samples.reserve(records.size());
        for (const auto& r : records) {
            ImageSample s;
            s.id = r.id;
            s.label = r.label;
            s.channels = channels;
            s.height = height;
            s.width = width;
            s.pixels = r.pixels;
            ds.samples.push_back(std::move(s));
        }
        return ds;
    }
};

inline AdvDataset advset_from_examples(const std::vector<AdvExample>& examples,
                                       const std::vector<std::string>& class_names, int height,
                                       int width, json config = json::object()) {
    AdvDataset ds;
    ds.class_names = class_names;
    ds.height = height;
    ds.width = width;
    ds.config = std::move(config);
    std::map<std::string, std::uint32_t> chain_ids;
    for (const auto& ex : examples) {
        const std::string key = chain_name(ex.chain);
        auto it = chain_ids.find(key);
        if (it == chain_ids.end()) {
            it = chain_ids.emplace(key, static_cast<std::uint32_t>(ds.chains.size())).first;
            ds.chains.push_back(ex.chain);
        }
        AdvRecord r;
        r.id = ex.original_id;
        r.label = ex.label;
        r.chain_index = it->second;
        r.pixels = ex.adv_pixels;
        ds.records.push_back(std::move(r));
    }
    return ds;
}

inline void save_advset(const AdvDataset& ds, const std::filesystem::path& path) {
    json meta = {{"config", ds.config},
                 {"chains", ds.chains},
                 {"class_names", ds.class_names},
                 {"count", ds.records.size()},
                 {"channels", ds.channels},
                 {"height", ds.height},
                 {"width", ds.width}};
    BlobWriter blob;
    for (const auto& r : ds.records) {
        blob.put_i64(r.id);
        blob.put_i32(r.label);
        blob.put_u32(r.chain_index);
        blob.put_f32(r.pixels);
    }
    write_container(path, kAdvMagic, kAdvVersion, meta, blob.bytes());
}

inline AdvDataset load_advset(const std::filesystem::path& path) {
    const Container c = read_container(path, kAdvMagic, kAdvVersion);
    AdvDataset ds;
    ds.chains = c.meta.at("chains").get<std::vector<std::vector<std::string>>>();
    ds.class_names = c.meta.at("class_names").get<std::vector<std::string>>();
    ds.channels = c.meta.at("channels").get<int>();
    ds.height = c.meta.at("height").get<int>();
    ds.width = c.meta.at("width").get<int>();
    ds.config = c.meta.at("config");
    const auto count = c.meta.at("count").get<std::size_t>();
    const std::size_t npix = static_cast<std::size_t>(ds.channels) * ds.height * ds.width;

    BlobReader r(c.blob);
    ds.records.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        AdvRecord rec;
        rec.id = r.get_i64();
        rec.label = r.get_i32();
        rec.chain_index = r.get_u32();
        if (rec.chain_index >= ds.chains.size())
            throw FormatError(path.string() + ": record " + std::to_string(i) +
                              " references unknown chain " + std::to_string(rec.chain_index));
        rec.pixels.resize(npix);
        r.get_f32(rec.pixels);
        ds.records.push_back(std::move(rec));
    }
    r.expect_end();
    return ds;
}

}  // namespace armorbench
