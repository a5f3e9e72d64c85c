#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "common.hpp"
#include "dataset.hpp"
#include "gbdt.hpp"
#include "metrics.hpp"
#include "model.hpp"

namespace armorbench {

// ---------------------------------------------------------------------------
// Feature sets: encoder embeddings (post L2-normalization) z-scored with
// statistics from the training portion (rows [0, n_train)).
// ---------------------------------------------------------------------------

struct FeatureSet {
    std::size_t n = 0, d = 0;
    std::vector<double> x;  // n x d row-major
    std::vector<int> labels;
    std::vector<std::uint8_t> adv_flags;
    std::size_t n_train = 0;
    std::vector<double> norm_mean, norm_std;
    std::vector<int> original_labels;  // filled by detection_task

    std::span<const double> row(std::size_t i) const {
        return std::span<const double>(x).subspan(i * d, d);
    }
    int num_classes() const {
        int k = 0;
        for (int y : labels) k = std::max(k, y + 1);
        return k;
    }
};

inline std::vector<double> extract_embedding(const DualEncoderModel& model,
                                             std::span<const float> pixels) {
    return model.forward_trace(pixels).ehat;
}

// Z-score all rows using mean/std of the training portion. Zero-variance
// dimensions divide by 1 so they come out exactly centered.
inline void normalize_features(FeatureSet& fs) {
    if (fs.n_train == 0 || fs.n_train > fs.n)
        throw InputError("normalize_features: training portion must be nonempty");
    fs.norm_mean.assign(fs.d, 0.0);
    fs.norm_std.assign(fs.d, 0.0);
    for (std::size_t i = 0; i < fs.n_train; ++i)
        for (std::size_t j = 0; j < fs.d; ++j) fs.norm_mean[j] += fs.x[i * fs.d + j];
    for (std::size_t j = 0; j < fs.d; ++j) fs.norm_mean[j] /= static_cast<double>(fs.n_train);
    for (std::size_t i = 0; i < fs.n_train; ++i)
        for (std::size_t j = 0; j < fs.d; ++j) {
            const double c = fs.x[i * fs.d + j] - fs.norm_mean[j];
            fs.norm_std[j] += c * c;
        }
    for (std::size_t j = 0; j < fs.d; ++j) {
        fs.norm_std[j] = std::sqrt(fs.norm_std[j] / static_cast<double>(fs.n_train));
        if (fs.norm_std[j] < 1e-12) fs.norm_std[j] = 1.0;
    }
    for (std::size_t i = 0; i < fs.n; ++i)
        for (std::size_t j = 0; j < fs.d; ++j)
            fs.x[i * fs.d + j] = (fs.x[i * fs.d + j] - fs.norm_mean[j]) / fs.norm_std[j];
}

// One input row per image: its embedding plus label and clean/adversarial
// provenance. Rows keep the given order; the caller decides n_train.
struct FeatureInput {
    const std::vector<float>* pixels;
    int label;
    bool adversarial;
};

inline FeatureSet extract_features(const DualEncoderModel& model,
                                   const std::vector<FeatureInput>& inputs, std::size_t n_train) {
    if (inputs.empty()) throw InputError("extract_features: empty input");
    FeatureSet fs;
    fs.n = inputs.size();
    fs.d = static_cast<std::size_t>(model.arch.embed_dim);
    fs.n_train = n_train == 0 ? fs.n : n_train;
    fs.x.resize(fs.n * fs.d);
    fs.labels.reserve(fs.n);
    fs.adv_flags.reserve(fs.n);
    for (std::size_t i = 0; i < fs.n; ++i) {
        const auto emb = extract_embedding(model, *inputs[i].pixels);
        std::copy(emb.begin(), emb.end(), fs.x.begin() + static_cast<std::ptrdiff_t>(i * fs.d));
        fs.labels.push_back(inputs[i].label);
        fs.adv_flags.push_back(inputs[i].adversarial ? 1 : 0);
    }
    normalize_features(fs);
    return fs;
}

// Swap in binary clean(0)/adversarial(1) labels; originals stay recoverable.
inline FeatureSet detection_task(const FeatureSet& fs) {
    if (fs.adv_flags.size() != fs.n) throw InputError("detection_task: adv_flags missing");
    FeatureSet out = fs;
    out.original_labels = fs.labels;
    for (std::size_t i = 0; i < fs.n; ++i) out.labels[i] = fs.adv_flags[i] ? 1 : 0;
    return out;
}

// ---------------------------------------------------------------------------
// Weighted classification trees (AdaBoost base learners). Splits minimize
// weighted misclassification error with majority-vote leaves; depth 1 is the
// classic decision stump. Tie-breaks: lowest feature, lowest threshold,
// lowest class.
// ---------------------------------------------------------------------------

struct ClassTreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    int label = 0;
};

struct ClassificationTree {
    std::vector<ClassTreeNode> nodes;

    int predict(std::span<const double> row) const {
        int cur = 0;
        while (nodes[static_cast<std::size_t>(cur)].feature >= 0) {
            const auto& nd = nodes[static_cast<std::size_t>(cur)];
            cur = row[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
        }
        return nodes[static_cast<std::size_t>(cur)].label;
    }
};

namespace detail {

inline int weighted_majority(std::span<const double> class_w) {
    int best = 0;
    for (std::size_t k = 1; k < class_w.size(); ++k)
        if (class_w[k] > class_w[static_cast<std::size_t>(best)]) best = static_cast<int>(k);
    return best;
}

struct ClassSplit {
    bool found = false;
    int feature = -1;
    double threshold = 0.0;
    double error = std::numeric_limits<double>::infinity();
};

// Best (feature, threshold) for a row subset by weighted misclassification
// error of majority-labeled children.
inline ClassSplit best_class_split(const std::vector<double>& x, std::size_t d,
                                   const std::vector<std::uint32_t>& rows,
                                   std::span<const int> y, std::span<const double> w, int k_out) {
    ClassSplit best;
    std::vector<double> total_w(static_cast<std::size_t>(k_out), 0.0);
    for (std::uint32_t r : rows) total_w[static_cast<std::size_t>(y[r])] += w[r];
    const double w_all = std::accumulate(total_w.begin(), total_w.end(), 0.0);

    std::vector<std::uint32_t> order = rows;
    std::vector<double> left_w(static_cast<std::size_t>(k_out));
    for (std::size_t f = 0; f < d; ++f) {
        std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
            const double va = x[a * d + f], vb = x[b * d + f];
            if (va != vb) return va < vb;
            return a < b;
        });
        std::fill(left_w.begin(), left_w.end(), 0.0);
        double left_sum = 0.0;
        double left_max = 0.0, right_max = 0.0;
        for (std::size_t i = 0; i + 1 <= order.size(); ++i) {
            const std::uint32_t r = order[i];
            left_w[static_cast<std::size_t>(y[r])] += w[r];
            left_sum += w[r];
            if (i + 1 == order.size()) break;
            const double v = x[r * d + f], v_next = x[order[i + 1] * d + f];
            if (v_next <= v) continue;
            left_max = *std::max_element(left_w.begin(), left_w.end());
            right_max = 0.0;
            for (int k = 0; k < k_out; ++k)
                right_max = std::max(right_max,
                                     total_w[static_cast<std::size_t>(k)] -
                                         left_w[static_cast<std::size_t>(k)]);
            const double err = (left_sum - left_max) + (w_all - left_sum - right_max);
            if (err < best.error) {
                best.found = true;
                best.error = err;
                best.feature = static_cast<int>(f);
                best.threshold = v + (v_next - v) / 2.0;
            }
        }
    }
    return best;
}

inline int grow_class_tree(ClassificationTree& tree, const std::vector<double>& x, std::size_t d,
                           std::vector<std::uint32_t> rows, std::span<const int> y,
                           std::span<const double> w, int k_out, int depth) {
    std::vector<double> class_w(static_cast<std::size_t>(k_out), 0.0);
    for (std::uint32_t r : rows) class_w[static_cast<std::size_t>(y[r])] += w[r];
    const int majority = weighted_majority(class_w);
    const double node_err = std::accumulate(class_w.begin(), class_w.end(), 0.0) -
                            class_w[static_cast<std::size_t>(majority)];

    const int node_id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(ClassTreeNode{});
    tree.nodes[static_cast<std::size_t>(node_id)].label = majority;
    if (depth <= 0 || node_err <= 1e-15 || rows.size() < 2) return node_id;

    const ClassSplit sp = best_class_split(x, d, rows, y, w, k_out);
    // Only split when it strictly reduces weighted error.
    if (!sp.found || sp.error >= node_err - 1e-15) return node_id;

    std::vector<std::uint32_t> left_rows, right_rows;
    for (std::uint32_t r : rows)
        (x[r * d + static_cast<std::size_t>(sp.feature)] <= sp.threshold ? left_rows : right_rows)
            .push_back(r);
    rows.clear();
    rows.shrink_to_fit();

    tree.nodes[static_cast<std::size_t>(node_id)].feature = sp.feature;
    tree.nodes[static_cast<std::size_t>(node_id)].threshold = sp.threshold;
    const int left = grow_class_tree(tree, x, d, std::move(left_rows), y, w, k_out, depth - 1);
    tree.nodes[static_cast<std::size_t>(node_id)].left = left;
    const int right = grow_class_tree(tree, x, d, std::move(right_rows), y, w, k_out, depth - 1);
    tree.nodes[static_cast<std::size_t>(node_id)].right = right;
    return node_id;
}

}  // namespace detail

inline ClassificationTree fit_weighted_tree(const std::vector<double>& x, std::size_t n,
                                            std::size_t d, std::span<const int> y,
                                            std::span<const double> w, int k_out, int depth) {
    if (depth < 1) throw ConfigError("fit_weighted_tree: depth must be >= 1");
    ClassificationTree tree;
    std::vector<std::uint32_t> rows(n);
    std::iota(rows.begin(), rows.end(), 0u);
    detail::grow_class_tree(tree, x, d, std::move(rows), y, w, k_out, depth);
    return tree;
}

// ---------------------------------------------------------------------------
// AdaBoost (multiclass SAMME): alpha_m = lr*(ln((1-err)/err) + ln(K-1)),
// halting early when a round's weighted error reaches 1 - 1/K.
// ---------------------------------------------------------------------------

struct AdaBoostModel {
    int k_out = 0;
    std::size_t d_in = 0;
    int depth = 1;
    std::vector<ClassificationTree> learners;
    std::vector<double> alphas;
    int halt_round = -1;  // round at which boosting stopped early, -1 if none

    std::vector<double> predict_scores(std::span<const double> row) const {
        std::vector<double> score(static_cast<std::size_t>(k_out), 0.0);
        for (std::size_t m = 0; m < learners.size(); ++m)
            score[static_cast<std::size_t>(learners[m].predict(row))] += alphas[m];
        return score;
    }
};

inline AdaBoostModel train_adaboost(const std::vector<double>& x, std::size_t n, std::size_t d,
                                    std::span<const int> labels, int rounds, int depth = 1,
                                    double lr = 1.0,
                                    std::vector<std::vector<double>>* weight_history = nullptr) {
    if (rounds < 1) throw ConfigError("train_adaboost: rounds must be >= 1");
    if (n == 0 || labels.size() != n) throw InputError("train_adaboost: bad input sizes");
    if (!(lr > 0.0)) throw ConfigError("train_adaboost: lr must be positive");
    int k_out = 0;
    for (int y : labels) {
        if (y < 0) throw InputError("train_adaboost: negative label");
        k_out = std::max(k_out, y + 1);
    }
    std::vector<std::size_t> class_count(static_cast<std::size_t>(std::max(k_out, 1)), 0);
    for (int y : labels) ++class_count[static_cast<std::size_t>(y)];
    if (std::count_if(class_count.begin(), class_count.end(), [](std::size_t c) { return c > 0; }) < 2)
        throw InputError("train_adaboost: need at least 2 classes present");

    AdaBoostModel model;
    model.k_out = k_out;
    model.d_in = d;
    model.depth = depth;

    std::vector<double> w(n, 1.0 / static_cast<double>(n));
    for (int m = 0; m < rounds; ++m) {
        ClassificationTree tree = fit_weighted_tree(x, n, d, labels, w, k_out, depth);
        std::vector<std::uint8_t> mis(n);
        double err = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            mis[i] = tree.predict(std::span<const double>(x).subspan(i * d, d)) != labels[i];
            if (mis[i]) err += w[i];
        }
        if (err >= 1.0 - 1.0 / static_cast<double>(k_out)) {
            // Weak learner no better than chance: stop and record the round.
            model.halt_round = m;
            break;
        }
        const double err_c = std::max(err, 1e-12);
        const double alpha = lr * (std::log((1.0 - err_c) / err_c) +
                                   std::log(static_cast<double>(k_out) - 1.0));
        model.learners.push_back(std::move(tree));
        model.alphas.push_back(alpha);
        if (err <= 1e-12) {
            // Perfect learner: nothing left to reweight.
            model.halt_round = m + 1;
            break;
        }

        double sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (mis[i]) w[i] *= std::exp(alpha);
            sum += w[i];
        }
        for (double& wi : w) wi /= sum;
        if (weight_history) weight_history->push_back(w);
    }
    if (model.learners.empty())
        throw TrainingError("train_adaboost: first learner was no better than chance");
    return model;
}

// ---------------------------------------------------------------------------
// One-hidden-layer MLP detector: relu hidden layer, softmax output,
// cross-entropy loss, seeded minibatch SGD with momentum. Double precision
// throughout.
// ---------------------------------------------------------------------------

struct MlpParams {
    int hidden = 64;
    int epochs = 200;
    double lr = 0.05;
    double momentum = 0.9;
    int batch_size = 32;
    std::uint64_t seed = 0;
};

struct MlpModel {
    int k_out = 0;
    std::size_t d_in = 0;
    int hidden = 0;
    std::vector<double> w1, b1, w2, b2;  // w1: hidden x d_in, w2: k_out x hidden

    std::vector<double> predict_scores(std::span<const double> row) const {
        std::vector<double> a(static_cast<std::size_t>(hidden));
        for (int j = 0; j < hidden; ++j) {
            double acc = b1[static_cast<std::size_t>(j)];
            const double* wr = w1.data() + static_cast<std::size_t>(j) * d_in;
            for (std::size_t i = 0; i < d_in; ++i) acc += wr[i] * row[i];
            a[static_cast<std::size_t>(j)] = acc > 0.0 ? acc : 0.0;
        }
        std::vector<double> z(static_cast<std::size_t>(k_out));
        for (int k = 0; k < k_out; ++k) {
            double acc = b2[static_cast<std::size_t>(k)];
            const double* wr = w2.data() + static_cast<std::size_t>(k) * static_cast<std::size_t>(hidden);
            for (int j = 0; j < hidden; ++j) acc += wr[j] * a[static_cast<std::size_t>(j)];
            z[static_cast<std::size_t>(k)] = acc;
        }
        return z;
    }
};

struct MlpGrads {
    std::vector<double> w1, b1, w2, b2;
};

// Mean-CE loss and parameter gradients over a batch of row indices.
inline std::pair<double, MlpGrads> mlp_loss_grads(const MlpModel& m, const std::vector<double>& x,
                                                  std::span<const int> labels,
                                                  std::span<const std::size_t> batch) {
    if (batch.empty()) throw InputError("mlp_loss_grads: empty batch");
    MlpGrads g;
    g.w1.assign(m.w1.size(), 0.0);
    g.b1.assign(m.b1.size(), 0.0);
    g.w2.assign(m.w2.size(), 0.0);
    g.b2.assign(m.b2.size(), 0.0);
    double loss_sum = 0.0;

    std::vector<double> a(static_cast<std::size_t>(m.hidden));
    std::vector<double> pre(static_cast<std::size_t>(m.hidden));
    for (std::size_t bi : batch) {
        const double* row = x.data() + bi * m.d_in;
        for (int j = 0; j < m.hidden; ++j) {
            double acc = m.b1[static_cast<std::size_t>(j)];
            const double* wr = m.w1.data() + static_cast<std::size_t>(j) * m.d_in;
            for (std::size_t i = 0; i < m.d_in; ++i) acc += wr[i] * row[i];
            pre[static_cast<std::size_t>(j)] = acc;
            a[static_cast<std::size_t>(j)] = acc > 0.0 ? acc : 0.0;
        }
        std::vector<double> z(static_cast<std::size_t>(m.k_out));
        for (int k = 0; k < m.k_out; ++k) {
            double acc = m.b2[static_cast<std::size_t>(k)];
            const double* wr =
                m.w2.data() + static_cast<std::size_t>(k) * static_cast<std::size_t>(m.hidden);
            for (int j = 0; j < m.hidden; ++j) acc += wr[j] * a[static_cast<std::size_t>(j)];
            z[static_cast<std::size_t>(k)] = acc;
        }
        loss_sum += loss_ce(z, labels[bi]);
        auto dz = loss_ce_grad(z, labels[bi]);

        std::vector<double> da(static_cast<std::size_t>(m.hidden), 0.0);
        for (int k = 0; k < m.k_out; ++k) {
            const double gk = dz[static_cast<std::size_t>(k)];
            g.b2[static_cast<std::size_t>(k)] += gk;
            const double* wr =
                m.w2.data() + static_cast<std::size_t>(k) * static_cast<std::size_t>(m.hidden);
            double* gr =
                g.w2.data() + static_cast<std::size_t>(k) * static_cast<std::size_t>(m.hidden);
            for (int j = 0; j < m.hidden; ++j) {
                gr[j] += gk * a[static_cast<std::size_t>(j)];
                da[static_cast<std::size_t>(j)] += gk * wr[j];
            }
        }
        for (int j = 0; j < m.hidden; ++j) {
            if (pre[static_cast<std::size_t>(j)] <= 0.0) continue;
            const double gj = da[static_cast<std::size_t>(j)];
            g.b1[static_cast<std::size_t>(j)] += gj;
            double* gr = g.w1.data() + static_cast<std::size_t>(j) * m.d_in;
            for (std::size_t i = 0; i < m.d_in; ++i) gr[i] += gj * row[i];
        }
    }

    const double inv = 1.0 / static_cast<double>(batch.size());
    loss_sum *= inv;
    for (auto* blk : {&g.w1, &g.b1, &g.w2, &g.b2})
        for (double& v : *blk) v *= inv;
    return {loss_sum, std::move(g)};
}

inline MlpModel init_mlp(std::size_t d_in, int hidden, int k_out, std::uint64_t seed) {
    if (hidden < 1 || k_out < 2) throw ConfigError("init_mlp: hidden >= 1 and k_out >= 2 required");
    MlpModel m;
    m.d_in = d_in;
    m.hidden = hidden;
    m.k_out = k_out;
    Rng rng(derive_seed(seed, "init_mlp"));
    auto glorot = [&](std::vector<double>& w, std::size_t count, double fan_in, double fan_out) {
        const double a = std::sqrt(6.0 / (fan_in + fan_out));
        w.resize(count);
        for (double& v : w) v = rng.uniform(-a, a);
    };
    glorot(m.w1, static_cast<std::size_t>(hidden) * d_in, static_cast<double>(d_in), hidden);
    m.b1.assign(static_cast<std::size_t>(hidden), 0.0);
    glorot(m.w2, static_cast<std::size_t>(k_out) * static_cast<std::size_t>(hidden), hidden, k_out);
    m.b2.assign(static_cast<std::size_t>(k_out), 0.0);
    return m;
}

inline MlpModel train_mlp(const std::vector<double>& x, std::size_t n, std::size_t d,
                          std::span<const int> labels, const MlpParams& params) {
    if (n == 0 || labels.size() != n) throw InputError("train_mlp: bad input sizes");
    if (params.epochs < 0 || params.batch_size < 1) throw ConfigError("train_mlp: bad params");
    int k_out = 0;
    for (int y : labels) k_out = std::max(k_out, y + 1);
    if (k_out < 2) throw InputError("train_mlp: need at least 2 classes");

    MlpModel m = init_mlp(d, params.hidden, k_out, params.seed);
    MlpGrads vel;
    vel.w1.assign(m.w1.size(), 0.0);
    vel.b1.assign(m.b1.size(), 0.0);
    vel.w2.assign(m.w2.size(), 0.0);
    vel.b2.assign(m.b2.size(), 0.0);

    Rng rng(derive_seed(params.seed, "train_mlp"));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < params.epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(params.batch_size)) {
            const std::size_t end = std::min(n, start + static_cast<std::size_t>(params.batch_size));
            auto [loss, g] = mlp_loss_grads(
                m, x, labels, std::span<const std::size_t>(order).subspan(start, end - start));
            if (!std::isfinite(loss))
                throw TrainingError("mlp training diverged at epoch " + std::to_string(epoch));
            auto step = [&](std::vector<double>& p, std::vector<double>& v,
                            const std::vector<double>& gr) {
                for (std::size_t i = 0; i < p.size(); ++i) {
                    v[i] = params.momentum * v[i] - params.lr * gr[i];
                    p[i] += v[i];
                }
            };
            step(m.w1, vel.w1, g.w1);
            step(m.b1, vel.b1, g.b1);
            step(m.w2, vel.w2, g.w2);
            step(m.b2, vel.b2, g.b2);
        }
    }
    return m;
}

// ---------------------------------------------------------------------------
// Detector umbrella: one of the four families behind a common probability
// interface. predict_proba rows are softmax over family scores, so they sum
// to 1; predict is the row argmax with ties to the lowest index.
// ---------------------------------------------------------------------------

enum class DetectorKind { adaboost, gbdt_level, gbdt_leaf, mlp };

inline std::string to_string(DetectorKind k) {
    switch (k) {
        case DetectorKind::adaboost: return "adaboost";
        case DetectorKind::gbdt_level: return "gbdt_level";
        case DetectorKind::gbdt_leaf: return "gbdt_leaf";
        default: return "mlp";
    }
}

inline DetectorKind detector_kind_from_string(const std::string& s) {
    if (s == "adaboost") return DetectorKind::adaboost;
    if (s == "gbdt_level") return DetectorKind::gbdt_level;
    if (s == "gbdt_leaf") return DetectorKind::gbdt_leaf;
    if (s == "mlp") return DetectorKind::mlp;
    throw ConfigError("unknown detector kind '" + s + "'");
}

struct Detector {
    DetectorKind kind = DetectorKind::adaboost;
    AdaBoostModel adaboost;
    GbdtModel gbdt;
    MlpModel mlp;
    json hyperparams = json::object();

    int k_out() const {
        switch (kind) {
            case DetectorKind::adaboost: return adaboost.k_out;
            case DetectorKind::gbdt_level:
            case DetectorKind::gbdt_leaf: return gbdt.k_out;
            default: return mlp.k_out;
        }
    }
    std::size_t d_in() const {
        switch (kind) {
            case DetectorKind::adaboost: return adaboost.d_in;
            case DetectorKind::gbdt_level:
            case DetectorKind::gbdt_leaf: return gbdt.d_in;
            default: return mlp.d_in;
        }
    }

    std::vector<double> scores(std::span<const double> row) const {
        switch (kind) {
            case DetectorKind::adaboost: return adaboost.predict_scores(row);
            case DetectorKind::gbdt_level:
            case DetectorKind::gbdt_leaf: return gbdt.predict_scores(row);
            default: return mlp.predict_scores(row);
        }
    }
};

inline std::vector<double> predict_proba_row(const Detector& det, std::span<const double> row) {
    if (row.size() != det.d_in())
        throw ShapeError("predict_proba: feature dimension " + std::to_string(row.size()) +
                         " does not match training dimension " + std::to_string(det.d_in()));
    return softmax(det.scores(row));
}

inline std::vector<double> predict_proba(const Detector& det, const FeatureSet& fs) {
    std::vector<double> out(fs.n * static_cast<std::size_t>(det.k_out()));
    for (std::size_t i = 0; i < fs.n; ++i) {
        const auto p = predict_proba_row(det, fs.row(i));
        std::copy(p.begin(), p.end(),
                  out.begin() + static_cast<std::ptrdiff_t>(i * static_cast<std::size_t>(det.k_out())));
    }
    return out;
}

inline int predict_row(const Detector& det, std::span<const double> row) {
    const auto p = predict_proba_row(det, row);
    int best = 0;
    for (std::size_t k = 1; k < p.size(); ++k)
        if (p[k] > p[static_cast<std::size_t>(best)]) best = static_cast<int>(k);
    return best;
}

inline std::vector<int> predict(const Detector& det, const FeatureSet& fs) {
    std::vector<int> out(fs.n);
    for (std::size_t i = 0; i < fs.n; ++i) out[i] = predict_row(det, fs.row(i));
    return out;
}

// ---------------------------------------------------------------------------
// Training-portion/holdout helpers and detector evaluation.
// ---------------------------------------------------------------------------

struct DetectorParams {
    int adaboost_rounds = 100;
    int adaboost_depth = 1;
    double adaboost_lr = 1.0;
    GbdtParams gbdt;
    MlpParams mlp;
};

inline Detector train_detector(DetectorKind kind, const FeatureSet& fs,
                               const DetectorParams& params) {
    // Train on the training portion only.
    const std::size_t n = fs.n_train;
    std::vector<double> x(fs.x.begin(), fs.x.begin() + static_cast<std::ptrdiff_t>(n * fs.d));
    std::vector<int> y(fs.labels.begin(), fs.labels.begin() + static_cast<std::ptrdiff_t>(n));

    Detector det;
    det.kind = kind;
    switch (kind) {
        case DetectorKind::adaboost:
            det.adaboost = train_adaboost(x, n, fs.d, y, params.adaboost_rounds,
                                          params.adaboost_depth, params.adaboost_lr);
            det.hyperparams = {{"rounds", params.adaboost_rounds},
                               {"depth", params.adaboost_depth},
                               {"lr", params.adaboost_lr}};
            break;
        case DetectorKind::gbdt_level:
            det.gbdt = train_gbdt(x, n, fs.d, y, GrowthPolicy::level_wise, params.gbdt);
            det.hyperparams = {{"trees", params.gbdt.trees},
                               {"lr", params.gbdt.lr},
                               {"max_depth", params.gbdt.max_depth}};
            break;
        case DetectorKind::gbdt_leaf:
            det.gbdt = train_gbdt(x, n, fs.d, y, GrowthPolicy::leaf_wise, params.gbdt);
            det.hyperparams = {{"trees", params.gbdt.trees},
                               {"lr", params.gbdt.lr},
                               {"max_leaves", params.gbdt.max_leaves}};
            break;
        case DetectorKind::mlp:
            det.mlp = train_mlp(x, n, fs.d, y, params.mlp);
            det.hyperparams = {{"hidden", params.mlp.hidden},
                               {"epochs", params.mlp.epochs},
                               {"lr", params.mlp.lr}};
            break;
    }
    return det;
}

// Metrics over the holdout rows [n_train, n).
inline MetricsBundle evaluate_detector(const Detector& det, const FeatureSet& fs) {
    if (fs.n_train >= fs.n) throw InputError("evaluate_detector: no holdout rows");
    std::vector<int> y_true, y_pred;
    for (std::size_t i = fs.n_train; i < fs.n; ++i) {
        y_true.push_back(fs.labels[i]);
        y_pred.push_back(predict_row(det, fs.row(i)));
    }
    const int k = std::max(det.k_out(), fs.num_classes());
    return metrics(confusion_matrix(y_true, y_pred, k));
}

// ---------------------------------------------------------------------------
// Hyperparameter sensitivity sweep over lr x depth-or-leaves. The second
// axis maps per family: AdaBoost tree depth, level-wise max_depth, leaf-wise
// max_leaves, and hidden = 8 * value for the MLP.
// ---------------------------------------------------------------------------

struct SweepRow {
    DetectorKind kind;
    double lr = 0.0;
    int depth_or_leaves = 0;
    double accuracy = 0.0;
    double f1_macro = 0.0;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::map<std::string, double> accuracy_range;  // kind -> max - min
};

inline SweepResult sensitivity_sweep(const std::vector<DetectorKind>& kinds,
                                     const std::vector<double>& lrs,
                                     const std::vector<int>& depth_or_leaves,
                                     const FeatureSet& fs, const DetectorParams& base,
                                     std::uint64_t seed) {
    if (lrs.empty() || depth_or_leaves.empty()) throw ConfigError("sensitivity_sweep: empty grid");
    SweepResult out;
    for (DetectorKind kind : kinds) {
        double acc_min = std::numeric_limits<double>::infinity();
        double acc_max = -std::numeric_limits<double>::infinity();
        for (double lr : lrs)
            for (int dl : depth_or_leaves) {
                DetectorParams p = base;
                switch (kind) {
                    case DetectorKind::adaboost:
                        p.adaboost_lr = lr;
                        p.adaboost_depth = dl;
                        break;
                    case DetectorKind::gbdt_level:
                        p.gbdt.lr = lr;
                        p.gbdt.max_depth = dl;
                        break;
                    case DetectorKind::gbdt_leaf:
                        p.gbdt.lr = lr;
                        p.gbdt.max_leaves = dl;
                        break;
                    case DetectorKind::mlp:
                        p.mlp.lr = lr;
                        p.mlp.hidden = 8 * dl;
                        p.mlp.seed = derive_seed(seed, "sweep_mlp_" + std::to_string(dl));
                        break;
                }
                // A cell whose training diverges scores zero (an untrained
                // detector classifies nothing): the family's accuracy range
                // then exposes the instability instead of one hot cell
                // aborting the whole sweep. Structural errors still throw.
                double cell_acc = 0.0, cell_f1 = 0.0;
                try {
                    const Detector det = train_detector(kind, fs, p);
                    const MetricsBundle b = evaluate_detector(det, fs);
                    cell_acc = b.accuracy;
                    cell_f1 = b.macro_f1;
                } catch (const TrainingError&) {
                }
                out.rows.push_back({kind, lr, dl, cell_acc, cell_f1});
                acc_min = std::min(acc_min, cell_acc);
                acc_max = std::max(acc_max, cell_acc);
            }
        out.accuracy_range[to_string(kind)] = acc_max - acc_min;
    }
    return out;
}

inline void write_sweep_csv(const SweepResult& sw, const std::filesystem::path& path) {
    std::string s = "kind,lr,depth_or_leaves,accuracy,f1_macro\n";
    char buf[160];
    for (const auto& r : sw.rows) {
        std::snprintf(buf, sizeof(buf), "%s,%.9g,%d,%.9g,%.9g\n", to_string(r.kind).c_str(), r.lr,
                      r.depth_or_leaves, r.accuracy, r.f1_macro);
        s += buf;
    }
    write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

inline void write_sweep_summary_csv(const SweepResult& sw, const std::filesystem::path& path) {
    std::string s = "kind,accuracy_range\n";
    char buf[96];
    for (const auto& [kind, range] : sw.accuracy_range) {
        std::snprintf(buf, sizeof(buf), "%s,%.9g\n", kind.c_str(), range);
        s += buf;
    }
    write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

// ---------------------------------------------------------------------------
// Detector container (magic ADET): tree ensembles live in the JSON metadata
// as node arrays; MLP weights go to the float64 blob.
// ---------------------------------------------------------------------------

inline constexpr char kDetectorMagic[4] = {'A', 'D', 'E', 'T'};
inline constexpr std::uint32_t kDetectorVersion = 1;

inline json class_tree_to_json(const ClassificationTree& t) {
    json nodes = json::array();
    for (const auto& nd : t.nodes)
        nodes.push_back({{"feature", nd.feature},
                         {"threshold", nd.threshold},
                         {"left", nd.left},
                         {"right", nd.right},
                         {"label", nd.label}});
    return nodes;
}

inline ClassificationTree class_tree_from_json(const json& j) {
    ClassificationTree t;
    for (const auto& nd : j) {
        ClassTreeNode n;
        n.feature = nd.at("feature").get<int>();
        n.threshold = nd.at("threshold").get<double>();
        n.left = nd.at("left").get<int>();
        n.right = nd.at("right").get<int>();
        n.label = nd.at("label").get<int>();
        t.nodes.push_back(n);
    }
    if (t.nodes.empty()) throw FormatError("class_tree_from_json: empty node array");
    return t;
}

inline void save_detector(const Detector& det, const std::filesystem::path& path) {
    json meta = {{"kind", to_string(det.kind)}, {"hyperparams", det.hyperparams}};
    BlobWriter blob;
    switch (det.kind) {
        case DetectorKind::adaboost: {
            json learners = json::array();
            for (const auto& t : det.adaboost.learners) learners.push_back(class_tree_to_json(t));
            meta["model"] = {{"k_out", det.adaboost.k_out},
                             {"d_in", det.adaboost.d_in},
                             {"depth", det.adaboost.depth},
                             {"alphas", det.adaboost.alphas},
                             {"halt_round", det.adaboost.halt_round},
                             {"learners", std::move(learners)}};
            break;
        }
        case DetectorKind::gbdt_level:
        case DetectorKind::gbdt_leaf:
            meta["model"] = gbdt_to_json(det.gbdt);
            break;
        case DetectorKind::mlp:
            meta["model"] = {{"k_out", det.mlp.k_out},
                            {"d_in", det.mlp.d_in},
                            {"hidden", det.mlp.hidden}};
            blob.put_f64(det.mlp.w1);
            blob.put_f64(det.mlp.b1);
            blob.put_f64(det.mlp.w2);
            blob.put_f64(det.mlp.b2);
            break;
    }
    write_container(path, kDetectorMagic, kDetectorVersion, meta, blob.bytes());
}

inline Detector load_detector(const std::filesystem::path& path) {
    const Container c = read_container(path, kDetectorMagic, kDetectorVersion);
    Detector det;
    det.kind = detector_kind_from_string(c.meta.at("kind").get<std::string>());
    det.hyperparams = c.meta.at("hyperparams");
    const json& mj = c.meta.at("model");
    switch (det.kind) {
        case DetectorKind::adaboost: {
            det.adaboost.k_out = mj.at("k_out").get<int>();
            det.adaboost.d_in = mj.at("d_in").get<std::size_t>();
            det.adaboost.depth = mj.at("depth").get<int>();
            det.adaboost.alphas = mj.at("alphas").get<std::vector<double>>();
            det.adaboost.halt_round = mj.at("halt_round").get<int>();
            for (const auto& t : mj.at("learners"))
                det.adaboost.learners.push_back(class_tree_from_json(t));
            break;
        }
        case DetectorKind::gbdt_level:
        case DetectorKind::gbdt_leaf:
            det.gbdt = gbdt_from_json(mj);
            break;
        case DetectorKind::mlp: {
            det.mlp.k_out = mj.at("k_out").get<int>();
            det.mlp.d_in = mj.at("d_in").get<std::size_t>();
            det.mlp.hidden = mj.at("hidden").get<int>();
            BlobReader r(c.blob);
            auto read_block = [&](std::vector<double>& v, std::size_t count) {
                v.resize(count);
                r.get_f64(v);
            };
            read_block(det.mlp.w1,
                       static_cast<std::size_t>(det.mlp.hidden) * det.mlp.d_in);
            read_block(det.mlp.b1, static_cast<std::size_t>(det.mlp.hidden));
            read_block(det.mlp.w2, static_cast<std::size_t>(det.mlp.k_out) *
                                       static_cast<std::size_t>(det.mlp.hidden));
            read_block(det.mlp.b2, static_cast<std::size_t>(det.mlp.k_out));
            r.expect_end();
            break;
        }
    }
    return det;
}

}  // namespace armorbench
