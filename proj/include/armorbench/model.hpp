#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "common.hpp"
#include "dataset.hpp"

namespace armorbench {

enum class LossKind { ce, dlr };

// One loss evaluation: value, logits at the point, and input gradient.
// Attacks consume all three per iterate, so models compute them in one pass.
struct LossEval {
    double loss = 0.0;
    std::vector<double> logits;
    std::vector<double> grad;
};

// ---------------------------------------------------------------------------
// Shared numeric helpers. Parameters are stored float32; every forward /
// backward pass accumulates in double so gradients survive a 1e-4
// finite-difference tolerance.
// ---------------------------------------------------------------------------

inline std::vector<double> softmax(std::span<const double> z) {
    std::vector<double> p(z.size());
    const double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (std::size_t k = 0; k < z.size(); ++k) {
        p[k] = std::exp(z[k] - zmax);
        sum += p[k];
    }
    for (double& v : p) v /= sum;
    return p;
}

inline double loss_ce(std::span<const double> logits, int label) {
    if (label < 0 || static_cast<std::size_t>(label) >= logits.size())
        throw IndexError("loss_ce: label " + std::to_string(label) + " out of range for K=" +
                         std::to_string(logits.size()));
    const double zmax = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (double z : logits) sum += std::exp(z - zmax);
    return std::log(sum) - (logits[static_cast<std::size_t>(label)] - zmax);
}

// d loss_ce / d logits = softmax(logits) - onehot(label)
inline std::vector<double> loss_ce_grad(std::span<const double> logits, int label) {
    auto g = softmax(logits);
    g[static_cast<std::size_t>(label)] -= 1.0;
    return g;
}

// Difference-of-logits-ratio objective (scale-invariant attack loss):
//   dlr = -(z_y - max_{i!=y} z_i) / (z_(1) - z_(3) + 1e-12)
// where z_(j) is the j-th largest logit. Larger is better for the attacker.
inline double loss_dlr(std::span<const double> logits, int label) {
    const std::size_t k = logits.size();
    if (k < 3) throw ConfigError("dlr loss requires at least 3 classes");
    if (label < 0 || static_cast<std::size_t>(label) >= k)
        throw IndexError("loss_dlr: label out of range");
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return logits[a] > logits[b]; });
    double zmax_other = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < k; ++i)
        if (i != static_cast<std::size_t>(label)) zmax_other = std::max(zmax_other, logits[i]);
    const double denom = logits[order[0]] - logits[order[2]] + 1e-12;
    return -(logits[static_cast<std::size_t>(label)] - zmax_other) / denom;
}

inline std::vector<double> loss_dlr_grad(std::span<const double> logits, int label) {
    const std::size_t k = logits.size();
    if (k < 3) throw ConfigError("dlr loss requires at least 3 classes");
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return logits[a] > logits[b]; });
    std::size_t other = k;  // argmax over i != label, ties -> lowest index
    for (std::size_t i = 0; i < k; ++i) {
        if (i == static_cast<std::size_t>(label)) continue;
        if (other == k || logits[i] > logits[other]) other = i;
    }
    const double u = logits[static_cast<std::size_t>(label)] - logits[other];
    const double v = logits[order[0]] - logits[order[2]] + 1e-12;
    std::vector<double> g(k, 0.0);
    g[static_cast<std::size_t>(label)] += -1.0 / v;
    g[other] += 1.0 / v;
    g[order[0]] += u / (v * v);
    g[order[2]] -= u / (v * v);
    return g;
}

inline int argmax_label(std::span<const double> logits) {
    int best = 0;
    for (std::size_t i = 1; i < logits.size(); ++i)
        if (logits[i] > logits[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
    return best;
}

// ---------------------------------------------------------------------------
// Dual-encoder classifier: flatten -> dense(hidden, relu) -> dense(embed) ->
// L2 normalize; per-class learnable embeddings, L2-normalized on the fly;
// logits are temperature-scaled cosine similarities.
// ---------------------------------------------------------------------------

struct ModelArch {
    int input_dim = 3072;
    int hidden_dim = 128;
    int embed_dim = 64;
    int num_classes = 10;

    void validate() const {
        if (input_dim < 1 || hidden_dim < 1 || embed_dim < 1 || num_classes < 2)
            throw ConfigError("model arch dims must be >= 1 (and >= 2 classes)");
        if (input_dim % 3 != 0)
            throw ConfigError("model input_dim must be divisible by 3 (planar RGB input)");
    }
    std::size_t param_count() const {
        return static_cast<std::size_t>(input_dim) * hidden_dim + hidden_dim +
               static_cast<std::size_t>(hidden_dim) * embed_dim + embed_dim +
               static_cast<std::size_t>(num_classes) * embed_dim;
    }
};

struct DualEncoderModel {
    ModelArch arch;
    std::vector<std::string> class_names;
    double temperature = 10.0;
    std::uint64_t seed = 0;
    ChannelStats norm;

    // Parameter blocks, all float32, in checkpoint order.
    std::vector<float> w1;         // hidden x input, row-major
    std::vector<float> b1;         // hidden
    std::vector<float> w2;         // embed x hidden, row-major
    std::vector<float> b2;         // embed
    std::vector<float> class_emb;  // K x embed, row-major

    int num_classes() const { return arch.num_classes; }
    std::size_t input_dim() const { return static_cast<std::size_t>(arch.input_dim); }

    void check_finite(const std::string& where) const {
        for (const auto* block : {&w1, &b1, &w2, &b2, &class_emb})
            for (float v : *block)
                if (!std::isfinite(v)) throw TrainingError("non-finite parameter after " + where);
    }

    // Everything the backward pass needs from one forward evaluation.
    struct ForwardTrace {
        std::vector<double> xn;      // normalized input
        std::vector<double> z1;      // pre-activation hidden
        std::vector<double> a1;      // relu(z1)
        std::vector<double> e;       // raw embedding
        std::vector<double> ehat;    // normalized embedding
        double enorm = 0.0;
        std::vector<double> chat;    // K x embed, normalized class embeddings
        std::vector<double> cnorm;   // K raw class-embedding norms
        std::vector<double> logits;  // K
    };

    ForwardTrace forward_trace(std::span<const float> image) const {
        if (image.size() != input_dim())
            throw ShapeError("forward: image has " + std::to_string(image.size()) +
                             " values, model expects " + std::to_string(input_dim()));
        const int in = arch.input_dim, hid = arch.hidden_dim, emb = arch.embed_dim,
                  K = arch.num_classes;
        const std::size_t plane = static_cast<std::size_t>(in) / 3;

        ForwardTrace t;
        t.xn.resize(static_cast<std::size_t>(in));
        for (int i = 0; i < in; ++i) {
            const int c = static_cast<int>(static_cast<std::size_t>(i) / plane);
            t.xn[static_cast<std::size_t>(i)] =
                (static_cast<double>(image[static_cast<std::size_t>(i)]) - norm.mean[static_cast<std::size_t>(c)]) /
                norm.std[static_cast<std::size_t>(c)];
        }

        t.z1.resize(static_cast<std::size_t>(hid));
        t.a1.resize(static_cast<std::size_t>(hid));
        for (int j = 0; j < hid; ++j) {
            double acc = static_cast<double>(b1[static_cast<std::size_t>(j)]);
            const float* row = w1.data() + static_cast<std::size_t>(j) * in;
            for (int i = 0; i < in; ++i) acc += static_cast<double>(row[i]) * t.xn[static_cast<std::size_t>(i)];
            t.z1[static_cast<std::size_t>(j)] = acc;
            t.a1[static_cast<std::size_t>(j)] = acc > 0.0 ? acc : 0.0;
        }

        t.e.resize(static_cast<std::size_t>(emb));
        for (int j = 0; j < emb; ++j) {
            double acc = static_cast<double>(b2[static_cast<std::size_t>(j)]);
            const float* row = w2.data() + static_cast<std::size_t>(j) * hid;
            for (int i = 0; i < hid; ++i) acc += static_cast<double>(row[i]) * t.a1[static_cast<std::size_t>(i)];
            t.e[static_cast<std::size_t>(j)] = acc;
        }
        double nsq = 0.0;
        for (double v : t.e) nsq += v * v;
        t.enorm = std::max(std::sqrt(nsq), 1e-12);
        t.ehat.resize(static_cast<std::size_t>(emb));
        for (int j = 0; j < emb; ++j) t.ehat[static_cast<std::size_t>(j)] = t.e[static_cast<std::size_t>(j)] / t.enorm;

        t.chat.resize(static_cast<std::size_t>(K) * emb);
        t.cnorm.resize(static_cast<std::size_t>(K));
        t.logits.resize(static_cast<std::size_t>(K));
        for (int k = 0; k < K; ++k) {
            const float* row = class_emb.data() + static_cast<std::size_t>(k) * emb;
            double cn = 0.0;
            for (int j = 0; j < emb; ++j) cn += static_cast<double>(row[j]) * static_cast<double>(row[j]);
            cn = std::max(std::sqrt(cn), 1e-12);
            t.cnorm[static_cast<std::size_t>(k)] = cn;
            double dot = 0.0;
            for (int j = 0; j < emb; ++j) {
                const double ch = static_cast<double>(row[j]) / cn;
                t.chat[static_cast<std::size_t>(k) * emb + j] = ch;
                dot += ch * t.ehat[static_cast<std::size_t>(j)];
            }
            t.logits[static_cast<std::size_t>(k)] = temperature * dot;
        }
        return t;
    }

    std::vector<double> logits(std::span<const float> image) const {
        return forward_trace(image).logits;
    }

    int predict(std::span<const float> image) const { return argmax_label(logits(image)); }

    // Backpropagate d loss / d logits down to the input pixels.
    std::vector<double> backprop_input(const ForwardTrace& t, std::span<const double> dlogits) const {
        const int in = arch.input_dim, hid = arch.hidden_dim, emb = arch.embed_dim,
                  K = arch.num_classes;
        const std::size_t plane = static_cast<std::size_t>(in) / 3;

        // d/d ehat, then through the L2 normalization of e.
        std::vector<double> dehat(static_cast<std::size_t>(emb), 0.0);
        for (int k = 0; k < K; ++k) {
            const double gk = temperature * dlogits[static_cast<std::size_t>(k)];
            for (int j = 0; j < emb; ++j)
                dehat[static_cast<std::size_t>(j)] += gk * t.chat[static_cast<std::size_t>(k) * emb + j];
        }
        double dot = 0.0;
        for (int j = 0; j < emb; ++j) dot += dehat[static_cast<std::size_t>(j)] * t.ehat[static_cast<std::size_t>(j)];
        std::vector<double> de(static_cast<std::size_t>(emb));
        for (int j = 0; j < emb; ++j)
            de[static_cast<std::size_t>(j)] =
                (dehat[static_cast<std::size_t>(j)] - dot * t.ehat[static_cast<std::size_t>(j)]) / t.enorm;

        std::vector<double> da(static_cast<std::size_t>(hid), 0.0);
        for (int j = 0; j < emb; ++j) {
            const float* row = w2.data() + static_cast<std::size_t>(j) * hid;
            const double g = de[static_cast<std::size_t>(j)];
            for (int i = 0; i < hid; ++i) da[static_cast<std::size_t>(i)] += g * static_cast<double>(row[i]);
        }
        for (int i = 0; i < hid; ++i)
            if (t.z1[static_cast<std::size_t>(i)] <= 0.0) da[static_cast<std::size_t>(i)] = 0.0;

        std::vector<double> dx(static_cast<std::size_t>(in), 0.0);
        for (int j = 0; j < hid; ++j) {
            const float* row = w1.data() + static_cast<std::size_t>(j) * in;
            const double g = da[static_cast<std::size_t>(j)];
            if (g == 0.0) continue;
            for (int i = 0; i < in; ++i) dx[static_cast<std::size_t>(i)] += g * static_cast<double>(row[i]);
        }
        for (int i = 0; i < in; ++i) {
            const int c = static_cast<int>(static_cast<std::size_t>(i) / plane);
            dx[static_cast<std::size_t>(i)] /= norm.std[static_cast<std::size_t>(c)];
        }
        return dx;
    }

    // Loss value, logits, and input gradient in one pass (the attack workhorse).
    LossEval loss_eval(std::span<const float> image, int label, LossKind kind) const {
        ForwardTrace t = forward_trace(image);
        LossEval out;
        out.loss = kind == LossKind::ce ? loss_ce(t.logits, label) : loss_dlr(t.logits, label);
        const auto dlogits = kind == LossKind::ce ? loss_ce_grad(t.logits, label)
                                                  : loss_dlr_grad(t.logits, label);
        out.grad = backprop_input(t, dlogits);
        out.logits = std::move(t.logits);
        return out;
    }

    std::vector<double> grad_input(std::span<const float> image, int label, LossKind kind) const {
        return loss_eval(image, label, kind).grad;
    }

    // Gradient of logit k with respect to the input (DeepFool needs one per class).
    std::vector<double> logit_grad(std::span<const float> image, int k) const {
        if (k < 0 || k >= arch.num_classes) throw IndexError("logit_grad: class out of range");
        const ForwardTrace t = forward_trace(image);
        std::vector<double> dlogits(static_cast<std::size_t>(arch.num_classes), 0.0);
        dlogits[static_cast<std::size_t>(k)] = 1.0;
        return backprop_input(t, dlogits);
    }

    // DeepFool refinement: logits and all K input-gradients from one shared trace.
    std::pair<std::vector<double>, std::vector<std::vector<double>>> logits_and_grads(
        std::span<const float> image) const {
        const ForwardTrace t = forward_trace(image);
        std::vector<std::vector<double>> grads(static_cast<std::size_t>(arch.num_classes));
        std::vector<double> dlogits(static_cast<std::size_t>(arch.num_classes), 0.0);
        for (int k = 0; k < arch.num_classes; ++k) {
            dlogits[static_cast<std::size_t>(k)] = 1.0;
            grads[static_cast<std::size_t>(k)] = backprop_input(t, dlogits);
            dlogits[static_cast<std::size_t>(k)] = 0.0;
        }
        return {t.logits, std::move(grads)};
    }
};

// Gradients for every parameter block, accumulated in double.
struct ParamGrads {
    std::vector<double> w1, b1, w2, b2, class_emb;
    double temp = 0.0;  // used only when temperature training is enabled

    explicit ParamGrads(const ModelArch& a)
        : w1(static_cast<std::size_t>(a.hidden_dim) * a.input_dim, 0.0),
          b1(static_cast<std::size_t>(a.hidden_dim), 0.0),
          w2(static_cast<std::size_t>(a.embed_dim) * a.hidden_dim, 0.0),
          b2(static_cast<std::size_t>(a.embed_dim), 0.0),
          class_emb(static_cast<std::size_t>(a.num_classes) * a.embed_dim, 0.0) {}

    void scale(double f) {
        for (auto* blk : {&w1, &b1, &w2, &b2, &class_emb})
            for (double& v : *blk) v *= f;
        temp *= f;
    }
};

inline DualEncoderModel init_model(const ModelArch& arch, std::uint64_t seed,
                                   const std::vector<std::string>& class_names = {},
                                   double temperature = 10.0) {
    arch.validate();
    if (!class_names.empty() && static_cast<int>(class_names.size()) != arch.num_classes)
        throw ConfigError("init_model: class name count does not match num_classes");

    DualEncoderModel m;
    m.arch = arch;
    m.temperature = temperature;
    m.seed = seed;
    m.class_names = class_names;
    if (m.class_names.empty())
        for (int k = 0; k < arch.num_classes; ++k)
            m.class_names.push_back("class_" + std::to_string(k));

    Rng rng(derive_seed(seed, "init_model"));
    auto glorot = [&](std::vector<float>& w, std::size_t n, int fan_in, int fan_out) {
        const double a = std::sqrt(6.0 / (fan_in + fan_out));
        w.resize(n);
        for (float& v : w) v = static_cast<float>(rng.uniform(-a, a));
    };
    glorot(m.w1, static_cast<std::size_t>(arch.hidden_dim) * arch.input_dim, arch.input_dim,
           arch.hidden_dim);
    m.b1.assign(static_cast<std::size_t>(arch.hidden_dim), 0.0f);
    glorot(m.w2, static_cast<std::size_t>(arch.embed_dim) * arch.hidden_dim, arch.hidden_dim,
           arch.embed_dim);
    m.b2.assign(static_cast<std::size_t>(arch.embed_dim), 0.0f);
    glorot(m.class_emb, static_cast<std::size_t>(arch.num_classes) * arch.embed_dim,
           arch.embed_dim, arch.num_classes);
    return m;
}

// Mean-CE parameter gradients over a batch of (image, label) pairs.
template <typename SampleRange>
inline std::pair<double, ParamGrads> grad_params(const DualEncoderModel& m,
                                                 const SampleRange& batch) {
    if (batch.empty()) throw InputError("grad_params: empty batch");
    const int in = m.arch.input_dim, hid = m.arch.hidden_dim, emb = m.arch.embed_dim,
              K = m.arch.num_classes;
    ParamGrads g(m.arch);
    double total_loss = 0.0;

    for (const auto& sample : batch) {
        const ImageSample& s = *sample;
        const auto t = m.forward_trace(s.pixels);
        total_loss += loss_ce(t.logits, s.label);
        const auto dlogits = loss_ce_grad(t.logits, s.label);

        // Class embeddings: logit_k = T * chat_k . ehat, chat_k = c_k / ||c_k||.
        std::vector<double> dehat(static_cast<std::size_t>(emb), 0.0);
        for (int k = 0; k < K; ++k) {
            const double gk = m.temperature * dlogits[static_cast<std::size_t>(k)];
            const double cn = t.cnorm[static_cast<std::size_t>(k)];
            double dot = 0.0;
            for (int j = 0; j < emb; ++j)
                dot += t.ehat[static_cast<std::size_t>(j)] * t.chat[static_cast<std::size_t>(k) * emb + j];
            g.temp += dlogits[static_cast<std::size_t>(k)] * dot;  // d logit_k / dT
            for (int j = 0; j < emb; ++j) {
                dehat[static_cast<std::size_t>(j)] += gk * t.chat[static_cast<std::size_t>(k) * emb + j];
                g.class_emb[static_cast<std::size_t>(k) * emb + j] +=
                    gk * (t.ehat[static_cast<std::size_t>(j)] -
                          dot * t.chat[static_cast<std::size_t>(k) * emb + j]) / cn;
            }
        }

        double dot = 0.0;
        for (int j = 0; j < emb; ++j) dot += dehat[static_cast<std::size_t>(j)] * t.ehat[static_cast<std::size_t>(j)];
        std::vector<double> de(static_cast<std::size_t>(emb));
        for (int j = 0; j < emb; ++j)
            de[static_cast<std::size_t>(j)] =
                (dehat[static_cast<std::size_t>(j)] - dot * t.ehat[static_cast<std::size_t>(j)]) / t.enorm;

        std::vector<double> da(static_cast<std::size_t>(hid), 0.0);
        for (int j = 0; j < emb; ++j) {
            const double gj = de[static_cast<std::size_t>(j)];
            g.b2[static_cast<std::size_t>(j)] += gj;
            const float* row = m.w2.data() + static_cast<std::size_t>(j) * hid;
            double* grow = g.w2.data() + static_cast<std::size_t>(j) * hid;
            for (int i = 0; i < hid; ++i) {
                grow[i] += gj * t.a1[static_cast<std::size_t>(i)];
                da[static_cast<std::size_t>(i)] += gj * static_cast<double>(row[i]);
            }
        }
        for (int i = 0; i < hid; ++i)
            if (t.z1[static_cast<std::size_t>(i)] <= 0.0) da[static_cast<std::size_t>(i)] = 0.0;

        for (int j = 0; j < hid; ++j) {
            const double gj = da[static_cast<std::size_t>(j)];
            if (gj == 0.0) continue;
            g.b1[static_cast<std::size_t>(j)] += gj;
            double* grow = g.w1.data() + static_cast<std::size_t>(j) * in;
            for (int i = 0; i < in; ++i) grow[i] += gj * t.xn[static_cast<std::size_t>(i)];
        }
    }

    const double inv = 1.0 / static_cast<double>(batch.size());
    g.scale(inv);
    return {total_loss * inv, g};
}

// ---------------------------------------------------------------------------
// SGD with momentum. Velocity buffers live outside the model so checkpoints
// stay minimal; updates run in double and are stored back as float32.
// ---------------------------------------------------------------------------

struct SgdMomentum {
    double lr = 0.05;
    double momentum = 0.9;
    bool train_temperature = false;  // temperature stays fixed unless enabled
    std::vector<double> v_w1, v_b1, v_w2, v_b2, v_ce;
    double v_temp = 0.0;

    void ensure_shapes(const DualEncoderModel& m) {
        if (v_w1.size() != m.w1.size()) {
            v_w1.assign(m.w1.size(), 0.0);
            v_b1.assign(m.b1.size(), 0.0);
            v_w2.assign(m.w2.size(), 0.0);
            v_b2.assign(m.b2.size(), 0.0);
            v_ce.assign(m.class_emb.size(), 0.0);
        }
    }

    void apply(DualEncoderModel& m, const ParamGrads& g) {
        ensure_shapes(m);
        auto step = [&](std::vector<float>& p, std::vector<double>& v, const std::vector<double>& gr) {
            for (std::size_t i = 0; i < p.size(); ++i) {
                v[i] = momentum * v[i] - lr * gr[i];
                p[i] = static_cast<float>(static_cast<double>(p[i]) + v[i]);
            }
        };
        step(m.w1, v_w1, g.w1);
        step(m.b1, v_b1, g.b1);
        step(m.w2, v_w2, g.w2);
        step(m.b2, v_b2, g.b2);
        step(m.class_emb, v_ce, g.class_emb);
        if (train_temperature) {
            v_temp = momentum * v_temp - lr * g.temp;
            m.temperature += v_temp;
        }
    }
};

template <typename SampleRange>
inline double train_step(DualEncoderModel& m, const SampleRange& batch, SgdMomentum& opt) {
    auto [loss, grads] = grad_params(m, batch);
    if (!std::isfinite(loss)) throw TrainingError("non-finite loss in train_step");
    opt.apply(m, grads);
    return loss;
}

struct TrainConfig {
    int epochs = 20;
    double lr = 0.05;
    double momentum = 0.9;
    int batch_size = 32;
    bool train_temperature = false;
    std::uint64_t seed = 0;
};

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    double clean_val_acc = 0.0;
    double adv_val_acc = 0.0;
};

inline double accuracy_on(const DualEncoderModel& m, const LabeledDataset& ds) {
    if (ds.samples.empty()) throw InputError("accuracy_on: empty dataset");
    std::size_t hits = 0;
    for (const auto& s : ds.samples)
        if (m.predict(s.pixels) == s.label) ++hits;
    return static_cast<double>(hits) / static_cast<double>(ds.size());
}

// Seeded-shuffle minibatch training. val_adv may be null; its accuracy column
// is then reported as 0 and ignored by callers.
inline std::vector<EpochLog> train(DualEncoderModel& m, const LabeledDataset& data,
                                   const TrainConfig& cfg, const LabeledDataset* val_clean,
                                   const LabeledDataset* val_adv) {
    if (data.samples.empty()) throw InputError("train: empty dataset");
    if (cfg.epochs < 0) throw ConfigError("train: negative epoch count");
    if (cfg.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");

    SgdMomentum opt;
    opt.lr = cfg.lr;
    opt.momentum = cfg.momentum;
    opt.train_temperature = cfg.train_temperature;

    Rng rng(derive_seed(cfg.seed, "train_shuffle"));
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);

    std::vector<EpochLog> log;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t seen = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<const ImageSample*> batch;
            batch.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) batch.push_back(&data.samples[order[i]]);
            double loss;
            try {
                loss = train_step(m, batch, opt);
            } catch (const TrainingError&) {
                throw TrainingError("training diverged (non-finite loss) at epoch " +
                                    std::to_string(epoch));
            }
            loss_sum += loss * static_cast<double>(batch.size());
            seen += batch.size();
        }
        m.check_finite("epoch " + std::to_string(epoch));

        EpochLog e;
        e.epoch = epoch;
        e.train_loss = loss_sum / static_cast<double>(seen);
        e.clean_val_acc = val_clean ? accuracy_on(m, *val_clean) : 0.0;
        e.adv_val_acc = val_adv ? accuracy_on(m, *val_adv) : 0.0;
        log.push_back(e);
    }
    return log;
}

// ---------------------------------------------------------------------------
// Checkpoint file (magic AVLM): JSON metadata then the float32 parameter blob
// in order w1, b1, w2, b2, class_emb. Round trips are bit-exact.
// ---------------------------------------------------------------------------

inline constexpr char kCheckpointMagic[4] = {'A', 'V', 'L', 'M'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

inline void save_checkpoint(const DualEncoderModel& m, const std::filesystem::path& path) {
    json meta = {{"input_dim", m.arch.input_dim},
                 {"hidden_dim", m.arch.hidden_dim},
                 {"embed_dim", m.arch.embed_dim},
                 {"num_classes", m.arch.num_classes},
                 {"class_names", m.class_names},
                 {"temperature", m.temperature},
                 {"seed", m.seed},
                 {"norm_mean", m.norm.mean},
                 {"norm_std", m.norm.std}};
    BlobWriter blob;
    blob.put_f32(m.w1);
    blob.put_f32(m.b1);
    blob.put_f32(m.w2);
    blob.put_f32(m.b2);
    blob.put_f32(m.class_emb);
    write_container(path, kCheckpointMagic, kCheckpointVersion, meta, blob.bytes());
}

inline DualEncoderModel load_checkpoint(const std::filesystem::path& path) {
    const Container c = read_container(path, kCheckpointMagic, kCheckpointVersion);
    DualEncoderModel m;
    m.arch.input_dim = c.meta.at("input_dim").get<int>();
    m.arch.hidden_dim = c.meta.at("hidden_dim").get<int>();
    m.arch.embed_dim = c.meta.at("embed_dim").get<int>();
    m.arch.num_classes = c.meta.at("num_classes").get<int>();
    m.arch.validate();
    m.class_names = c.meta.at("class_names").get<std::vector<std::string>>();
    m.temperature = c.meta.at("temperature").get<double>();
    m.seed = c.meta.at("seed").get<std::uint64_t>();
    m.norm.mean = c.meta.at("norm_mean").get<std::array<double, 3>>();
    m.norm.std = c.meta.at("norm_std").get<std::array<double, 3>>();

    BlobReader r(c.blob);
    auto read_block = [&](std::vector<float>& v, std::size_t n) {
        v.resize(n);
        r.get_f32(v);
    };
    read_block(m.w1, static_cast<std::size_t>(m.arch.hidden_dim) * m.arch.input_dim);
    read_block(m.b1, static_cast<std::size_t>(m.arch.hidden_dim));
    read_block(m.w2, static_cast<std::size_t>(m.arch.embed_dim) * m.arch.hidden_dim);
    read_block(m.b2, static_cast<std::size_t>(m.arch.embed_dim));
    read_block(m.class_emb, static_cast<std::size_t>(m.arch.num_classes) * m.arch.embed_dim);
    r.expect_end();
    return m;
}

}  // namespace armorbench
