#pragma once

// Shared fixtures for the test suites: a small linear softmax model that
// satisfies the AttackModel concept, finite-difference helpers, a brute-force
// vertex oracle for box-constrained attacks, and a scoped temp directory.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <unistd.h>

#include <armorbench/attacks.hpp>
#include <armorbench/common.hpp>
#include <armorbench/image.hpp>
#include <armorbench/model.hpp>

namespace testsupport {

// ---------------------------------------------------------------------------
// Linear softmax classifier: z = Wx + b with closed-form input gradients.
// ---------------------------------------------------------------------------

struct LinearSoftmaxModel {
    std::size_t d = 0;
    int k = 0;
    std::vector<double> w;  // k x d row-major
    std::vector<double> b;

    int num_classes() const { return k; }
    std::size_t input_dim() const { return d; }

    std::vector<double> logits(std::span<const float> x) const {
        std::vector<double> z(static_cast<std::size_t>(k));
        for (int c = 0; c < k; ++c) {
            double acc = b[static_cast<std::size_t>(c)];
            const double* row = w.data() + static_cast<std::size_t>(c) * d;
            for (std::size_t i = 0; i < d; ++i) acc += row[i] * static_cast<double>(x[i]);
            z[static_cast<std::size_t>(c)] = acc;
        }
        return z;
    }

    armorbench::LossEval loss_eval(std::span<const float> x, int label,
                                   armorbench::LossKind kind) const {
        armorbench::LossEval ev;
        ev.logits = logits(x);
        std::vector<double> dz;
        if (kind == armorbench::LossKind::ce) {
            ev.loss = armorbench::loss_ce(ev.logits, label);
            dz = armorbench::loss_ce_grad(ev.logits, label);
        } else {
            ev.loss = armorbench::loss_dlr(ev.logits, label);
            dz = armorbench::loss_dlr_grad(ev.logits, label);
        }
        ev.grad.assign(d, 0.0);
        for (int c = 0; c < k; ++c) {
            const double* row = w.data() + static_cast<std::size_t>(c) * d;
            for (std::size_t i = 0; i < d; ++i) ev.grad[i] += dz[static_cast<std::size_t>(c)] * row[i];
        }
        return ev;
    }

    std::pair<std::vector<double>, std::vector<std::vector<double>>> logits_and_grads(
        std::span<const float> x) const {
        std::vector<std::vector<double>> grads(static_cast<std::size_t>(k));
        for (int c = 0; c < k; ++c) {
            const double* row = w.data() + static_cast<std::size_t>(c) * d;
            grads[static_cast<std::size_t>(c)].assign(row, row + d);
        }
        return {logits(x), std::move(grads)};
    }
};

inline LinearSoftmaxModel random_linear_model(armorbench::Rng& rng, std::size_t d, int k,
                                              double scale = 3.0) {
    LinearSoftmaxModel m;
    m.d = d;
    m.k = k;
    m.w.resize(static_cast<std::size_t>(k) * d);
    m.b.resize(static_cast<std::size_t>(k));
    for (double& v : m.w) v = rng.uniform(-scale, scale);
    for (double& v : m.b) v = rng.uniform(-0.5, 0.5);
    return m;
}

inline armorbench::ImageSample flat_sample(std::int64_t id, int label,
                                           const std::vector<float>& pixels) {
    // Tests mostly use 3 x 2 x W layouts; any factorization works as long as
    // channels * height * width matches.
    armorbench::ImageSample s;
    s.id = id;
    s.label = label;
    s.channels = 3;
    s.height = 1;
    s.width = static_cast<int>(pixels.size() / 3);
    s.pixels = pixels;
    if (static_cast<std::size_t>(s.channels * s.height * s.width) != pixels.size())
        throw armorbench::ShapeError("flat_sample: pixel count must be divisible by 3");
    return s;
}

inline std::vector<float> random_pixels(armorbench::Rng& rng, std::size_t n) {
    std::vector<float> x(n);
    for (float& v : x) v = static_cast<float>(rng.uniform(0.05, 0.95));
    return x;
}

// ---------------------------------------------------------------------------
// Finite differences. Central differences with a fixed step; the comparison
// uses a symmetric relative error so tiny gradients do not blow it up.
// ---------------------------------------------------------------------------

inline double rel_err(double analytic, double numeric) {
    return std::abs(analytic - numeric) / (std::abs(analytic) + std::abs(numeric) + 1e-8);
}

// Max relative error between an analytic gradient and central differences of
// `f` over every coordinate of `x`. The default step balances truncation
// (which grows as step^2 and dominates near-converged softmax losses) against
// roundoff, which stays negligible because losses are computed in double.
template <typename F>
inline double max_grad_rel_err(F&& f, std::vector<float> x, std::span<const double> analytic,
                               double step = 1e-4) {
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const float saved = x[i];
        // Evaluate at exactly representable floats and divide by their true
        // distance, so float rounding of the step does not pollute the check.
        const float plus = static_cast<float>(static_cast<double>(saved) + step);
        const float minus = static_cast<float>(static_cast<double>(saved) - step);
        x[i] = plus;
        const double up = f(x);
        x[i] = minus;
        const double down = f(x);
        x[i] = saved;
        const double numeric =
            (up - down) / (static_cast<double>(plus) - static_cast<double>(minus));
        worst = std::max(worst, rel_err(analytic[i], numeric));
    }
    return worst;
}

// Same, for double-valued parameter vectors.
template <typename F>
inline double max_param_rel_err(F&& f, std::vector<double>& params,
                                std::span<const double> analytic, double step = 1e-4) {
    double worst = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double saved = params[i];
        params[i] = saved + step;
        const double up = f();
        params[i] = saved - step;
        const double down = f();
        params[i] = saved;
        const double numeric = (up - down) / (2.0 * step);
        worst = std::max(worst, rel_err(analytic[i], numeric));
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Brute-force oracle: the maximum CE loss over all vertices of the feasible
// box [x0 - eps, x0 + eps] ∩ [0, 1]. CE of a linear-softmax model is convex
// in x, so the box maximum sits on a vertex. Feasible only for small d.
// ---------------------------------------------------------------------------

inline double vertex_max_ce(const LinearSoftmaxModel& m, std::span<const float> x0, int label,
                            double eps) {
    const std::size_t d = x0.size();
    std::vector<float> lo(d), hi(d);
    for (std::size_t i = 0; i < d; ++i) {
        const double c = static_cast<double>(x0[i]);
        lo[i] = static_cast<float>(std::clamp(c - eps, 0.0, 1.0));
        hi[i] = static_cast<float>(std::clamp(c + eps, 0.0, 1.0));
    }
    double best = -std::numeric_limits<double>::infinity();
    std::vector<float> x(d);
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << d); ++mask) {
        for (std::size_t i = 0; i < d; ++i) x[i] = (mask >> i) & 1 ? hi[i] : lo[i];
        best = std::max(best, m.loss_eval(x, label, armorbench::LossKind::ce).loss);
    }
    return best;
}

// ---------------------------------------------------------------------------
// Scoped temp directory for file round-trip tests.
// ---------------------------------------------------------------------------

class TempDir {
  public:
    explicit TempDir(const std::string& tag) {
        base_ = std::filesystem::temp_directory_path() /
                ("armorbench_test_" + tag + "_" + std::to_string(::getpid()));
        std::filesystem::remove_all(base_);
        std::filesystem::create_directories(base_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(base_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::filesystem::path path(const std::string& name) const { return base_ / name; }
    const std::filesystem::path& root() const { return base_; }

  private:
    std::filesystem::path base_;
};

}  // namespace testsupport
