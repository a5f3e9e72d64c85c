#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "common.hpp"

namespace armorbench {

enum class GrowthPolicy { level_wise, leaf_wise };

inline std::string to_string(GrowthPolicy p) {
    return p == GrowthPolicy::level_wise ? "level_wise" : "leaf_wise";
}

struct GbdtParams {
    int trees = 100;
    double lr = 0.1;
    int max_depth = 4;    // level-wise bound
    int max_leaves = 16;  // leaf-wise bound
    double lambda = 1.0;  // L2 regularization on leaf values
    double gamma = 0.0;   // per-split penalty
    int min_samples = 2;  // minimum rows per child

    void validate() const {
        if (trees < 1 || max_depth < 1 || max_leaves < 1 || min_samples < 1)
            throw ConfigError("gbdt params must be positive");
        if (lambda < 0.0 || gamma < 0.0 || !(lr > 0.0))
            throw ConfigError("gbdt lambda/gamma must be >= 0 and lr > 0");
    }
};

// Regularized gain of splitting (G,H) into (GL,HL) and (GR,HR).
inline double split_gain(double gl, double hl, double gr, double hr, double lambda, double gamma) {
    auto score = [&](double g, double h) { return g * g / (h + lambda); };
    return 0.5 * (score(gl, hl) + score(gr, hr) - score(gl + gr, hl + hr)) - gamma;
}

// Gains below this are treated as zero so fp noise never forces a split.
inline constexpr double kMinSplitGain = 1e-12;

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;  // leaf value, already lr-scaled
};

struct RegressionTree {
    std::vector<TreeNode> nodes;

    double predict(std::span<const double> row) const {
        int cur = 0;
        while (nodes[static_cast<std::size_t>(cur)].feature >= 0) {
            const TreeNode& nd = nodes[static_cast<std::size_t>(cur)];
            cur = row[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
        }
        return nodes[static_cast<std::size_t>(cur)].value;
    }

    int leaf_count() const {
        int c = 0;
        for (const auto& nd : nodes)
            if (nd.feature < 0) ++c;
        return c;
    }
};

// Row indices presorted per feature by (value, row); shared by every tree
// trained on the same matrix.
struct FeaturePresort {
    std::size_t n = 0, d = 0;
    std::vector<std::vector<std::uint32_t>> order;

    FeaturePresort(const std::vector<double>& x, std::size_t n_, std::size_t d_) : n(n_), d(d_) {
        order.resize(d);
        for (std::size_t f = 0; f < d; ++f) {
            auto& idx = order[f];
            idx.resize(n);
            std::iota(idx.begin(), idx.end(), 0u);
            std::sort(idx.begin(), idx.end(), [&](std::uint32_t a, std::uint32_t b) {
                const double va = x[a * d_ + f], vb = x[b * d_ + f];
                if (va != vb) return va < vb;
                return a < b;
            });
        }
    }
};

struct SplitCand {
    double gain = -std::numeric_limits<double>::infinity();
    int feature = -1;
    double threshold = 0.0;
    double gl = 0.0, hl = 0.0;
    std::size_t nl = 0;

    bool usable() const { return feature >= 0 && gain > kMinSplitGain; }
};

// Optional record of every leaf-wise split decision: the chosen gain plus
// the gains of all frontier leaves at that moment.
struct LeafwiseTrace {
    std::vector<std::pair<double, std::vector<double>>> steps;
};

namespace detail {

// Scan one feature over a row subset (marked in `member`) in presorted
// order, updating `best` with the best usable split. Tie-breaks: higher gain
// first, then lower feature, then lower threshold — achieved by scanning
// features/thresholds in ascending order with a strictly-greater test.
inline void scan_feature_subset(const std::vector<double>& x, std::size_t d, std::size_t f,
                                const std::vector<std::uint32_t>& sorted,
                                const std::vector<std::uint8_t>& member, double g_total,
                                double h_total, std::size_t n_node,
                                std::span<const double> g, std::span<const double> h,
                                const GbdtParams& p, SplitCand& best) {
    double gl = 0.0, hl = 0.0;
    std::size_t cnt = 0;
    double prev = 0.0;
    for (std::uint32_t row : sorted) {
        if (!member[row]) continue;
        const double v = x[row * d + f];
        if (cnt > 0 && v > prev && cnt >= static_cast<std::size_t>(p.min_samples) &&
            n_node - cnt >= static_cast<std::size_t>(p.min_samples)) {
            const double gain = split_gain(gl, hl, g_total - gl, h_total - hl, p.lambda, p.gamma);
            if (gain > best.gain) {
                best.gain = gain;
                best.feature = static_cast<int>(f);
                best.threshold = prev + (v - prev) / 2.0;
                best.gl = gl;
                best.hl = hl;
                best.nl = cnt;
            }
        }
        gl += g[row];
        hl += h[row];
        ++cnt;
        prev = v;
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Level-wise growth: expand the whole depth frontier breadth-first until
// max_depth, splitting every node that still has a usable gain.
// ---------------------------------------------------------------------------

inline RegressionTree fit_tree_level_wise(const std::vector<double>& x, std::size_t n,
                                          std::size_t d, const FeaturePresort& ps,
                                          std::span<const double> g, std::span<const double> h,
                                          const GbdtParams& p) {
    RegressionTree tree;
    struct NodeAgg {
        int node_id;
        double g_sum, h_sum;
        std::size_t count;
        SplitCand best;
    };

    double g0 = 0.0, h0 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        g0 += g[i];
        h0 += h[i];
    }
    tree.nodes.push_back(TreeNode{});
    std::vector<NodeAgg> frontier{{0, g0, h0, n, {}}};
    std::vector<int> slot(n, 0);  // frontier slot per row; -1 once finalized

    for (int depth = 0; depth < p.max_depth && !frontier.empty(); ++depth) {
        for (auto& nd : frontier) nd.best = SplitCand{};

        struct Scan {
            double gl = 0.0, hl = 0.0;
            std::size_t cnt = 0;
            double prev = 0.0;
        };
        std::vector<Scan> sc(frontier.size());
        for (std::size_t f = 0; f < d; ++f) {
            std::fill(sc.begin(), sc.end(), Scan{});
            for (std::uint32_t row : ps.order[f]) {
                const int sl = slot[row];
                if (sl < 0) continue;
                Scan& s = sc[static_cast<std::size_t>(sl)];
                NodeAgg& nd = frontier[static_cast<std::size_t>(sl)];
                const double v = x[row * d + f];
                if (s.cnt > 0 && v > s.prev &&
                    s.cnt >= static_cast<std::size_t>(p.min_samples) &&
                    nd.count - s.cnt >= static_cast<std::size_t>(p.min_samples)) {
                    const double gain = split_gain(s.gl, s.hl, nd.g_sum - s.gl, nd.h_sum - s.hl,
                                                  p.lambda, p.gamma);
                    if (gain > nd.best.gain) {
                        nd.best.gain = gain;
                        nd.best.feature = static_cast<int>(f);
                        nd.best.threshold = s.prev + (v - s.prev) / 2.0;
                        nd.best.gl = s.gl;
                        nd.best.hl = s.hl;
                        nd.best.nl = s.cnt;
                    }
                }
                s.gl += g[row];
                s.hl += h[row];
                ++s.cnt;
                s.prev = v;
            }
        }

        std::vector<NodeAgg> next;
        std::vector<int> child_slot_left(frontier.size(), -1), child_slot_right(frontier.size(), -1);
        for (std::size_t i = 0; i < frontier.size(); ++i) {
            NodeAgg& nd = frontier[i];
            TreeNode& tn = tree.nodes[static_cast<std::size_t>(nd.node_id)];
            if (nd.best.usable()) {
                tn.feature = nd.best.feature;
                tn.threshold = nd.best.threshold;
                tn.left = static_cast<int>(tree.nodes.size());
                tn.right = tn.left + 1;
                tree.nodes.push_back(TreeNode{});
                tree.nodes.push_back(TreeNode{});
                child_slot_left[i] = static_cast<int>(next.size());
                next.push_back({tn.left, nd.best.gl, nd.best.hl, nd.best.nl, {}});
                child_slot_right[i] = static_cast<int>(next.size());
                next.push_back({tn.right, nd.g_sum - nd.best.gl, nd.h_sum - nd.best.hl,
                                nd.count - nd.best.nl, {}});
            } else {
                tn.value = -nd.g_sum / (nd.h_sum + p.lambda) * p.lr;
            }
        }

        for (std::size_t row = 0; row < n; ++row) {
            const int sl = slot[row];
            if (sl < 0) continue;
            if (child_slot_left[static_cast<std::size_t>(sl)] < 0) {
                slot[row] = -1;
                continue;
            }
            const NodeAgg& nd = frontier[static_cast<std::size_t>(sl)];
            const bool goes_left = x[row * d + static_cast<std::size_t>(nd.best.feature)] <=
                                   nd.best.threshold;
            slot[row] = goes_left ? child_slot_left[static_cast<std::size_t>(sl)]
                                  : child_slot_right[static_cast<std::size_t>(sl)];
        }
        frontier = std::move(next);
    }

    // Depth limit reached: finalize whatever is left.
    for (auto& nd : frontier)
        tree.nodes[static_cast<std::size_t>(nd.node_id)].value =
            -nd.g_sum / (nd.h_sum + p.lambda) * p.lr;
    return tree;
}

// ---------------------------------------------------------------------------
// Leaf-wise growth: repeatedly split the single frontier leaf with the
// highest gain until max_leaves is reached or no usable gain remains.
// ---------------------------------------------------------------------------

inline RegressionTree fit_tree_leaf_wise(const std::vector<double>& x, std::size_t n,
                                         std::size_t d, const FeaturePresort& ps,
                                         std::span<const double> g, std::span<const double> h,
                                         const GbdtParams& p, LeafwiseTrace* trace = nullptr) {
    RegressionTree tree;
    struct LeafState {
        int node_id;
        std::vector<std::uint32_t> rows;
        double g_sum, h_sum;
        SplitCand best;
        int birth;  // creation order, used only as a deterministic tie-break
    };

    std::vector<std::uint8_t> member(n, 0);
    auto compute_best = [&](LeafState& leaf) {
        leaf.best = SplitCand{};
        for (std::uint32_t r : leaf.rows) member[r] = 1;
        for (std::size_t f = 0; f < d; ++f)
            detail::scan_feature_subset(x, d, f, ps.order[f], member, leaf.g_sum, leaf.h_sum,
                                        leaf.rows.size(), g, h, p, leaf.best);
        for (std::uint32_t r : leaf.rows) member[r] = 0;
    };

    tree.nodes.push_back(TreeNode{});
    std::vector<LeafState> leaves;
    {
        LeafState root;
        root.node_id = 0;
        root.rows.resize(n);
        std::iota(root.rows.begin(), root.rows.end(), 0u);
        root.g_sum = 0.0;
        root.h_sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            root.g_sum += g[i];
            root.h_sum += h[i];
        }
        root.birth = 0;
        compute_best(root);
        leaves.push_back(std::move(root));
    }
    int births = 1;

    while (static_cast<int>(leaves.size()) < p.max_leaves) {
        int pick = -1;
        for (std::size_t i = 0; i < leaves.size(); ++i) {
            if (!leaves[i].best.usable()) continue;
            if (pick < 0 || leaves[i].best.gain > leaves[static_cast<std::size_t>(pick)].best.gain ||
                (leaves[i].best.gain == leaves[static_cast<std::size_t>(pick)].best.gain &&
                 leaves[i].birth < leaves[static_cast<std::size_t>(pick)].birth))
                pick = static_cast<int>(i);
        }
        if (pick < 0) break;

        if (trace) {
            std::vector<double> gains;
            for (const auto& l : leaves)
                gains.push_back(l.best.usable() ? l.best.gain
                                                : -std::numeric_limits<double>::infinity());
            trace->steps.emplace_back(leaves[static_cast<std::size_t>(pick)].best.gain,
                                      std::move(gains));
        }

        LeafState parent = std::move(leaves[static_cast<std::size_t>(pick)]);
        leaves.erase(leaves.begin() + pick);

        TreeNode& tn = tree.nodes[static_cast<std::size_t>(parent.node_id)];
        tn.feature = parent.best.feature;
        tn.threshold = parent.best.threshold;
        tn.left = static_cast<int>(tree.nodes.size());
        tn.right = tn.left + 1;
        tree.nodes.push_back(TreeNode{});
        tree.nodes.push_back(TreeNode{});

        LeafState lc, rc;
        lc.node_id = tn.left;
        rc.node_id = tn.right;
        lc.birth = births++;
        rc.birth = births++;
        for (std::uint32_t r : parent.rows) {
            if (x[r * d + static_cast<std::size_t>(parent.best.feature)] <= parent.best.threshold)
                lc.rows.push_back(r);
            else
                rc.rows.push_back(r);
        }
        lc.g_sum = parent.best.gl;
        lc.h_sum = parent.best.hl;
        rc.g_sum = parent.g_sum - parent.best.gl;
        rc.h_sum = parent.h_sum - parent.best.hl;
        compute_best(lc);
        compute_best(rc);
        leaves.push_back(std::move(lc));
        leaves.push_back(std::move(rc));
    }

    for (auto& leaf : leaves)
        tree.nodes[static_cast<std::size_t>(leaf.node_id)].value =
            -leaf.g_sum / (leaf.h_sum + p.lambda) * p.lr;
    return tree;
}

inline RegressionTree fit_regression_tree(const std::vector<double>& x, std::size_t n,
                                          std::size_t d, const FeaturePresort& ps,
                                          std::span<const double> g, std::span<const double> h,
                                          const GbdtParams& p, GrowthPolicy policy,
                                          LeafwiseTrace* trace = nullptr) {
    p.validate();
    if (g.size() != n || h.size() != n) throw ShapeError("fit_regression_tree: bad gradient size");
    return policy == GrowthPolicy::level_wise ? fit_tree_level_wise(x, n, d, ps, g, h, p)
                                              : fit_tree_leaf_wise(x, n, d, ps, g, h, p, trace);
}

// ---------------------------------------------------------------------------
// Multiclass gradient boosting with a softmax objective: per round, one
// regression tree per class fit to g = p - onehot, h = p(1-p).
// ---------------------------------------------------------------------------

struct GbdtModel {
    GrowthPolicy policy = GrowthPolicy::level_wise;
    GbdtParams params;
    int k_out = 0;
    std::size_t d_in = 0;
    std::vector<std::vector<RegressionTree>> rounds;  // rounds[r][class]

    std::vector<double> predict_scores(std::span<const double> row) const {
        std::vector<double> f(static_cast<std::size_t>(k_out), 0.0);
        for (const auto& round : rounds)
            for (int k = 0; k < k_out; ++k) f[static_cast<std::size_t>(k)] += round[static_cast<std::size_t>(k)].predict(row);
        return f;
    }
};

inline GbdtModel train_gbdt(const std::vector<double>& x, std::size_t n, std::size_t d,
                            std::span<const int> labels, GrowthPolicy policy,
                            const GbdtParams& params,
                            std::vector<double>* round_logloss = nullptr,
                            LeafwiseTrace* trace = nullptr) {
    params.validate();
    if (n == 0 || labels.size() != n) throw InputError("train_gbdt: bad input sizes");
    int k_out = 0;
    for (int y : labels) {
        if (y < 0) throw InputError("train_gbdt: negative label");
        k_out = std::max(k_out, y + 1);
    }
    if (k_out < 2) throw InputError("train_gbdt: need at least 2 classes");

    GbdtModel model;
    model.policy = policy;
    model.params = params;
    model.k_out = k_out;
    model.d_in = d;

    FeaturePresort ps(x, n, d);
    std::vector<double> f(n * static_cast<std::size_t>(k_out), 0.0);
    std::vector<double> g(n), h(n), p(static_cast<std::size_t>(k_out));

    for (int round = 0; round < params.trees; ++round) {
        std::vector<RegressionTree> trees;
        trees.reserve(static_cast<std::size_t>(k_out));

        // Probabilities for this round, reused across the K class trees.
        std::vector<double> probs(n * static_cast<std::size_t>(k_out));
        double logloss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double* fi = f.data() + i * static_cast<std::size_t>(k_out);
            double zmax = fi[0];
            for (int k = 1; k < k_out; ++k) zmax = std::max(zmax, fi[static_cast<std::size_t>(k)]);
            double sum = 0.0;
            for (int k = 0; k < k_out; ++k) {
                p[static_cast<std::size_t>(k)] = std::exp(fi[static_cast<std::size_t>(k)] - zmax);
                sum += p[static_cast<std::size_t>(k)];
            }
            for (int k = 0; k < k_out; ++k)
                probs[i * static_cast<std::size_t>(k_out) + static_cast<std::size_t>(k)] =
                    p[static_cast<std::size_t>(k)] / sum;
            logloss -= std::log(std::max(
                probs[i * static_cast<std::size_t>(k_out) + static_cast<std::size_t>(labels[i])],
                1e-300));
        }
        if (round_logloss) round_logloss->push_back(logloss / static_cast<double>(n));

        for (int k = 0; k < k_out; ++k) {
            for (std::size_t i = 0; i < n; ++i) {
                const double pik =
                    probs[i * static_cast<std::size_t>(k_out) + static_cast<std::size_t>(k)];
                g[i] = pik - (labels[i] == k ? 1.0 : 0.0);
                h[i] = pik * (1.0 - pik);
            }
            RegressionTree tree = fit_regression_tree(x, n, d, ps, g, h, params, policy, trace);
            for (std::size_t i = 0; i < n; ++i)
                f[i * static_cast<std::size_t>(k_out) + static_cast<std::size_t>(k)] +=
                    tree.predict(std::span<const double>(x).subspan(i * d, d));
            trees.push_back(std::move(tree));
        }
        model.rounds.push_back(std::move(trees));
    }
    return model;
}

// ---------------------------------------------------------------------------
// JSON serialization: trees as node arrays. nlohmann emits shortest
// round-trip doubles, so load(save(m)) reproduces every value bit-exactly.
// ---------------------------------------------------------------------------

inline json tree_to_json(const RegressionTree& t) {
    json nodes = json::array();
    for (const auto& nd : t.nodes)
        nodes.push_back({{"feature", nd.feature},
                         {"threshold", nd.threshold},
                         {"left", nd.left},
                         {"right", nd.right},
                         {"value", nd.value}});
    return nodes;
}

inline RegressionTree tree_from_json(const json& j) {
    RegressionTree t;
    for (const auto& nd : j) {
        TreeNode n;
        n.feature = nd.at("feature").get<int>();
        n.threshold = nd.at("threshold").get<double>();
        n.left = nd.at("left").get<int>();
        n.right = nd.at("right").get<int>();
        n.value = nd.at("value").get<double>();
        t.nodes.push_back(n);
    }
    if (t.nodes.empty()) throw FormatError("tree_from_json: empty node array");
    return t;
}

inline json gbdt_to_json(const GbdtModel& m) {
    json rounds = json::array();
    for (const auto& r : m.rounds) {
        json per_class = json::array();
        for (const auto& t : r) per_class.push_back(tree_to_json(t));
        rounds.push_back(std::move(per_class));
    }
    return json{{"policy", to_string(m.policy)},
                {"k_out", m.k_out},
                {"d_in", m.d_in},
                {"trees", m.params.trees},
                {"lr", m.params.lr},
                {"max_depth", m.params.max_depth},
                {"max_leaves", m.params.max_leaves},
                {"lambda", m.params.lambda},
                {"gamma", m.params.gamma},
                {"min_samples", m.params.min_samples},
                {"rounds", std::move(rounds)}};
}

inline GbdtModel gbdt_from_json(const json& j) {
    GbdtModel m;
    const std::string policy = j.at("policy").get<std::string>();
    if (policy == "level_wise")
        m.policy = GrowthPolicy::level_wise;
    else if (policy == "leaf_wise")
        m.policy = GrowthPolicy::leaf_wise;
    else
        throw FormatError("gbdt_from_json: unknown policy '" + policy + "'");
    m.k_out = j.at("k_out").get<int>();
    m.d_in = j.at("d_in").get<std::size_t>();
    m.params.trees = j.at("trees").get<int>();
    m.params.lr = j.at("lr").get<double>();
    m.params.max_depth = j.at("max_depth").get<int>();
    m.params.max_leaves = j.at("max_leaves").get<int>();
    m.params.lambda = j.at("lambda").get<double>();
    m.params.gamma = j.at("gamma").get<double>();
    m.params.min_samples = j.at("min_samples").get<int>();
    for (const auto& r : j.at("rounds")) {
        std::vector<RegressionTree> per_class;
        for (const auto& t : r) per_class.push_back(tree_from_json(t));
        m.rounds.push_back(std::move(per_class));
    }
    return m;
}

}  // namespace armorbench
