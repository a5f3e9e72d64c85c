#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "advtrain.hpp"
#include "attacks.hpp"
#include "common.hpp"
#include "detectors.hpp"
#include "gbdt.hpp"
#include "model.hpp"

namespace armorbench {

// ---------------------------------------------------------------------------
// Run configuration: one JSON file with per-subcommand sections. Parsing is
// strict — unknown keys, wrong types, and missing required keys are all
// errors naming the offending JSON path. Precedence is flag > config file >
// built-in default.
// ---------------------------------------------------------------------------

struct DataConfig {
    std::string source = "synthetic";  // "synthetic" | "cifar"
    std::string cifar_path;            // batch file, required when source == "cifar"
    int n = 2500;
    int classes = 10;
    int height = 32;
    int width = 32;
    double train_fraction = 0.8;

    void validate() const {
        if (source != "synthetic" && source != "cifar")
            throw ConfigError("data.source must be 'synthetic' or 'cifar', got '" + source + "'");
        if (source == "cifar" && cifar_path.empty())
            throw ConfigError("data.cifar_path is required when data.source is 'cifar'");
        if (!(train_fraction > 0.0 && train_fraction < 1.0))
            throw ConfigError("data.train_fraction must lie in (0,1)");
        if (source == "synthetic" && (classes < 2 || n < classes))
            throw ConfigError("data.n must be >= data.classes >= 2");
        if (height < 4 || width < 4) throw ConfigError("data.height/width must be >= 4");
    }
};

struct ModelConfig {
    int hidden_dim = 128;
    int embed_dim = 64;
    double temperature = 10.0;

    void validate() const {
        if (hidden_dim < 1 || embed_dim < 1)
            throw ConfigError("model dims must be >= 1");
        if (!(temperature > 0.0)) throw ConfigError("model.temperature must be positive");
    }
};

struct TrainSection {
    int epochs = 20;
    double lr = 0.05;
    double momentum = 0.9;
    int batch_size = 32;
    bool train_temperature = false;

    void validate() const {
        if (epochs < 0 || batch_size < 1) throw ConfigError("train.epochs/batch_size invalid");
        if (!(lr > 0.0) || momentum < 0.0 || momentum >= 1.0)
            throw ConfigError("train.lr must be > 0 and momentum in [0,1)");
    }
};

struct DetectorSection {
    std::string feature_checkpoint = "baseline";  // which encoder supplies features
    double holdout_fraction = 0.25;
    int adaboost_rounds = 100;
    int adaboost_depth = 1;
    double adaboost_lr = 1.0;
    int gbdt_trees = 100;
    double gbdt_lr = 0.1;
    int gbdt_max_depth = 4;
    int gbdt_max_leaves = 16;
    double gbdt_lambda = 1.0;
    double gbdt_gamma = 0.0;
    int gbdt_min_samples = 2;
    int mlp_hidden = 64;
    int mlp_epochs = 200;
    double mlp_lr = 0.05;
    double mlp_momentum = 0.9;
    int mlp_batch_size = 32;

    DetectorParams to_params(std::uint64_t seed) const {
        DetectorParams p;
        p.adaboost_rounds = adaboost_rounds;
        p.adaboost_depth = adaboost_depth;
        p.adaboost_lr = adaboost_lr;
        p.gbdt.trees = gbdt_trees;
        p.gbdt.lr = gbdt_lr;
        p.gbdt.max_depth = gbdt_max_depth;
        p.gbdt.max_leaves = gbdt_max_leaves;
        p.gbdt.lambda = gbdt_lambda;
        p.gbdt.gamma = gbdt_gamma;
        p.gbdt.min_samples = gbdt_min_samples;
        p.mlp.hidden = mlp_hidden;
        p.mlp.epochs = mlp_epochs;
        p.mlp.lr = mlp_lr;
        p.mlp.momentum = mlp_momentum;
        p.mlp.batch_size = mlp_batch_size;
        p.mlp.seed = seed;
        return p;
    }

    void validate() const {
        if (feature_checkpoint != "baseline" && feature_checkpoint != "finetuned")
            throw ConfigError("detectors.feature_checkpoint must be 'baseline' or 'finetuned'");
        if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0))
            throw ConfigError("detectors.holdout_fraction must lie in (0,1)");
        if (adaboost_rounds < 1 || adaboost_depth < 1 || !(adaboost_lr > 0.0))
            throw ConfigError("detectors.adaboost_* invalid");
        GbdtParams g;
        g.trees = gbdt_trees;
        g.lr = gbdt_lr;
        g.max_depth = gbdt_max_depth;
        g.max_leaves = gbdt_max_leaves;
        g.lambda = gbdt_lambda;
        g.gamma = gbdt_gamma;
        g.min_samples = gbdt_min_samples;
        g.validate();
        if (mlp_hidden < 1 || mlp_epochs < 0 || mlp_batch_size < 1 || !(mlp_lr > 0.0))
            throw ConfigError("detectors.mlp_* invalid");
    }
};

struct SweepSection {
    std::vector<std::string> kinds = {"adaboost", "gbdt_level", "gbdt_leaf", "mlp"};
    std::vector<double> lrs = {0.01, 0.1, 0.5, 1.0};
    std::vector<int> depth_or_leaves = {1, 2, 4, 8};
    // Reduced budgets keep the full grid affordable.
    int adaboost_rounds = 30;
    int gbdt_trees = 30;
    int mlp_epochs = 60;

    std::vector<DetectorKind> kind_enums() const {
        std::vector<DetectorKind> out;
        for (const auto& k : kinds) out.push_back(detector_kind_from_string(k));
        return out;
    }

    void validate() const {
        if (kinds.empty() || lrs.empty() || depth_or_leaves.empty())
            throw ConfigError("sweep grid must be nonempty");
        kind_enums();  // rejects unknown kind names
        for (double lr : lrs)
            if (!(lr > 0.0)) throw ConfigError("sweep.lrs must be positive");
        for (int dl : depth_or_leaves)
            if (dl < 1) throw ConfigError("sweep.depth_or_leaves must be >= 1");
        if (adaboost_rounds < 1 || gbdt_trees < 1 || mlp_epochs < 0)
            throw ConfigError("sweep round budgets invalid");
    }
};

struct AdvTrainSection {
    std::vector<double> mix = {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
    int epochs = 20;
    double lr = 0.05;
    double momentum = 0.9;
    int batch_size = 32;
    std::string optimizer = "sgd_momentum";

    AdvTrainConfig to_config(const AttackConfig& attack, std::uint64_t seed, int threads) const {
        if (mix.size() != 3) throw ConfigError("advtrain.mix must have exactly 3 entries");
        AdvTrainConfig c;
        c.attack = attack;
        std::copy(mix.begin(), mix.end(), c.mix.begin());
        c.epochs = epochs;
        c.lr = lr;
        c.momentum = momentum;
        c.batch_size = batch_size;
        c.optimizer = optimizer;
        c.seed = seed;
        c.threads = threads;
        return c;
    }

    void validate() const {
        if (mix.size() != 3) throw ConfigError("advtrain.mix must have exactly 3 entries");
        AdvTrainConfig probe = to_config(AttackConfig{}, 0, 1);
        probe.validate();
    }
};

struct RunConfig {
    std::uint64_t seed = 0;
    std::string output_dir;
    int threads = 1;
    bool log_timestamps = false;
    DataConfig data;
    ModelConfig model;
    AttackConfig attack;
    TrainSection train;
    AdvTrainSection advtrain;
    DetectorSection detectors;
    SweepSection sweep;

    ModelArch arch() const {
        ModelArch a;
        a.input_dim = 3 * data.height * data.width;
        a.hidden_dim = model.hidden_dim;
        a.embed_dim = model.embed_dim;
        a.num_classes = data.classes;
        return a;
    }

    void validate() const {
        if (output_dir.empty()) throw ConfigError("output_dir must be nonempty");
        if (threads < 1) throw ConfigError("threads must be >= 1");
        data.validate();
        model.validate();
        attack.validate();
        train.validate();
        advtrain.validate();
        detectors.validate();
        sweep.validate();
        arch().validate();
    }
};

// ---------------------------------------------------------------------------
// Strict JSON walking. Every getter records the key as consumed; finish()
// rejects whatever was not consumed, naming its path.
// ---------------------------------------------------------------------------

namespace detail {

class StrictObject {
  public:
    StrictObject(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object())
            throw ConfigError("expected an object at " + path_);
    }

    const json* child(const std::string& key) {
        seen_.insert(key);
        auto it = j_.find(key);
        return it == j_.end() ? nullptr : &*it;
    }

    void get_string(const std::string& key, std::string& out) {
        if (const json* v = child(key)) {
            if (!v->is_string()) throw ConfigError("expected a string at " + at(key));
            out = v->get<std::string>();
        }
    }
    void get_bool(const std::string& key, bool& out) {
        if (const json* v = child(key)) {
            if (!v->is_boolean()) throw ConfigError("expected a boolean at " + at(key));
            out = v->get<bool>();
        }
    }
    void get_int(const std::string& key, int& out) {
        if (const json* v = child(key)) {
            if (!v->is_number_integer()) throw ConfigError("expected an integer at " + at(key));
            out = v->get<int>();
        }
    }
    void get_u64(const std::string& key, std::uint64_t& out) {
        if (const json* v = child(key)) {
            if (!v->is_number_integer() || (v->is_number_integer() && !v->is_number_unsigned() &&
                                            v->get<std::int64_t>() < 0))
                throw ConfigError("expected a nonnegative integer at " + at(key));
            out = v->get<std::uint64_t>();
        }
    }
    void get_double(const std::string& key, double& out) {
        if (const json* v = child(key)) {
            if (!v->is_number()) throw ConfigError("expected a number at " + at(key));
            out = v->get<double>();
        }
    }
    void get_double_array(const std::string& key, std::vector<double>& out) {
        if (const json* v = child(key)) {
            if (!v->is_array()) throw ConfigError("expected an array at " + at(key));
            out.clear();
            for (const auto& e : *v) {
                if (!e.is_number()) throw ConfigError("expected numbers in array at " + at(key));
                out.push_back(e.get<double>());
            }
        }
    }
    void get_int_array(const std::string& key, std::vector<int>& out) {
        if (const json* v = child(key)) {
            if (!v->is_array()) throw ConfigError("expected an array at " + at(key));
            out.clear();
            for (const auto& e : *v) {
                if (!e.is_number_integer())
                    throw ConfigError("expected integers in array at " + at(key));
                out.push_back(e.get<int>());
            }
        }
    }
    void get_string_array(const std::string& key, std::vector<std::string>& out) {
        if (const json* v = child(key)) {
            if (!v->is_array()) throw ConfigError("expected an array at " + at(key));
            out.clear();
            for (const auto& e : *v) {
                if (!e.is_string()) throw ConfigError("expected strings in array at " + at(key));
                out.push_back(e.get<std::string>());
            }
        }
    }

    bool has(const std::string& key) const { return j_.contains(key); }
    std::string at(const std::string& key) const { return path_ + "." + key; }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key()))
                throw ConfigError("unknown config key " + at(it.key()));
    }

  private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

inline void parse_fixed_weights(StrictObject& o, const std::string& key,
                                std::array<double, 3>& out) {
    std::vector<double> v(out.begin(), out.end());
    o.get_double_array(key, v);
    if (v.size() != 3)
        throw ConfigError("expected exactly 3 entries at " + o.at(key));
    std::copy(v.begin(), v.end(), out.begin());
}

}  // namespace detail

inline RunConfig parse_config(const json& root) {
    RunConfig cfg;
    detail::StrictObject top(root, "$");

    std::vector<std::string> missing;
    if (!top.has("seed")) missing.push_back("$.seed");
    if (!top.has("output_dir")) missing.push_back("$.output_dir");
    if (!missing.empty()) {
        std::string msg = "missing required config key(s):";
        for (const auto& k : missing) msg += " " + k;
        throw ConfigError(msg);
    }

    top.get_u64("seed", cfg.seed);
    top.get_string("output_dir", cfg.output_dir);
    top.get_int("threads", cfg.threads);
    top.get_bool("log_timestamps", cfg.log_timestamps);

    if (const json* j = top.child("data")) {
        detail::StrictObject o(*j, "$.data");
        o.get_string("source", cfg.data.source);
        o.get_string("cifar_path", cfg.data.cifar_path);
        o.get_int("n", cfg.data.n);
        o.get_int("classes", cfg.data.classes);
        o.get_int("height", cfg.data.height);
        o.get_int("width", cfg.data.width);
        o.get_double("train_fraction", cfg.data.train_fraction);
        o.finish();
    }
    if (const json* j = top.child("model")) {
        detail::StrictObject o(*j, "$.model");
        o.get_int("hidden_dim", cfg.model.hidden_dim);
        o.get_int("embed_dim", cfg.model.embed_dim);
        o.get_double("temperature", cfg.model.temperature);
        o.finish();
    }
    if (const json* j = top.child("attack")) {
        detail::StrictObject o(*j, "$.attack");
        o.get_double("epsilon", cfg.attack.epsilon);
        o.get_int("apgd_iters", cfg.attack.apgd_iters);
        o.get_int("apgd_restarts", cfg.attack.apgd_restarts);
        o.get_int("deepfool_max_iter", cfg.attack.deepfool_max_iter);
        o.get_double("deepfool_overshoot", cfg.attack.deepfool_overshoot);
        o.get_bool("enable_dlr", cfg.attack.enable_dlr);
        detail::parse_fixed_weights(o, "fuse_weights", cfg.attack.fuse_weights);
        o.finish();
    }
    if (const json* j = top.child("train")) {
        detail::StrictObject o(*j, "$.train");
        o.get_int("epochs", cfg.train.epochs);
        o.get_double("lr", cfg.train.lr);
        o.get_double("momentum", cfg.train.momentum);
        o.get_int("batch_size", cfg.train.batch_size);
        o.get_bool("train_temperature", cfg.train.train_temperature);
        o.finish();
    }
    if (const json* j = top.child("advtrain")) {
        detail::StrictObject o(*j, "$.advtrain");
        o.get_double_array("mix", cfg.advtrain.mix);
        o.get_int("epochs", cfg.advtrain.epochs);
        o.get_double("lr", cfg.advtrain.lr);
        o.get_double("momentum", cfg.advtrain.momentum);
        o.get_int("batch_size", cfg.advtrain.batch_size);
        o.get_string("optimizer", cfg.advtrain.optimizer);
        o.finish();
    }
    if (const json* j = top.child("detectors")) {
        detail::StrictObject o(*j, "$.detectors");
        o.get_string("feature_checkpoint", cfg.detectors.feature_checkpoint);
        o.get_double("holdout_fraction", cfg.detectors.holdout_fraction);
        o.get_int("adaboost_rounds", cfg.detectors.adaboost_rounds);
        o.get_int("adaboost_depth", cfg.detectors.adaboost_depth);
        o.get_double("adaboost_lr", cfg.detectors.adaboost_lr);
        o.get_int("gbdt_trees", cfg.detectors.gbdt_trees);
        o.get_double("gbdt_lr", cfg.detectors.gbdt_lr);
        o.get_int("gbdt_max_depth", cfg.detectors.gbdt_max_depth);
        o.get_int("gbdt_max_leaves", cfg.detectors.gbdt_max_leaves);
        o.get_double("gbdt_lambda", cfg.detectors.gbdt_lambda);
        o.get_double("gbdt_gamma", cfg.detectors.gbdt_gamma);
        o.get_int("gbdt_min_samples", cfg.detectors.gbdt_min_samples);
        o.get_int("mlp_hidden", cfg.detectors.mlp_hidden);
        o.get_int("mlp_epochs", cfg.detectors.mlp_epochs);
        o.get_double("mlp_lr", cfg.detectors.mlp_lr);
        o.get_double("mlp_momentum", cfg.detectors.mlp_momentum);
        o.get_int("mlp_batch_size", cfg.detectors.mlp_batch_size);
        o.finish();
    }
    if (const json* j = top.child("sweep")) {
        detail::StrictObject o(*j, "$.sweep");
        o.get_string_array("kinds", cfg.sweep.kinds);
        o.get_double_array("lrs", cfg.sweep.lrs);
        o.get_int_array("depth_or_leaves", cfg.sweep.depth_or_leaves);
        o.get_int("adaboost_rounds", cfg.sweep.adaboost_rounds);
        o.get_int("gbdt_trees", cfg.sweep.gbdt_trees);
        o.get_int("mlp_epochs", cfg.sweep.mlp_epochs);
        o.finish();
    }
    top.finish();
    cfg.validate();
    return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path) {
    const auto bytes = read_file_bytes(path);
    json root;
    try {
        root = json::parse(bytes.begin(), bytes.end());
    } catch (const json::parse_error& e) {
        throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_config(root);
}

// Full dump with every field present — the reference form of the defaults.
inline json dump_config(const RunConfig& cfg) {
    return json{
        {"seed", cfg.seed},
        {"output_dir", cfg.output_dir},
        {"threads", cfg.threads},
        {"log_timestamps", cfg.log_timestamps},
        {"data",
         {{"source", cfg.data.source},
          {"cifar_path", cfg.data.cifar_path},
          {"n", cfg.data.n},
          {"classes", cfg.data.classes},
          {"height", cfg.data.height},
          {"width", cfg.data.width},
          {"train_fraction", cfg.data.train_fraction}}},
        {"model",
         {{"hidden_dim", cfg.model.hidden_dim},
          {"embed_dim", cfg.model.embed_dim},
          {"temperature", cfg.model.temperature}}},
        {"attack",
         {{"epsilon", cfg.attack.epsilon},
          {"apgd_iters", cfg.attack.apgd_iters},
          {"apgd_restarts", cfg.attack.apgd_restarts},
          {"deepfool_max_iter", cfg.attack.deepfool_max_iter},
          {"deepfool_overshoot", cfg.attack.deepfool_overshoot},
          {"enable_dlr", cfg.attack.enable_dlr},
          {"fuse_weights", cfg.attack.fuse_weights}}},
        {"train",
         {{"epochs", cfg.train.epochs},
          {"lr", cfg.train.lr},
          {"momentum", cfg.train.momentum},
          {"batch_size", cfg.train.batch_size},
          {"train_temperature", cfg.train.train_temperature}}},
        {"advtrain",
         {{"mix", cfg.advtrain.mix},
          {"epochs", cfg.advtrain.epochs},
          {"lr", cfg.advtrain.lr},
          {"momentum", cfg.advtrain.momentum},
          {"batch_size", cfg.advtrain.batch_size},
          {"optimizer", cfg.advtrain.optimizer}}},
        {"detectors",
         {{"feature_checkpoint", cfg.detectors.feature_checkpoint},
          {"holdout_fraction", cfg.detectors.holdout_fraction},
          {"adaboost_rounds", cfg.detectors.adaboost_rounds},
          {"adaboost_depth", cfg.detectors.adaboost_depth},
          {"adaboost_lr", cfg.detectors.adaboost_lr},
          {"gbdt_trees", cfg.detectors.gbdt_trees},
          {"gbdt_lr", cfg.detectors.gbdt_lr},
          {"gbdt_max_depth", cfg.detectors.gbdt_max_depth},
          {"gbdt_max_leaves", cfg.detectors.gbdt_max_leaves},
          {"gbdt_lambda", cfg.detectors.gbdt_lambda},
          {"gbdt_gamma", cfg.detectors.gbdt_gamma},
          {"gbdt_min_samples", cfg.detectors.gbdt_min_samples},
          {"mlp_hidden", cfg.detectors.mlp_hidden},
          {"mlp_epochs", cfg.detectors.mlp_epochs},
          {"mlp_lr", cfg.detectors.mlp_lr},
          {"mlp_momentum", cfg.detectors.mlp_momentum},
          {"mlp_batch_size", cfg.detectors.mlp_batch_size}}},
        {"sweep",
         {{"kinds", cfg.sweep.kinds},
          {"lrs", cfg.sweep.lrs},
          {"depth_or_leaves", cfg.sweep.depth_or_leaves},
          {"adaboost_rounds", cfg.sweep.adaboost_rounds},
          {"gbdt_trees", cfg.sweep.gbdt_trees},
          {"mlp_epochs", cfg.sweep.mlp_epochs}}}};
}

}  // namespace armorbench
