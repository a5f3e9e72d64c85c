#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <string>
#include <vector>

#include <armorbench/config.hpp>

#include "support/test_helpers.hpp"

using namespace armorbench;
using Catch::Matchers::ContainsSubstring;

namespace {

json minimal_config() { return json{{"seed", 0}, {"output_dir", "out"}}; }

}  // namespace

TEST_CASE("missing required keys are reported together by path") {
    CHECK_THROWS_WITH(parse_config(json::object()),
                      "missing required config key(s): $.seed $.output_dir");
    CHECK_THROWS_WITH(parse_config(json{{"output_dir", "out"}}),
                      "missing required config key(s): $.seed");
    CHECK_THROWS_WITH(parse_config(json{{"seed", 3}}),
                      "missing required config key(s): $.output_dir");
    CHECK_THROWS_AS(parse_config(json::object()), ConfigError);
}

TEST_CASE("a minimal config fills in every default") {
    const RunConfig cfg = parse_config(minimal_config());

    CHECK(cfg.seed == 0);
    CHECK(cfg.output_dir == "out");
    CHECK(cfg.threads == 1);
    CHECK_FALSE(cfg.log_timestamps);

    CHECK(cfg.data.source == "synthetic");
    CHECK(cfg.data.n == 2500);
    CHECK(cfg.data.classes == 10);
    CHECK(cfg.data.height == 32);
    CHECK(cfg.data.width == 32);
    CHECK(cfg.data.train_fraction == 0.8);

    CHECK(cfg.model.hidden_dim == 128);
    CHECK(cfg.model.embed_dim == 64);
    CHECK(cfg.model.temperature == 10.0);

    CHECK(cfg.attack.epsilon == 8.0 / 255.0);
    CHECK(cfg.attack.apgd_iters == 50);
    CHECK(cfg.attack.apgd_restarts == 2);
    CHECK(cfg.attack.enable_dlr);

    CHECK(cfg.train.epochs == 20);
    CHECK(cfg.advtrain.mix == std::vector<double>{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
    CHECK(cfg.advtrain.optimizer == "sgd_momentum");

    CHECK(cfg.detectors.feature_checkpoint == "baseline");
    CHECK(cfg.detectors.holdout_fraction == 0.25);
    CHECK(cfg.sweep.kinds ==
          std::vector<std::string>{"adaboost", "gbdt_level", "gbdt_leaf", "mlp"});
    CHECK(cfg.sweep.lrs == std::vector<double>{0.01, 0.1, 0.5, 1.0});
    CHECK(cfg.sweep.depth_or_leaves == std::vector<int>{1, 2, 4, 8});
}

TEST_CASE("unknown keys are rejected with their full path") {
    json top = minimal_config();
    top["epsilonn"] = 1;
    CHECK_THROWS_WITH(parse_config(top), "unknown config key $.epsilonn");

    json nested = minimal_config();
    nested["attack"] = {{"epsilonn", 0.1}};
    CHECK_THROWS_WITH(parse_config(nested), "unknown config key $.attack.epsilonn");

    json deep = minimal_config();
    deep["detectors"] = {{"mlp_width", 8}};
    CHECK_THROWS_WITH(parse_config(deep), "unknown config key $.detectors.mlp_width");
}

TEST_CASE("type mismatches name the offending path") {
    auto with = [](const std::string& key, json value) {
        json j = minimal_config();
        j[key] = std::move(value);
        return j;
    };

    CHECK_THROWS_WITH(parse_config(with("seed", "zero")),
                      "expected a nonnegative integer at $.seed");
    CHECK_THROWS_WITH(parse_config(with("seed", -1)),
                      "expected a nonnegative integer at $.seed");
    CHECK_THROWS_WITH(parse_config(with("output_dir", 5)), "expected a string at $.output_dir");
    CHECK_THROWS_WITH(parse_config(with("threads", "many")),
                      "expected an integer at $.threads");
    CHECK_THROWS_WITH(parse_config(with("log_timestamps", 1)),
                      "expected a boolean at $.log_timestamps");
    CHECK_THROWS_WITH(parse_config(with("data", 5)), "expected an object at $.data");

    json attack = minimal_config();
    attack["attack"] = {{"epsilon", "wide"}};
    CHECK_THROWS_WITH(parse_config(attack), "expected a number at $.attack.epsilon");

    json mix = minimal_config();
    mix["advtrain"] = {{"mix", "even"}};
    CHECK_THROWS_WITH(parse_config(mix), "expected an array at $.advtrain.mix");
    mix["advtrain"] = {{"mix", json::array({0.5, "x", 0.2})}};
    CHECK_THROWS_WITH(parse_config(mix), "expected numbers in array at $.advtrain.mix");

    json weights = minimal_config();
    weights["attack"] = {{"fuse_weights", json::array({0.5, 0.5})}};
    CHECK_THROWS_WITH(parse_config(weights),
                      "expected exactly 3 entries at $.attack.fuse_weights");

    json kinds = minimal_config();
    kinds["sweep"] = {{"kinds", json::array({1})}};
    CHECK_THROWS_WITH(parse_config(kinds), "expected strings in array at $.sweep.kinds");
    kinds["sweep"] = {{"depth_or_leaves", json::array({1.5})}};
    CHECK_THROWS_WITH(parse_config(kinds),
                      "expected integers in array at $.sweep.depth_or_leaves");
}

TEST_CASE("integer-valued fields accept integers where doubles are expected") {
    json j = minimal_config();
    j["attack"] = {{"epsilon", 1}};  // integer literal for a double field
    const RunConfig cfg = parse_config(j);
    CHECK(cfg.attack.epsilon == 1.0);
}

TEST_CASE("large unsigned seeds survive parsing") {
    json j = minimal_config();
    j["seed"] = std::uint64_t{1} << 63;
    const RunConfig cfg = parse_config(j);
    CHECK(cfg.seed == std::uint64_t{1} << 63);
}

TEST_CASE("semantic validation rejects bad values") {
    auto patched = [](const std::string& section, json body) {
        json j = minimal_config();
        j[section] = std::move(body);
        return j;
    };

    CHECK_THROWS_WITH(parse_config(patched("data", json{{"source", "imagenet"}})),
                      ContainsSubstring("'imagenet'"));
    CHECK_THROWS_WITH(parse_config(patched("data", json{{"source", "cifar"}})),
                      ContainsSubstring("cifar_path"));
    CHECK_THROWS_AS(parse_config(patched("data", json{{"train_fraction", 1.0}})), ConfigError);
    CHECK_THROWS_AS(parse_config(patched("data", json{{"height", 2}})), ConfigError);
    CHECK_THROWS_AS(parse_config(patched("model", json{{"temperature", 0.0}})), ConfigError);
    CHECK_THROWS_AS(parse_config(patched("attack", json{{"epsilon", -0.1}})), ConfigError);
    CHECK_THROWS_AS(parse_config(patched("sweep", json{{"lrs", json::array({0.0})}})),
                    ConfigError);
    CHECK_THROWS_AS(parse_config(patched("sweep", json{{"kinds", json::array({"boost"})}})),
                    ConfigError);
    CHECK_THROWS_AS(
        parse_config(patched("advtrain", json{{"mix", json::array({0.5, 0.2, 0.2})}})),
        ConfigError);
    CHECK_THROWS_AS(parse_config(patched("advtrain", json{{"optimizer", "adam"}})), ConfigError);

    json j = minimal_config();
    j["threads"] = 0;
    CHECK_THROWS_WITH(parse_config(j), ContainsSubstring("threads"));
    j = minimal_config();
    j["output_dir"] = "";
    CHECK_THROWS_WITH(parse_config(j), ContainsSubstring("output_dir"));
}

TEST_CASE("the model arch derives from data and model sections") {
    json j = minimal_config();
    j["data"] = {{"height", 16}, {"width", 8}, {"classes", 5}, {"n", 50}};
    j["model"] = {{"hidden_dim", 32}, {"embed_dim", 16}};
    const RunConfig cfg = parse_config(j);
    const ModelArch arch = cfg.arch();
    CHECK(arch.input_dim == 3 * 16 * 8);
    CHECK(arch.hidden_dim == 32);
    CHECK(arch.embed_dim == 16);
    CHECK(arch.num_classes == 5);
}

TEST_CASE("dumped configs parse back to the same configuration") {
    RunConfig cfg;
    cfg.seed = 7;
    cfg.output_dir = "artifacts";
    cfg.attack.epsilon = 4.0 / 255.0;
    cfg.train.epochs = 3;
    cfg.sweep.lrs = {0.1, 0.5};

    const json dumped = dump_config(cfg);
    const RunConfig back = parse_config(dumped);
    CHECK(dump_config(back) == dumped);
    CHECK(back.seed == 7);
    CHECK(back.attack.epsilon == 4.0 / 255.0);
    CHECK(back.train.epochs == 3);
}

TEST_CASE("config files load from disk with parse diagnostics") {
    testsupport::TempDir dir("config");

    const json good = minimal_config();
    const std::string text = good.dump(2);
    write_file_bytes(dir.path("good.json"),
                     std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
    const RunConfig cfg = load_config(dir.path("good.json"));
    CHECK(cfg.output_dir == "out");

    const std::string broken = "{\"seed\": 0,,}";
    write_file_bytes(dir.path("broken.json"),
                     std::span(reinterpret_cast<const std::uint8_t*>(broken.data()),
                               broken.size()));
    CHECK_THROWS_AS(load_config(dir.path("broken.json")), ConfigError);
    CHECK_THROWS_WITH(load_config(dir.path("broken.json")),
                      ContainsSubstring("not valid JSON"));

    CHECK_THROWS_AS(load_config(dir.path("missing.json")), IoError);
}
