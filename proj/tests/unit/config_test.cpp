#include "fixtures.hpp"

#include "scholar/config.hpp"
#include "scholar/errors.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>

namespace scholar {
namespace {

using nlohmann::json;

TEST(ConfigTest, EmptyObjectKeepsDefaults) {
    auto c = parse_config(json::object());
    EXPECT_EQ(c.k, 8u);
    EXPECT_DOUBLE_EQ(c.graph.alpha, 0.7);
    EXPECT_DOUBLE_EQ(c.graph.tau, 0.6);
    EXPECT_DOUBLE_EQ(c.graph.lambda, 0.7);
    EXPECT_EQ(c.graph.max_tuples, 300u);
    EXPECT_DOUBLE_EQ(c.canonicalize.distance_threshold, 0.5);
    EXPECT_EQ(c.canonicalize.coarse_k, 2000u);
    EXPECT_EQ(c.entity_embed.model_id, c.embed.model_id);
    EXPECT_NO_THROW(c.validate());
}

TEST(ConfigTest, SectionsOverrideFields) {
    auto c = parse_config(json::parse(R"({
        "store": "x.db", "workers": 3,
        "providers": {"generate": {"endpoint": "http://127.0.0.1:9/v1", "model_id": "m", "api_key_env": "KEY"},
                      "entity_embed": {"model_id": "entity-model"}},
        "retrieval": {"k": 4, "alpha": 0.5, "max_tuples": 50},
        "canonicalize": {"coarse_k": 6, "distance_threshold": 0.3},
        "context": {"token_budget": 1000},
        "service": {"port": 9000, "api_key_env": "SCHOLAR_TEST_KEY"}
    })"));
    EXPECT_EQ(c.store_path, "x.db");
    EXPECT_EQ(c.workers, 3);
    EXPECT_EQ(c.canonicalize.workers, 3);
    EXPECT_EQ(c.generate.endpoint, "http://127.0.0.1:9/v1");
    EXPECT_EQ(c.generate.api_key_env, "KEY");
    EXPECT_EQ(c.entity_embed.model_id, "entity-model");
    EXPECT_EQ(c.embed.model_id, "local-hash");
    EXPECT_EQ(c.k, 4u);
    EXPECT_DOUBLE_EQ(c.graph.alpha, 0.5);
    EXPECT_EQ(c.graph.max_tuples, 50u);
    EXPECT_EQ(c.canonicalize.coarse_k, 6u);
    EXPECT_EQ(c.context.token_budget, 1000u);
    EXPECT_EQ(c.port, 9000);
    EXPECT_EQ(c.api_key_env, "SCHOLAR_TEST_KEY");
}

TEST(ConfigTest, RoundTripsThroughJson) {
    auto c = parse_config(json::parse(R"({"retrieval": {"tau": 0.4}, "canonicalize": {"coarse_k": 5}})"));
    auto again = parse_config(to_json(c));
    EXPECT_EQ(to_json(again), to_json(c));
}

TEST(ConfigTest, MalformedValuesAreConfigErrors) {
    EXPECT_THROW(parse_config(json::array()), ConfigError);
    EXPECT_THROW(parse_config(json::parse(R"({"retrieval": 3})")), ConfigError);
    EXPECT_THROW(parse_config(json::parse(R"({"retrieval": {"k": "eight"}})")), ConfigError);
}

TEST(ConfigTest, ValidateRejectsOutOfRange) {
    auto expect_invalid = [](const char* text) {
        EXPECT_THROW(parse_config(json::parse(text)).validate(), ConfigError) << text;
    };
    expect_invalid(R"({"retrieval": {"k": 0}})");
    expect_invalid(R"({"retrieval": {"k": 65}})");
    expect_invalid(R"({"retrieval": {"alpha": 1.2}})");
    expect_invalid(R"({"retrieval": {"tau": -0.1}})");
    expect_invalid(R"({"retrieval": {"max_tuples": 0}})");
    expect_invalid(R"({"canonicalize": {"coarse_k": 0}})");
    expect_invalid(R"({"canonicalize": {"distance_threshold": 0}})");
    expect_invalid(R"({"workers": 0})");
    expect_invalid(R"({"store": ""})");
    expect_invalid(R"({"service": {"port": 70000}})");
}

TEST(ConfigTest, LoadFileAndEnvOverrides) {
    testing::TempDir dir;
    auto path = (dir.path() / "config.json").string();
    std::ofstream(path) << R"({"store": "file.db", "workers": 2})";
    auto c = load_config(path);
    EXPECT_EQ(c.store_path, "file.db");

    ::setenv("SCHOLAR_STORE", "env.db", 1);
    ::setenv("SCHOLAR_PORT", "9123", 1);
    apply_env_overrides(c);
    ::unsetenv("SCHOLAR_STORE");
    ::unsetenv("SCHOLAR_PORT");
    EXPECT_EQ(c.store_path, "env.db");
    EXPECT_EQ(c.port, 9123);

    ::setenv("SCHOLAR_WORKERS", "many", 1);
    EXPECT_THROW(apply_env_overrides(c), ConfigError);
    ::unsetenv("SCHOLAR_WORKERS");

    std::ofstream((dir.path() / "bad.json").string()) << "{ not json";
    EXPECT_THROW(load_config((dir.path() / "bad.json").string()), ConfigError);
    EXPECT_THROW(load_config((dir.path() / "missing.json").string()), ConfigError);
}

}  // namespace
}  // namespace scholar
