#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "layoutforge/config.hpp"

using namespace layoutforge;
using nlohmann::json;

namespace {

std::string field_of(const json& j) {
  try {
    (void)config_from_json(j);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "<accepted>";
}

std::string write_temp(const std::string& name, const std::string& text) {
  const auto p = std::filesystem::temp_directory_path() / ("layoutforge_config_" + name);
  std::ofstream(p) << text;
  return p.string();
}

}  // namespace

TEST(Config, DefaultsMatchDocumentedValues) {
  const auto c = config_from_json(json::object());
  EXPECT_EQ(c.schedule.steps, 200);
  EXPECT_EQ(c.schedule.beta_start, 1e-4);
  EXPECT_EQ(c.schedule.beta_end, 0.02);
  EXPECT_EQ(c.model.hidden, 256);
  EXPECT_EQ(c.model.context, 64);
  EXPECT_EQ(c.train.epochs, 30);
  EXPECT_EQ(c.train.batch_size, 64);
  EXPECT_EQ(c.train.learning_rate, 1e-3);
  EXPECT_EQ(c.train.condition_dropout_p, 0.1);
  EXPECT_EQ(c.train.design_penalty_lambda, 0.1);
  EXPECT_EQ(c.sampling.projection_every, 25);
  EXPECT_EQ(c.server.host, "127.0.0.1");
}

TEST(Config, OverridesApply) {
  const auto c = config_from_json(json::parse(R"({"schedule":{"T":50},"train":{"batch_size":16},
      "rules":{"g_min":0.02},"server":{"port":0},"paths":{"static_dir":"ui"}})"));
  EXPECT_EQ(c.schedule.steps, 50);
  EXPECT_EQ(c.train.batch_size, 16);
  EXPECT_EQ(c.rules.g_min, 0.02);
  EXPECT_EQ(c.server.port, 0);
  EXPECT_EQ(c.paths.static_dir, "ui");
  EXPECT_EQ(c.train.epochs, 30);
}

TEST(Config, UnknownKeysNamePath) {
  EXPECT_EQ(field_of(json::parse(R"({"trian":{}})")), "trian");
  EXPECT_EQ(field_of(json::parse(R"({"train":{"epoch":3}})")), "train.epoch");
  EXPECT_EQ(field_of(json::parse(R"({"schedule":{"steps":3}})")), "schedule.steps");
}

TEST(Config, TypeErrorsNamePath) {
  EXPECT_EQ(field_of(json::parse(R"({"train":{"epochs":"3"}})")), "train.epochs");
  EXPECT_EQ(field_of(json::parse(R"({"train":{"epochs":2.5}})")), "train.epochs");
  EXPECT_EQ(field_of(json::parse(R"({"train":{"seed":-1}})")), "train.seed");
  EXPECT_EQ(field_of(json::parse(R"({"server":{"host":1}})")), "server.host");
  EXPECT_EQ(field_of(json::parse(R"({"model":3})")), "model");
  EXPECT_EQ(field_of(json::parse(R"([1,2])")), "");
}

TEST(Config, RangeValidation) {
  EXPECT_EQ(field_of(json::parse(R"({"schedule":{"T":0}})")), "schedule.T");
  EXPECT_EQ(field_of(json::parse(R"({"schedule":{"beta_end":2.0}})")).rfind("schedule", 0), 0u);
  EXPECT_EQ(field_of(json::parse(R"({"train":{"batch_size":0}})")), "train.batch_size");
  EXPECT_EQ(field_of(json::parse(R"({"rules":{"tau_align":0}})")), "rules.tau_align");
  EXPECT_EQ(field_of(json::parse(R"({"server":{"port":70000}})")), "server.port");
  EXPECT_EQ(field_of(json::parse(R"({"data":{"split_ratio":1.0}})")), "data.split_ratio");
  EXPECT_EQ(field_of(json::parse(R"({"sampling":{"refine_t_start":201}})")), "sampling.refine_t_start");
}

TEST(Config, JsonRoundTrip) {
  auto c = config_from_json(json::parse(R"({"train":{"seed":5},"eval":{"max_items":7}})"));
  const auto j = to_json(c);
  EXPECT_EQ(to_json(config_from_json(j)), j);
  EXPECT_EQ(j["train"]["seed"], 5);
  EXPECT_EQ(j["eval"]["max_items"], 7);
}

TEST(Config, MissingFileNamesPath) {
  try {
    (void)load_config("/nonexistent/lf.json");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/lf.json"), std::string::npos);
  }
}

TEST(Config, MalformedFile) {
  const auto path = write_temp("bad.json", "{\"train\": ");
  EXPECT_THROW(load_config(path), ConfigError);
}

TEST(Config, EnvironmentVariable) {
  const auto path = write_temp("env.json", R"({"train":{"epochs":4}})");
  ::setenv(kConfigEnvVar, path.c_str(), 1);
  EXPECT_EQ(resolve_config(std::nullopt).train.epochs, 4);
  const auto explicit_path = write_temp("explicit.json", R"({"train":{"epochs":9}})");
  EXPECT_EQ(resolve_config(explicit_path).train.epochs, 9);
  ::unsetenv(kConfigEnvVar);
  EXPECT_EQ(resolve_config(std::nullopt).train.epochs, 30);
}
