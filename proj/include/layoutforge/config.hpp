#pragma once

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "layoutforge/denoiser.hpp"
#include "layoutforge/diffusion.hpp"
#include "layoutforge/error.hpp"
#include "layoutforge/rules.hpp"
#include "layoutforge/train.hpp"

namespace layoutforge {

struct ScheduleConfig {
  int steps = 200;
  double beta_start = 1e-4;
  double beta_end = 0.02;

  [[nodiscard]] DiffusionSchedule build() const { return DiffusionSchedule::linear(steps, beta_start, beta_end); }
};

struct SamplingConfig {
  int projection_every = 25;
  int refine_t_start = 0;  // 0 = T / 2
  std::uint64_t seed = 0;
};

struct PathsConfig {
  std::string corpus;
  std::string weights;
  std::string label_map;
  std::string static_dir;
};

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
};

struct DataConfig {
  std::size_t synth_n = 2000;
  std::uint64_t synth_seed = 7;
  double split_ratio = 0.9;
  std::uint64_t split_seed = 0;
};

struct EvalConfig {
  std::uint64_t seed = 0;
  std::size_t max_items = 0;
};

struct AppConfig {
  ScheduleConfig schedule{};
  DenoiserDims model{};
  TrainConfig train{};
  RuleConfig rules{};
  SamplingConfig sampling{};
  PathsConfig paths{};
  ServerConfig server{};
  DataConfig data{};
  EvalConfig eval{};

  void validate() const {
    if (schedule.steps < 1) throw ConfigError("T must be positive", "schedule.T");
    try {
      (void)schedule.build();
    } catch (const ConfigError& e) {
      throw ConfigError(e.what(), e.field().empty() ? "schedule" : "schedule." + e.field());
    }
    if (model.hidden < 1) throw ConfigError("hidden must be positive", "model.hidden");
    if (model.context < 1) throw ConfigError("context must be positive", "model.context");
    train.validate();
    rules.validate();
    if (sampling.projection_every < 0) {
      throw ConfigError("projection_every must be >= 0", "sampling.projection_every");
    }
    if (sampling.refine_t_start < 0 || sampling.refine_t_start > schedule.steps) {
      throw ConfigError("refine_t_start must lie in [0, T]", "sampling.refine_t_start");
    }
    if (server.port < 0 || server.port > 65535) throw ConfigError("port out of range", "server.port");
    if (!(data.split_ratio > 0.0 && data.split_ratio < 1.0)) {
      throw ConfigError("split_ratio must lie in (0,1)", "data.split_ratio");
    }
  }
};

namespace detail {

/// Reads known keys of one JSON object; anything left over is an error.
class SectionReader {
 public:
  SectionReader(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError("expected an object", path_);
  }

  template <class T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    const auto it = j_.find(key);
    if (it == j_.end()) return;
    const std::string field = path_.empty() ? key : path_ + "." + key;
    if constexpr (std::is_same_v<T, std::string>) {
      if (!it->is_string()) throw ConfigError("expected a string", field);
    } else if constexpr (std::is_integral_v<T>) {
      if (!it->is_number_integer()) throw ConfigError("expected an integer", field);
      if (std::is_unsigned_v<T> && it->is_number_integer() && !it->is_number_unsigned() && it->get<long long>() < 0) {
        throw ConfigError("expected a non-negative integer", field);
      }
    } else {
      if (!it->is_number()) throw ConfigError("expected a number", field);
    }
    out = it->get<T>();
  }

  const nlohmann::json* section(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string child(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.contains(key)) throw ConfigError("unknown key", path_.empty() ? key : path_ + "." + key);
    }
  }

 private:
  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace detail

/// Parses a config document. Missing keys keep their defaults; unknown keys
/// and wrongly typed values are rejected with their key path.
inline AppConfig config_from_json(const nlohmann::json& j) {
  AppConfig cfg;
  detail::SectionReader root(j, "");
  if (const auto* s = root.section("schedule")) {
    detail::SectionReader r(*s, "schedule");
    r.read("T", cfg.schedule.steps);
    r.read("beta_start", cfg.schedule.beta_start);
    r.read("beta_end", cfg.schedule.beta_end);
    r.finish();
  }
  if (const auto* s = root.section("model")) {
    detail::SectionReader r(*s, "model");
    r.read("hidden", cfg.model.hidden);
    r.read("context", cfg.model.context);
    r.finish();
  }
  if (const auto* s = root.section("train")) {
    detail::SectionReader r(*s, "train");
    r.read("epochs", cfg.train.epochs);
    r.read("batch_size", cfg.train.batch_size);
    r.read("learning_rate", cfg.train.learning_rate);
    r.read("beta1", cfg.train.beta1);
    r.read("beta2", cfg.train.beta2);
    r.read("epsilon", cfg.train.epsilon);
    r.read("condition_dropout_p", cfg.train.condition_dropout_p);
    r.read("design_penalty_lambda", cfg.train.design_penalty_lambda);
    r.read("seed", cfg.train.seed);
    r.finish();
  }
  if (const auto* s = root.section("rules")) {
    detail::SectionReader r(*s, "rules");
    r.read("tau_align", cfg.rules.tau_align);
    r.read("tau_snap", cfg.rules.tau_snap);
    r.read("g_min", cfg.rules.g_min);
    r.read("hue_sigma", cfg.rules.hue_sigma);
    r.finish();
  }
  if (const auto* s = root.section("sampling")) {
    detail::SectionReader r(*s, "sampling");
    r.read("projection_every", cfg.sampling.projection_every);
    r.read("refine_t_start", cfg.sampling.refine_t_start);
    r.read("seed", cfg.sampling.seed);
    r.finish();
  }
  if (const auto* s = root.section("paths")) {
    detail::SectionReader r(*s, "paths");
    r.read("corpus", cfg.paths.corpus);
    r.read("weights", cfg.paths.weights);
    r.read("label_map", cfg.paths.label_map);
    r.read("static_dir", cfg.paths.static_dir);
    r.finish();
  }
  if (const auto* s = root.section("server")) {
    detail::SectionReader r(*s, "server");
    r.read("host", cfg.server.host);
    r.read("port", cfg.server.port);
    r.finish();
  }
  if (const auto* s = root.section("data")) {
    detail::SectionReader r(*s, "data");
    r.read("synth_n", cfg.data.synth_n);
    r.read("synth_seed", cfg.data.synth_seed);
    r.read("split_ratio", cfg.data.split_ratio);
    r.read("split_seed", cfg.data.split_seed);
    r.finish();
  }
  if (const auto* s = root.section("eval")) {
    detail::SectionReader r(*s, "eval");
    r.read("seed", cfg.eval.seed);
    r.read("max_items", cfg.eval.max_items);
    r.finish();
  }
  root.finish();
  cfg.validate();
  return cfg;
}

inline nlohmann::json to_json(const AppConfig& c) {
  return {{"schedule", {{"T", c.schedule.steps}, {"beta_start", c.schedule.beta_start}, {"beta_end", c.schedule.beta_end}}},
          {"model", {{"hidden", c.model.hidden}, {"context", c.model.context}}},
          {"train", to_json(c.train)},
          {"rules",
           {{"tau_align", c.rules.tau_align},
            {"tau_snap", c.rules.tau_snap},
            {"g_min", c.rules.g_min},
            {"hue_sigma", c.rules.hue_sigma}}},
          {"sampling",
           {{"projection_every", c.sampling.projection_every},
            {"refine_t_start", c.sampling.refine_t_start},
            {"seed", c.sampling.seed}}},
          {"paths",
           {{"corpus", c.paths.corpus},
            {"weights", c.paths.weights},
            {"label_map", c.paths.label_map},
            {"static_dir", c.paths.static_dir}}},
          {"server", {{"host", c.server.host}, {"port", c.server.port}}},
          {"data",
           {{"synth_n", c.data.synth_n},
            {"synth_seed", c.data.synth_seed},
            {"split_ratio", c.data.split_ratio},
            {"split_seed", c.data.split_seed}}},
          {"eval", {{"seed", c.eval.seed}, {"max_items", c.eval.max_items}}}};
}

inline constexpr const char* kConfigEnvVar = "LAYOUTFORGE_CONFIG";

/// Loads `path`. A missing or unparsable file is a ConfigError naming it.
inline AppConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path, "config");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what(), "config");
  }
  return config_from_json(j);
}

/// Explicit path, else $LAYOUTFORGE_CONFIG, else defaults.
inline AppConfig resolve_config(const std::optional<std::string>& path) {
  if (path && !path->empty()) return load_config(*path);
  if (const char* env = std::getenv(kConfigEnvVar); env != nullptr && *env != '\0') return load_config(env);
  AppConfig cfg;
  cfg.validate();
  return cfg;
}

}  // namespace layoutforge
