#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <iostream>
#include <optional>
#include <set>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "layoutforge/condition.hpp"
#include "layoutforge/config.hpp"
#include "layoutforge/denoiser.hpp"
#include "layoutforge/diffusion.hpp"
#include "layoutforge/error.hpp"
#include "layoutforge/layout.hpp"
#include "layoutforge/rng.hpp"
#include "layoutforge/rules.hpp"
#include "layoutforge/sampler.hpp"

namespace layoutforge {

struct HttpResult {
  int status = 200;
  nlohmann::json body;
};

struct GenerateRequest {
  std::string prompt;
  std::optional<Sketch> sketch;
  std::uint64_t seed = 0;
  bool projection = true;
};

struct RefineRequest {
  Layout layout;
  std::set<std::size_t> pinned;
  std::string prompt;
  std::optional<Sketch> sketch;
  std::uint64_t seed = 0;
  std::optional<int> t_start;
  bool projection = true;
};

namespace detail {

inline const nlohmann::json& require_object(const nlohmann::json& j) {
  if (!j.is_object()) throw Error("request body must be a JSON object", "body");
  return j;
}

inline std::string optional_string(const nlohmann::json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return {};
  if (!it->is_string()) throw Error(std::string(key) + " must be a string", key);
  return it->get<std::string>();
}

inline std::uint64_t read_seed(const nlohmann::json& j) {
  const auto it = j.find("seed");
  if (it == j.end()) return 0;
  if (!it->is_number_integer()) throw Error("seed must be an integer", "seed");
  if (it->is_number_unsigned()) return it->get<std::uint64_t>();
  return static_cast<std::uint64_t>(it->get<std::int64_t>());
}

inline bool read_bool(const nlohmann::json& j, const char* key, bool fallback) {
  const auto it = j.find(key);
  if (it == j.end()) return fallback;
  if (!it->is_boolean()) throw Error(std::string(key) + " must be a boolean", key);
  return it->get<bool>();
}

inline std::optional<Sketch> read_sketch(const nlohmann::json& j) {
  const auto it = j.find("sketch");
  if (it == j.end() || it->is_null()) return std::nullopt;
  return sketch_from_json(*it, "sketch");
}

}  // namespace detail

inline GenerateRequest parse_generate_request(const nlohmann::json& body) {
  const auto& j = detail::require_object(body);
  GenerateRequest r;
  r.prompt = detail::optional_string(j, "prompt");
  r.sketch = detail::read_sketch(j);
  r.seed = detail::read_seed(j);
  r.projection = detail::read_bool(j, "projection", true);
  return r;
}

inline RefineRequest parse_refine_request(const nlohmann::json& body) {
  const auto& j = detail::require_object(body);
  RefineRequest r;
  if (!j.contains("layout")) throw Error("layout is required", "layout");
  r.layout = layout_from_json(j.at("layout"), "layout");
  if (const auto it = j.find("pinned"); it != j.end()) {
    if (!it->is_array()) throw Error("pinned must be an array of indices", "pinned");
    for (std::size_t k = 0; k < it->size(); ++k) {
      const auto& v = (*it)[k];
      const std::string field = "pinned[" + std::to_string(k) + "]";
      if (!v.is_number_integer() || v.get<std::int64_t>() < 0) throw Error("index must be a non-negative integer", field);
      const auto idx = v.get<std::size_t>();
      if (idx >= r.layout.size()) throw Error("index " + std::to_string(idx) + " out of range", field);
      r.pinned.insert(idx);
    }
  }
  r.prompt = detail::optional_string(j, "prompt");
  r.sketch = detail::read_sketch(j);
  r.seed = detail::read_seed(j);
  r.projection = detail::read_bool(j, "projection", true);
  if (const auto it = j.find("t_start"); it != j.end() && !it->is_null()) {
    if (!it->is_number_integer()) throw Error("t_start must be an integer", "t_start");
    r.t_start = it->get<int>();
  }
  return r;
}

/// Stateless request handlers over immutable weights and config.
class Service {
 public:
  Service(DenoiserParams params, AppConfig cfg)
      : params_(std::move(params)),
        cfg_(std::move(cfg)),
        sched_(cfg_.schedule.build()),
        version_(model_version(params_)) {
    SamplerConfig probe;
    detail::check_sampler(probe, params_, sched_);
  }

  [[nodiscard]] const AppConfig& config() const noexcept { return cfg_; }
  [[nodiscard]] const std::string& version() const noexcept { return version_; }

  [[nodiscard]] nlohmann::json health() const { return {{"status", "ok"}}; }

  [[nodiscard]] nlohmann::json vocab() const {
    std::vector<std::string> words(kVocabulary.begin(), kVocabulary.end());
    return {{"keywords", words},
            {"vocab_version", kVocabVersion},
            {"sketch", {{"rows", kSketchSide}, {"cols", kSketchSide}}}};
  }

  [[nodiscard]] nlohmann::json generate(const GenerateRequest& req) const {
    const auto start = std::chrono::steady_clock::now();
    SamplerConfig sc = sampler_config(req.seed, req.projection);
    sc.condition = encode_condition(req.prompt, req.sketch);
    const Layout out = sample(sc, params_, sched_);
    return response(out, start);
  }

  [[nodiscard]] nlohmann::json refine(const RefineRequest& req) const {
    const auto start = std::chrono::steady_clock::now();
    SamplerConfig sc = sampler_config(req.seed, req.projection);
    sc.condition = encode_condition(req.prompt, req.sketch);
    int t_start = req.t_start.value_or(cfg_.sampling.refine_t_start);
    if (t_start == 0 && !req.t_start) t_start = std::max(1, sched_.steps() / 2);
    const Layout out = layoutforge::refine(req.layout, req.pinned, sc, t_start, params_, sched_);
    return response(out, start);
  }

  /// Routes one request. Never throws.
  [[nodiscard]] HttpResult dispatch(const std::string& method, const std::string& path, const std::string& body) const {
    try {
      if (method == "GET" && path == "/health") return {200, health()};
      if (method == "GET" && path == "/api/vocab") return {200, vocab()};
      if (method == "POST" && (path == "/api/generate" || path == "/api/refine")) {
        nlohmann::json j;
        try {
          j = nlohmann::json::parse(body);
        } catch (const nlohmann::json::parse_error&) {
          return error(400, "request body is not valid JSON", "body");
        }
        if (path == "/api/generate") return {200, generate(parse_generate_request(j))};
        return {200, refine(parse_refine_request(j))};
      }
      return error(404, "no route for " + method + " " + path, "");
    } catch (const Error& e) {
      return error(400, e.what(), e.field());
    } catch (const std::exception& e) {
      return internal_error(e.what());
    } catch (...) {
      return internal_error("unknown exception");
    }
  }

 private:
  static HttpResult error(int status, const std::string& message, const std::string& field) {
    return {status, {{"error", message}, {"field", field}}};
  }

  static HttpResult internal_error(const std::string& what) {
    static std::atomic<std::uint64_t> counter{0};
    const auto now = static_cast<std::uint64_t>(std::chrono::steady_clock::now().time_since_epoch().count());
    char id[17];
    std::snprintf(id, sizeof id, "%016llx", static_cast<unsigned long long>(mix64(now ^ counter.fetch_add(1))));
    std::cerr << "internal error " << id << ": " << what << '\n';
    return {500, {{"error", "internal error"}, {"id", id}}};
  }

  [[nodiscard]] SamplerConfig sampler_config(std::uint64_t seed, bool projection) const {
    SamplerConfig sc;
    sc.seed = seed;
    sc.rules = cfg_.rules;
    sc.projection_every = projection ? cfg_.sampling.projection_every : 0;
    return sc;
  }

  [[nodiscard]] nlohmann::json response(const Layout& out, std::chrono::steady_clock::time_point start) const {
    const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return {{"layout", to_json(out)},
            {"rule_report", to_json(rule_report(out, cfg_.rules))},
            {"sample_time_ms", ms},
            {"model_version", version_}};
  }

  DenoiserParams params_;
  AppConfig cfg_;
  DiffusionSchedule sched_;
  std::string version_;
};

/// Wires the service into an httplib server; mounts `static_dir` at / if set.
inline void register_routes(httplib::Server& server, const Service& service, const std::string& static_dir = {}) {
  const auto handler = [&service](const httplib::Request& req, httplib::Response& res) {
    const auto r = service.dispatch(req.method, req.path, req.body);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  server.Get("/health", handler);
  server.Get("/api/vocab", handler);
  server.Post("/api/generate", handler);
  server.Post("/api/refine", handler);
  if (!static_dir.empty() && !server.set_mount_point("/", static_dir)) {
    throw ConfigError("static directory " + static_dir + " does not exist", "paths.static_dir");
  }
  server.set_error_handler([&service](const httplib::Request& req, httplib::Response& res) {
    if (res.status != 404) return;
    const auto r = service.dispatch(req.method, req.path, req.body);
    res.set_content(r.body.dump(), "application/json");
  });
}

}  // namespace layoutforge
