#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "layoutforge/error.hpp"

namespace layoutforge {

inline constexpr int kVocabSize = 32;
inline constexpr int kSketchSide = 8;
inline constexpr int kSketchCells = kSketchSide * kSketchSide;
inline constexpr int kConditionDim = kVocabSize + kSketchCells;
inline constexpr int kVocabVersion = 1;

/// Keyword vocabulary, version 1. Indices are part of the weights format.
inline constexpr std::array<std::string_view, kVocabSize> kVocabulary = {
    "app",    "home",   "screen", "form",    "login",  "signup", "list",    "grid",
    "gallery", "toolbar", "light", "dark",   "button", "input",  "image",   "text",
    "icon",   "search", "settings", "profile", "menu",  "header", "footer", "card",
    "photo",  "shop",   "news",   "chat",    "map",    "video",  "colorful", "minimal"};

inline std::optional<int> vocab_index(std::string_view word) {
  for (int i = 0; i < kVocabSize; ++i) {
    if (kVocabulary[static_cast<std::size_t>(i)] == word) return i;
  }
  return std::nullopt;
}

using Sketch = std::array<double, kSketchCells>;

/// Keyword bag plus an 8x8 occupancy sketch (row-major, entries in [0,1]).
struct Condition {
  std::array<bool, kVocabSize> keywords{};
  Sketch sketch{};

  /// Dense vector c: 32 keyword bits followed by the sketch cells.
  [[nodiscard]] Eigen::VectorXd encoded() const {
    Eigen::VectorXd c(kConditionDim);
    for (int i = 0; i < kVocabSize; ++i) c(i) = keywords[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
    for (int i = 0; i < kSketchCells; ++i) c(kVocabSize + i) = sketch[static_cast<std::size_t>(i)];
    return c;
  }

  [[nodiscard]] std::vector<std::string> keyword_list() const {
    std::vector<std::string> out;
    for (int i = 0; i < kVocabSize; ++i) {
      if (keywords[static_cast<std::size_t>(i)]) out.emplace_back(kVocabulary[static_cast<std::size_t>(i)]);
    }
    return out;
  }

  friend bool operator==(const Condition&, const Condition&) = default;
};

/// Lowercases and splits on whitespace; unknown words are ignored.
inline Condition encode_condition(std::string_view prompt, const std::optional<Sketch>& sketch = std::nullopt) {
  Condition c;
  std::string lowered(prompt);
  std::transform(lowered.begin(), lowered.end(), lowered.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  std::istringstream words(lowered);
  std::string word;
  while (words >> word) {
    if (const auto idx = vocab_index(word)) c.keywords[static_cast<std::size_t>(*idx)] = true;
  }
  if (sketch) {
    for (std::size_t i = 0; i < c.sketch.size(); ++i) c.sketch[i] = std::clamp((*sketch)[i], 0.0, 1.0);
  }
  return c;
}

inline nlohmann::json to_json(const Condition& c) {
  return {{"keywords", c.keyword_list()}, {"sketch", std::vector<double>(c.sketch.begin(), c.sketch.end())}};
}

/// Reads a sketch array; throws Error with `field` when malformed.
inline Sketch sketch_from_json(const nlohmann::json& j, const std::string& field = "sketch") {
  if (!j.is_array()) throw Error("sketch must be an array of " + std::to_string(kSketchCells) + " numbers", field);
  if (j.size() != static_cast<std::size_t>(kSketchCells)) {
    throw Error("sketch must have exactly " + std::to_string(kSketchCells) + " entries, got " +
                    std::to_string(j.size()),
                field);
  }
  Sketch s{};
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!j[i].is_number()) throw Error("sketch entries must be numbers", field);
    const double v = j[i].get<double>();
    if (!(v >= 0.0 && v <= 1.0)) throw Error("sketch entries must lie in [0,1]", field);
    s[i] = v;
  }
  return s;
}

inline Condition condition_from_json(const nlohmann::json& j) {
  Condition c;
  if (j.contains("keywords")) {
    for (const auto& w : j.at("keywords")) {
      if (const auto idx = vocab_index(w.get<std::string>())) c.keywords[static_cast<std::size_t>(*idx)] = true;
    }
  }
  if (j.contains("sketch")) c.sketch = sketch_from_json(j.at("sketch"));
  return c;
}

}  // namespace layoutforge
