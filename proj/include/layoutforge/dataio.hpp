#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "layoutforge/condition.hpp"
#include "layoutforge/error.hpp"
#include "layoutforge/layout.hpp"
#include "layoutforge/rng.hpp"
#include "layoutforge/rules.hpp"

namespace layoutforge {

// ---------------------------------------------------------------------------
// Corpus

struct CorpusItem {
  Layout layout;
  Condition condition;
  std::string source;  // template name or input file
};

struct Corpus {
  std::vector<CorpusItem> items;
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  nlohmann::json provenance = nlohmann::json::object();
};

/// 8x8 occupancy sketch: per cell, the fraction of a 4x4 grid of sample
/// points covered by visible non-background components.
inline Sketch sketch_from_layout(const Layout& layout) {
  constexpr int kSub = 4;
  Sketch s{};
  for (int r = 0; r < kSketchSide; ++r) {
    for (int c = 0; c < kSketchSide; ++c) {
      int hits = 0;
      for (int sy = 0; sy < kSub; ++sy) {
        for (int sx = 0; sx < kSub; ++sx) {
          const double u = (c + (sx + 0.5) / kSub) / kSketchSide;
          const double v = (r + (sy + 0.5) / kSub) / kSketchSide;
          for (const auto& comp : layout.components) {
            if (!rule_participant(comp)) continue;
            if (u >= comp.left() && u < comp.right() && v >= comp.top() && v < comp.bottom()) {
              ++hits;
              break;
            }
          }
        }
      }
      s[static_cast<std::size_t>(r * kSketchSide + c)] = static_cast<double>(hits) / (kSub * kSub);
    }
  }
  return s;
}

// ---------------------------------------------------------------------------
// RICO-style hierarchy ingestion

/// Label -> component type table, version 1. Labels are matched exactly,
/// then by the last dot-separated segment (Android class names).
inline std::map<std::string, ComponentType> default_label_map() {
  using T = ComponentType;
  return {
      {"Background Image", T::background}, {"Background", T::background},  {"FrameLayout", T::background},
      {"Text", T::text},                   {"TextView", T::text},           {"Text Button", T::button},
      {"TextButton", T::button},           {"Button", T::button},           {"ImageButton", T::button},
      {"Radio Button", T::button},         {"Checkbox", T::button},         {"On/Off Switch", T::button},
      {"Image", T::image},                 {"ImageView", T::image},         {"Video", T::image},
      {"Map View", T::image},              {"Input", T::input},             {"EditText", T::input},
      {"Date Picker", T::input},           {"Number Stepper", T::input},    {"Slider", T::input},
      {"Icon", T::icon},                   {"Pager Indicator", T::icon},    {"List Item", T::list_item},
      {"Card", T::list_item},              {"LinearLayout", T::other},      {"Toolbar", T::other},
      {"Web View", T::other},              {"Drawer", T::other},            {"Modal", T::other},
      {"Advertisement", T::other},         {"Bottom Navigation", T::other}, {"Multi-Tab", T::other},
      {"Button Bar", T::other},
  };
}

/// Reads a JSON object {label: type-name}.
inline std::map<std::string, ComponentType> load_label_map(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open mapping table '" + path + "'", "paths.mapping");
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("mapping table '" + path + "' is not valid JSON: " + e.what(), "paths.mapping");
  }
  if (!j.is_object()) throw DataError("mapping table must be a JSON object", "paths.mapping");
  std::map<std::string, ComponentType> out;
  for (const auto& [label, type] : j.items()) {
    const auto t = type.is_string() ? parse_component_type(type.get<std::string>()) : std::nullopt;
    if (!t) throw DataError("mapping for '" + label + "' is not a component type", "paths.mapping." + label);
    out[label] = *t;
  }
  return out;
}

inline ComponentType map_label(const std::map<std::string, ComponentType>& table, const std::string& label) {
  if (auto it = table.find(label); it != table.end()) return it->second;
  if (const auto dot = label.rfind('.'); dot != std::string::npos) {
    if (auto it = table.find(label.substr(dot + 1)); it != table.end()) return it->second;
  }
  return ComponentType::other;
}

/// Fallback colors when a node carries no color annotation.
inline Color default_type_color(ComponentType t) {
  switch (t) {
    case ComponentType::background: return {0.96, 0.96, 0.96};
    case ComponentType::text: return {0.20, 0.20, 0.20};
    case ComponentType::image: return {0.55, 0.70, 0.85};
    case ComponentType::button: return {0.20, 0.45, 0.85};
    case ComponentType::input: return {0.90, 0.90, 0.92};
    case ComponentType::icon: return {0.45, 0.45, 0.50};
    case ComponentType::list_item: return {0.85, 0.88, 0.92};
    case ComponentType::other: return {0.60, 0.60, 0.60};
  }
  return {0.5, 0.5, 0.5};
}

struct RicoParseResult {
  Layout layout;
  std::vector<std::string> warnings;
};

namespace detail {

inline std::optional<Color> parse_color(const nlohmann::json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s.size() == 7 && s[0] == '#') {
      try {
        const unsigned long v = std::stoul(s.substr(1), nullptr, 16);
        return Color{((v >> 16) & 0xFF) / 255.0, ((v >> 8) & 0xFF) / 255.0, (v & 0xFF) / 255.0};
      } catch (const std::exception&) {
        return std::nullopt;
      }
    }
    return std::nullopt;
  }
  if (j.is_array() && j.size() == 3 && std::all_of(j.begin(), j.end(), [](const auto& v) { return v.is_number(); })) {
    Color c{j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
    if (c.r > 1.0 || c.g > 1.0 || c.b > 1.0) c = {c.r / 255.0, c.g / 255.0, c.b / 255.0};
    return Color{std::clamp(c.r, 0.0, 1.0), std::clamp(c.g, 0.0, 1.0), std::clamp(c.b, 0.0, 1.0)};
  }
  return std::nullopt;
}

struct Leaf {
  Component component;
  double area;
};

inline void flatten_rico(const nlohmann::json& node, const std::string& path, double screen_w, double screen_h,
                         const std::map<std::string, ComponentType>& table, std::vector<Leaf>& leaves,
                         std::vector<std::string>& warnings) {
  if (!node.is_object()) {
    warnings.push_back(path + ": node is not an object; dropped");
    return;
  }
  const auto bounds_it = node.find("bounds");
  if (bounds_it == node.end() || !bounds_it->is_array() || bounds_it->size() != 4 ||
      !std::all_of(bounds_it->begin(), bounds_it->end(), [](const auto& v) { return v.is_number(); })) {
    warnings.push_back(path + ": missing or malformed bounds; dropped");
    return;
  }
  double l = (*bounds_it)[0].get<double>();
  double t = (*bounds_it)[1].get<double>();
  double r = (*bounds_it)[2].get<double>();
  double b = (*bounds_it)[3].get<double>();
  if (l > r) std::swap(l, r);
  if (t > b) std::swap(t, b);

  const auto children_it = node.find("children");
  const bool has_children = children_it != node.end() && children_it->is_array() && !children_it->empty();
  if (has_children) {
    for (std::size_t i = 0; i < children_it->size(); ++i) {
      flatten_rico((*children_it)[i], path + ".children[" + std::to_string(i) + "]", screen_w, screen_h, table, leaves,
                   warnings);
    }
    return;
  }

  l = std::clamp(l, 0.0, screen_w);
  r = std::clamp(r, 0.0, screen_w);
  t = std::clamp(t, 0.0, screen_h);
  b = std::clamp(b, 0.0, screen_h);
  if (r - l <= 0.0 || b - t <= 0.0) {
    warnings.push_back(path + ": zero-area leaf; dropped");
    return;
  }
  std::string label;
  if (auto it = node.find("componentLabel"); it != node.end() && it->is_string()) {
    label = it->get<std::string>();
  } else if (auto it2 = node.find("class"); it2 != node.end() && it2->is_string()) {
    label = it2->get<std::string>();
  }
  Component c;
  c.type = map_label(table, label);
  c.cx = 0.5 * (l + r) / screen_w;
  c.cy = 0.5 * (t + b) / screen_h;
  c.w = (r - l) / screen_w;
  c.h = (b - t) / screen_h;
  c.color = default_type_color(c.type);
  if (auto it = node.find("color"); it != node.end()) {
    if (auto col = parse_color(*it)) {
      c.color = *col;
    } else {
      warnings.push_back(path + ": unreadable color; using type default");
    }
  }
  leaves.push_back({c, c.w * c.h});
}

}  // namespace detail

/// Flattens a RICO-style view hierarchy to its leaves, keeping the
/// kMaxComponents largest (in document order).
inline RicoParseResult parse_rico(const nlohmann::json& root, int screen_w, int screen_h,
                                  const std::map<std::string, ComponentType>& table = default_label_map()) {
  if (screen_w <= 0 || screen_h <= 0) throw DataError("screen size must be positive", "screen");
  RicoParseResult out;
  out.layout.canvas_width = kDefaultCanvasWidth;
  out.layout.canvas_height = kDefaultCanvasHeight;
  if (!root.is_object()) throw DataError("RICO document root must be an object", "$");
  if (auto it = root.find("bounds"); it != root.end() && it->is_array() && it->size() == 4 &&
                                     std::all_of(it->begin(), it->end(), [](const auto& v) { return v.is_number(); })) {
    const auto& bd = *it;
    if ((bd[2].get<double>() - bd[0].get<double>()) * (bd[3].get<double>() - bd[1].get<double>()) == 0.0) {
      out.warnings.emplace_back("$: zero-area root; empty layout");
      return out;
    }
  }
  std::vector<detail::Leaf> leaves;
  detail::flatten_rico(root, "$", screen_w, screen_h, table, leaves, out.warnings);
  if (leaves.size() > static_cast<std::size_t>(kMaxComponents)) {
    std::vector<std::size_t> order(leaves.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return leaves[a].area > leaves[b].area; });
    order.resize(kMaxComponents);
    std::sort(order.begin(), order.end());
    std::vector<detail::Leaf> kept;
    for (auto i : order) kept.push_back(leaves[i]);
    leaves = std::move(kept);
  }
  for (const auto& leaf : leaves) out.layout.components.push_back(leaf.component);
  return out;
}

/// Parses document text; JSON syntax errors become DataError naming `path`.
inline RicoParseResult parse_rico_text(std::string_view text, int screen_w, int screen_h, const std::string& path,
                                       const std::map<std::string, ComponentType>& table = default_label_map()) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path + ": " + e.what(), path);
  }
  return parse_rico(doc, screen_w, screen_h, table);
}

/// Every *.json file in `dir`, in path order. Items get an empty prompt and
/// a sketch rasterized from the parsed layout.
inline Corpus load_rico_dir(const std::string& dir, int screen_w, int screen_h,
                            const std::map<std::string, ComponentType>& table, std::vector<std::string>* warnings) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw DataError("'" + dir + "' is not a directory", "paths.rico");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  Corpus corpus;
  corpus.provenance = {{"source", "rico"}, {"directory", dir}, {"files", files.size()}};
  for (const auto& p : files) {
    std::ifstream f(p);
    std::stringstream ss;
    ss << f.rdbuf();
    auto parsed = parse_rico_text(ss.str(), screen_w, screen_h, p.string(), table);
    if (warnings) {
      for (auto& w : parsed.warnings) warnings->push_back(p.string() + ": " + w);
    }
    corpus.items.push_back({parsed.layout, encode_condition("", sketch_from_layout(parsed.layout)), p.string()});
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// Synthetic corpus

enum class Template : int { login = 0, list = 1, gallery = 2, content = 3 };
inline constexpr std::array<std::string_view, 4> kTemplateNames = {"login", "list", "gallery", "content"};

namespace detail {

inline Color hsv_color(double hue, double sat, double val) {
  hue = std::fmod(std::fmod(hue, 360.0) + 360.0, 360.0);
  const double c = val * sat;
  const double hp = hue / 60.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hp < 1) {
    r = c, g = x;
  } else if (hp < 2) {
    r = x, g = c;
  } else if (hp < 3) {
    g = c, b = x;
  } else if (hp < 4) {
    g = x, b = c;
  } else if (hp < 5) {
    r = x, b = c;
  } else {
    r = c, b = x;
  }
  const double m = val - c;
  return {r + m, g + m, b + m};
}

class TemplateBuilder {
 public:
  TemplateBuilder(Rng& rng, double base_hue, bool dark) : rng_(rng), dark_(dark) {
    for (int k = 0; k < 3; ++k) {
      palette_[static_cast<std::size_t>(k)] =
          hsv_color(base_hue + (k - 1) * 25.0 + rng_.uniform(-5.0, 5.0), rng_.uniform(0.55, 0.7),
                    dark ? rng_.uniform(0.6, 0.7) : rng_.uniform(0.8, 0.9));
    }
    layout_.components.push_back(
        {ComponentType::background, 0.5, 0.5, 1.0, 1.0, dark ? Color{0.12, 0.12, 0.14} : Color{0.97, 0.97, 0.97}, true});
  }

  double jitter_pos() { return rng_.uniform(-0.02, 0.02); }
  double jitter_size() { return rng_.uniform(-0.01, 0.01); }

  [[nodiscard]] Color palette(int k) const { return palette_[static_cast<std::size_t>(k)]; }
  [[nodiscard]] Color text_color() const { return dark_ ? Color{0.85, 0.85, 0.85} : Color{0.2, 0.2, 0.22}; }
  [[nodiscard]] Color field_color() const { return dark_ ? Color{0.25, 0.25, 0.28} : Color{0.9, 0.9, 0.92}; }

  /// Adds a box given its top edge; returns its bottom edge.
  double add(ComponentType type, double cx, double top, double w, double h, Color color) {
    layout_.components.push_back({type, cx, top + 0.5 * h, w, h, color, true});
    return top + h;
  }

  Layout take() { return std::move(layout_); }

 private:
  Rng& rng_;
  bool dark_;
  std::array<Color, 3> palette_{};
  Layout layout_;
};

inline void set_words(Condition& c, std::initializer_list<std::string_view> words) {
  for (auto w : words) {
    if (auto idx = vocab_index(w)) c.keywords[static_cast<std::size_t>(*idx)] = true;
  }
}

/// One layout per template. Single-column templates share cx and width so
/// every pair matches on left, right and cx.
inline CorpusItem make_template_item(Template tpl, Rng& rng) {
  const bool dark = rng.bernoulli(0.5);
  Condition cond;
  set_words(cond, {dark ? "dark" : "light"});
  static constexpr std::array<double, 4> kBaseHue = {215.0, 140.0, 280.0, 25.0};
  TemplateBuilder b(rng, kBaseHue[static_cast<std::size_t>(tpl)], dark);
  using T = ComponentType;

  switch (tpl) {
    case Template::login: {
      set_words(cond, {"login", "form", "input", "button"});
      const double cx = 0.5 + b.jitter_pos();
      const double w = 0.72 + b.jitter_size();
      const double gap = 0.03 + 0.5 * b.jitter_pos();
      double y = 0.14 + b.jitter_pos();
      y = b.add(T::image, cx, y, w, 0.14 + b.jitter_size(), b.palette(1)) + gap;
      y = b.add(T::text, cx, y, w, 0.05, b.text_color()) + gap;
      y = b.add(T::input, cx, y, w, 0.06 + b.jitter_size(), b.field_color()) + gap;
      y = b.add(T::input, cx, y, w, 0.06 + b.jitter_size(), b.field_color()) + gap;
      y = b.add(T::button, cx, y, w, 0.07 + b.jitter_size(), b.palette(0)) + gap;
      if (rng.bernoulli(0.5)) {
        set_words(cond, {"signup"});
        y = b.add(T::button, cx, y, w, 0.07 + b.jitter_size(), b.palette(2)) + gap;
      }
      b.add(T::text, cx, y, w, 0.04, b.text_color());
      break;
    }
    case Template::list: {
      set_words(cond, {"list", "toolbar"});
      const double cx = 0.5 + b.jitter_pos();
      const double w = 0.94 + b.jitter_size();
      double y = 0.02 + b.jitter_pos();
      y = b.add(T::other, cx, y, w, 0.08 + b.jitter_size(), b.palette(0)) + 0.02;
      if (rng.bernoulli(0.5)) {
        set_words(cond, {"search"});
        y = b.add(T::input, cx, y, w, 0.06 + b.jitter_size(), b.field_color()) + 0.02;
      }
      const int rows = 4 + static_cast<int>(rng.below(3));
      const double h = 0.09 + b.jitter_size();
      const double gap = 0.016 + 0.2 * b.jitter_pos();
      for (int i = 0; i < rows; ++i) y = b.add(T::list_item, cx, y, w, h, b.palette(2)) + gap;
      break;
    }
    case Template::gallery: {
      set_words(cond, {"grid", "gallery", "image", "photo"});
      const double cx = 0.5 + b.jitter_pos();
      const double w = 0.92 + b.jitter_size();
      double y = 0.02 + b.jitter_pos();
      y = b.add(T::other, cx, y, w, 0.08 + b.jitter_size(), b.palette(0)) + 0.03;
      const double gap = 0.03 + 0.5 * b.jitter_pos();
      const double tile_w = 0.5 * (w - gap);
      const double tile_h = 0.2 + b.jitter_size();
      const double left_cx = cx - 0.5 * w + 0.5 * tile_w;
      const double right_cx = cx + 0.5 * w - 0.5 * tile_w;
      for (int r = 0; r < 3; ++r) {
        b.add(T::image, left_cx, y, tile_w, tile_h, b.palette(1 + (r % 2)));
        y = b.add(T::image, right_cx, y, tile_w, tile_h, b.palette(2 - (r % 2))) + gap;
      }
      break;
    }
    case Template::content: {
      set_words(cond, {"toolbar", "header", "text", "button"});
      const double cx = 0.5 + b.jitter_pos();
      const double w = 0.9 + b.jitter_size();
      double y = 0.02 + b.jitter_pos();
      y = b.add(T::other, cx, y, w, 0.08 + b.jitter_size(), b.palette(0)) + 0.025;
      y = b.add(T::image, cx, y, w, 0.24 + b.jitter_size(), b.palette(1)) + 0.025;
      y = b.add(T::text, cx, y, w, 0.05, b.text_color()) + 0.02;
      const int paragraphs = 2 + static_cast<int>(rng.below(2));
      for (int i = 0; i < paragraphs; ++i) y = b.add(T::text, cx, y, w, 0.1 + b.jitter_size(), b.text_color()) + 0.02;
      b.add(T::button, cx, y + 0.01, w, 0.07 + b.jitter_size(), b.palette(2));
      break;
    }
  }
  CorpusItem item{b.take(), cond, std::string(kTemplateNames[static_cast<std::size_t>(tpl)])};
  item.condition.sketch = sketch_from_layout(item.layout);
  return item;
}

}  // namespace detail

/// Seeded synthetic corpus drawn uniformly from four screen templates.
inline Corpus synth_corpus(std::size_t n, std::uint64_t seed) {
  if (n < 1) throw DataError("synthetic corpus needs n >= 1", "data.synth_n");
  Corpus corpus;
  corpus.items.reserve(n);
  const Rng root(seed);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = root.substream(i);
    const auto tpl = static_cast<Template>(rng.below(kTemplateNames.size()));
    corpus.items.push_back(detail::make_template_item(tpl, rng));
  }
  corpus.provenance = {{"source", "synthetic"}, {"templates", kTemplateNames}, {"seed", seed}, {"n", n}};
  return corpus;
}

/// Seeded shuffle, then the first round(ratio * n) indices train.
inline Corpus split(Corpus corpus, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw DataError("split ratio must lie in (0,1)", "data.split_ratio");
  const std::size_t n = corpus.items.size();
  const auto n_train = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));
  if (n_train == 0 || n_train == n) {
    throw DataError("split of " + std::to_string(n) + " items at ratio " + std::to_string(ratio) +
                        " leaves one side empty",
                    "data.split_ratio");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order.begin(), order.end());
  corpus.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  corpus.validation.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  corpus.provenance["split"] = {{"ratio", ratio}, {"seed", seed}};
  return corpus;
}

// ---------------------------------------------------------------------------
// JSON-lines corpus file: a header line, then one item per line.

inline constexpr std::string_view kCorpusFormat = "layoutforge-corpus";

inline std::string corpus_to_jsonl(const Corpus& corpus) {
  std::string out;
  nlohmann::json header = {{"format", kCorpusFormat},
                           {"version", 1},
                           {"count", corpus.items.size()},
                           {"provenance", corpus.provenance}};
  out += header.dump() + "\n";
  for (const auto& item : corpus.items) {
    nlohmann::json line = {{"layout", to_json(item.layout)}, {"condition", to_json(item.condition)},
                           {"source", item.source}};
    out += line.dump() + "\n";
  }
  return out;
}

inline void save_corpus(const Corpus& corpus, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path + "' for writing", "paths.corpus");
  f << corpus_to_jsonl(corpus);
}

inline Corpus corpus_from_jsonl(std::istream& in, const std::string& path = "<corpus>") {
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty corpus file", "paths.corpus");
  Corpus corpus;
  try {
    const auto header = nlohmann::json::parse(line);
    if (header.value("format", "") != kCorpusFormat) throw DataError(path + ": not a corpus file", "paths.corpus");
    corpus.provenance = header.value("provenance", nlohmann::json::object());
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      const auto j = nlohmann::json::parse(line);
      try {
        corpus.items.push_back({layout_from_json(j.at("layout"), "layout"), condition_from_json(j.at("condition")),
                                j.value("source", "")});
      } catch (const Error& e) {
        throw DataError(path + ":" + std::to_string(lineno) + ": " + e.what(), e.field());
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": " + e.what(), "paths.corpus");
  }
  return corpus;
}

inline Corpus load_corpus(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open corpus '" + path + "'", "paths.corpus");
  return corpus_from_jsonl(f, path);
}

}  // namespace layoutforge
