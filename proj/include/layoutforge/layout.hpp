#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "layoutforge/error.hpp"

namespace layoutforge {

inline constexpr int kMaxComponents = 16;
inline constexpr int kFeatureDim = 16;
inline constexpr int kNumTypes = 8;
inline constexpr double kMinSize = 0.02;
inline constexpr int kDefaultCanvasWidth = 144;
inline constexpr int kDefaultCanvasHeight = 256;

/// Column layout of one LayoutTensor row.
namespace col {
inline constexpr int kLogits = 0;  // 8 one-hot type slots
inline constexpr int kCx = 8;
inline constexpr int kCy = 9;
inline constexpr int kW = 10;
inline constexpr int kH = 11;
inline constexpr int kR = 12;
inline constexpr int kG = 13;
inline constexpr int kB = 14;
inline constexpr int kPresence = 15;
}  // namespace col

enum class ComponentType : std::uint8_t {
  background = 0,
  text = 1,
  image = 2,
  button = 3,
  input = 4,
  icon = 5,
  list_item = 6,
  other = 7,
};

inline constexpr std::array<std::string_view, kNumTypes> kTypeNames = {
    "background", "text", "image", "button", "input", "icon", "list_item", "other"};

constexpr std::string_view to_string(ComponentType t) noexcept { return kTypeNames[static_cast<std::size_t>(t)]; }

inline std::optional<ComponentType> parse_component_type(std::string_view name) {
  for (std::size_t i = 0; i < kTypeNames.size(); ++i) {
    if (kTypeNames[i] == name) return static_cast<ComponentType>(i);
  }
  return std::nullopt;
}

struct Color {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;

  friend bool operator==(const Color&, const Color&) = default;
};

/// One UI element on the unit canvas. Position is the box center.
struct Component {
  ComponentType type = ComponentType::other;
  double cx = 0.5;
  double cy = 0.5;
  double w = 0.1;
  double h = 0.1;
  Color color{};
  bool visible = true;

  [[nodiscard]] double left() const noexcept { return cx - 0.5 * w; }
  [[nodiscard]] double right() const noexcept { return cx + 0.5 * w; }
  [[nodiscard]] double top() const noexcept { return cy - 0.5 * h; }
  [[nodiscard]] double bottom() const noexcept { return cy + 0.5 * h; }
  [[nodiscard]] double area() const noexcept { return w * h; }

  friend bool operator==(const Component&, const Component&) = default;
};

/// Ordered component list; later components draw over earlier ones.
struct Layout {
  std::vector<Component> components;
  int canvas_width = kDefaultCanvasWidth;
  int canvas_height = kDefaultCanvasHeight;

  [[nodiscard]] std::size_t size() const noexcept { return components.size(); }

  friend bool operator==(const Layout&, const Layout&) = default;
};

/// Fixed-shape diffusion state: one row per component slot.
using LayoutTensor = Eigen::Matrix<double, kMaxComponents, kFeatureDim, Eigen::RowMajor>;

/// Throws Error naming the first offending field.
inline void validate(const Layout& layout) {
  if (layout.components.size() > static_cast<std::size_t>(kMaxComponents)) {
    throw Error("layout has " + std::to_string(layout.components.size()) + " components; at most " +
                    std::to_string(kMaxComponents) + " allowed",
                "components");
  }
  if (layout.canvas_width <= 0 || layout.canvas_height <= 0) throw Error("canvas size must be positive", "canvas");
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  for (std::size_t i = 0; i < layout.components.size(); ++i) {
    const auto& c = layout.components[i];
    const std::string path = "components[" + std::to_string(i) + "]";
    if (!in_unit(c.cx)) throw Error("cx must lie in [0,1]", path + ".cx");
    if (!in_unit(c.cy)) throw Error("cy must lie in [0,1]", path + ".cy");
    if (!in_unit(c.w) || (c.visible && c.w <= 0.0)) throw Error("w must lie in (0,1]", path + ".w");
    if (!in_unit(c.h) || (c.visible && c.h <= 0.0)) throw Error("h must lie in (0,1]", path + ".h");
    if (!in_unit(c.color.r) || !in_unit(c.color.g) || !in_unit(c.color.b)) {
      throw Error("color channels must lie in [0,1]", path + ".color");
    }
  }
}

[[nodiscard]] inline bool is_valid(const Layout& layout) {
  try {
    validate(layout);
    return true;
  } catch (const Error&) {
    return false;
  }
}

namespace detail {
constexpr double to_signed(double unit) noexcept { return 2.0 * unit - 1.0; }
constexpr double to_unit(double signed_value) noexcept { return 0.5 * (std::clamp(signed_value, -1.0, 1.0) + 1.0); }
}  // namespace detail

/// Affine map of every field into [-1, 1]. Unused slots get presence -1
/// and zeros elsewhere.
inline LayoutTensor encode(const Layout& layout) {
  if (layout.components.size() > static_cast<std::size_t>(kMaxComponents)) {
    throw Error("layout has more than " + std::to_string(kMaxComponents) + " components", "components");
  }
  LayoutTensor x = LayoutTensor::Zero();
  x.col(col::kPresence).setConstant(-1.0);
  for (std::size_t i = 0; i < layout.components.size(); ++i) {
    const auto& c = layout.components[i];
    const auto row = static_cast<Eigen::Index>(i);
    for (int k = 0; k < kNumTypes; ++k) x(row, col::kLogits + k) = -1.0;
    x(row, col::kLogits + static_cast<int>(c.type)) = 1.0;
    x(row, col::kCx) = detail::to_signed(c.cx);
    x(row, col::kCy) = detail::to_signed(c.cy);
    x(row, col::kW) = detail::to_signed(c.w);
    x(row, col::kH) = detail::to_signed(c.h);
    x(row, col::kR) = detail::to_signed(c.color.r);
    x(row, col::kG) = detail::to_signed(c.color.g);
    x(row, col::kB) = detail::to_signed(c.color.b);
    x(row, col::kPresence) = c.visible ? 1.0 : -1.0;
  }
  return x;
}

/// Argmax over the type slots; ties go to the lowest class id.
template <class Row>
ComponentType decode_type(const Row& row) {
  int best = 0;
  for (int k = 1; k < kNumTypes; ++k) {
    if (row(col::kLogits + k) > row(col::kLogits + best)) best = k;
  }
  return static_cast<ComponentType>(best);
}

/// Inverse of encode for arbitrary (e.g. sampled) tensors.
///
/// A row becomes a component when its presence flag is positive (visible)
/// or when some type slot is positive (an encoded invisible component).
/// Rows with neither are empty slots and are skipped, except that the first
/// `keep_rows` rows are always emitted so indices stay aligned with a
/// reference layout.
inline Layout decode(const LayoutTensor& x, std::size_t keep_rows = 0) {
  Layout out;
  for (int i = 0; i < kMaxComponents; ++i) {
    const auto row = x.row(i);
    const bool visible = row(col::kPresence) > 0.0;
    const bool typed = row.segment(col::kLogits, kNumTypes).maxCoeff() > 0.0;
    if (!visible && !typed && static_cast<std::size_t>(i) >= keep_rows) continue;
    Component c;
    c.type = decode_type(row);
    c.cx = detail::to_unit(row(col::kCx));
    c.cy = detail::to_unit(row(col::kCy));
    c.w = detail::to_unit(row(col::kW));
    c.h = detail::to_unit(row(col::kH));
    c.color = {detail::to_unit(row(col::kR)), detail::to_unit(row(col::kG)), detail::to_unit(row(col::kB))};
    c.visible = visible;
    if (visible) {
      c.w = std::max(c.w, kMinSize);
      c.h = std::max(c.h, kMinSize);
    }
    out.components.push_back(c);
  }
  return out;
}

/// Dynamic-shape entry point (e.g. tensors from files); checks the shape.
inline Layout decode(const Eigen::MatrixXd& x, std::size_t keep_rows = 0) {
  if (x.rows() != kMaxComponents || x.cols() != kFeatureDim) {
    throw Error("tensor shape " + std::to_string(x.rows()) + "x" + std::to_string(x.cols()) + " != " +
                std::to_string(kMaxComponents) + "x" + std::to_string(kFeatureDim));
  }
  return decode(LayoutTensor(x), keep_rows);
}

/// Drops invisible components.
inline Layout visible_only(Layout layout) {
  std::erase_if(layout.components, [](const Component& c) { return !c.visible; });
  return layout;
}

// ---------------------------------------------------------------------------
// Canonical JSON form

inline nlohmann::json to_json(const Layout& layout) {
  nlohmann::json comps = nlohmann::json::array();
  for (const auto& c : layout.components) {
    comps.push_back({{"type", std::string(to_string(c.type))},
                     {"cx", c.cx},
                     {"cy", c.cy},
                     {"w", c.w},
                     {"h", c.h},
                     {"color", {c.color.r, c.color.g, c.color.b}},
                     {"visible", c.visible}});
  }
  return {{"canvas", {layout.canvas_width, layout.canvas_height}}, {"components", std::move(comps)}};
}

namespace detail {
inline double number_at(const nlohmann::json& j, const char* key, const std::string& path) {
  if (!j.contains(key)) throw Error(std::string("missing field '") + key + "'", path + "." + key);
  const auto& v = j.at(key);
  if (!v.is_number()) throw Error(std::string("field '") + key + "' must be a number", path + "." + key);
  return v.get<double>();
}
}  // namespace detail

/// Parses and validates the canonical JSON form. `base` prefixes field paths
/// in error messages (e.g. "layout").
inline Layout layout_from_json(const nlohmann::json& j, const std::string& base = "") {
  const auto at = [&](const std::string& f) { return base.empty() ? f : base + "." + f; };
  if (!j.is_object()) throw Error("layout must be a JSON object", base);
  Layout out;
  if (j.contains("canvas")) {
    const auto& cv = j.at("canvas");
    if (!cv.is_array() || cv.size() != 2 || !cv[0].is_number_integer() || !cv[1].is_number_integer()) {
      throw Error("canvas must be [width, height]", at("canvas"));
    }
    out.canvas_width = cv[0].get<int>();
    out.canvas_height = cv[1].get<int>();
  }
  if (!j.contains("components") || !j.at("components").is_array()) {
    throw Error("components must be an array", at("components"));
  }
  const auto& arr = j.at("components");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const auto& cj = arr[i];
    const std::string path = at("components[" + std::to_string(i) + "]");
    if (!cj.is_object()) throw Error("component must be an object", path);
    Component c;
    if (!cj.contains("type") || !cj.at("type").is_string()) throw Error("missing component type", path + ".type");
    const auto type = parse_component_type(cj.at("type").get<std::string>());
    if (!type) throw Error("unknown component type '" + cj.at("type").get<std::string>() + "'", path + ".type");
    c.type = *type;
    c.cx = detail::number_at(cj, "cx", path);
    c.cy = detail::number_at(cj, "cy", path);
    c.w = detail::number_at(cj, "w", path);
    c.h = detail::number_at(cj, "h", path);
    if (!cj.contains("color") || !cj.at("color").is_array() || cj.at("color").size() != 3) {
      throw Error("color must be [r, g, b]", path + ".color");
    }
    for (const auto& ch : cj.at("color")) {
      if (!ch.is_number()) throw Error("color channels must be numbers", path + ".color");
    }
    c.color = {cj["color"][0].get<double>(), cj["color"][1].get<double>(), cj["color"][2].get<double>()};
    if (cj.contains("visible")) {
      if (!cj.at("visible").is_boolean()) throw Error("visible must be a boolean", path + ".visible");
      c.visible = cj.at("visible").get<bool>();
    }
    out.components.push_back(c);
  }
  try {
    validate(out);
  } catch (const Error& e) {
    throw Error(e.what(), at(e.field()));
  }
  return out;
}

}  // namespace layoutforge
