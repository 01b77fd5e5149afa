#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <utility>
#include <vector>

#include <json.hpp>

#include "layoutforge/error.hpp"
#include "layoutforge/layout.hpp"

namespace layoutforge {

/// Design-rule tolerances, in canvas units unless noted.
struct RuleConfig {
  double tau_align = 0.01;  // edges closer than this count as aligned
  double tau_snap = 0.02;   // snap radius used by project()
  double g_min = 0.01;      // minimum gap between components
  double hue_sigma = 60.0;  // degrees

  void validate() const {
    if (!(tau_align > 0.0)) throw ConfigError("tau_align must be positive", "rules.tau_align");
    if (!(tau_snap > 0.0)) throw ConfigError("tau_snap must be positive", "rules.tau_snap");
    if (!(g_min > 0.0)) throw ConfigError("g_min must be positive", "rules.g_min");
    if (!(hue_sigma > 0.0)) throw ConfigError("hue_sigma must be positive", "rules.hue_sigma");
    if (tau_align > tau_snap) throw ConfigError("tau_align must not exceed tau_snap", "rules.tau_align");
  }
};

/// Slack for floating-point comparisons against gap and canvas bounds.
inline constexpr double kRuleSlack = 1e-9;

/// Components the alignment and spacing rules apply to.
inline bool rule_participant(const Component& c) { return c.visible && c.type != ComponentType::background; }

inline std::vector<std::size_t> rule_participants(const Layout& layout) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < layout.components.size(); ++i) {
    if (rule_participant(layout.components[i])) idx.push_back(i);
  }
  return idx;
}

enum class Edge : int { left = 0, right, cx, top, bottom, cy };
inline constexpr std::array<Edge, 6> kEdges = {Edge::left, Edge::right, Edge::cx, Edge::top, Edge::bottom, Edge::cy};

inline double edge_value(const Component& c, Edge e) {
  switch (e) {
    case Edge::left: return c.left();
    case Edge::right: return c.right();
    case Edge::cx: return c.cx;
    case Edge::top: return c.top();
    case Edge::bottom: return c.bottom();
    case Edge::cy: return c.cy;
  }
  return 0.0;
}

/// Number of aligned relations each component takes part in.
inline std::vector<int> alignment_matches(const Layout& layout, const RuleConfig& cfg = {}) {
  std::vector<int> matches(layout.components.size(), 0);
  const auto idx = rule_participants(layout);
  for (std::size_t a = 0; a < idx.size(); ++a) {
    for (std::size_t b = a + 1; b < idx.size(); ++b) {
      const auto& ca = layout.components[idx[a]];
      const auto& cb = layout.components[idx[b]];
      for (Edge e : kEdges) {
        if (std::abs(edge_value(ca, e) - edge_value(cb, e)) < cfg.tau_align) {
          ++matches[idx[a]];
          ++matches[idx[b]];
        }
      }
    }
  }
  return matches;
}

/// Fraction of matched edge relations over all pairs; 1.0 with < 2 participants.
inline double alignment_score(const Layout& layout, const RuleConfig& cfg = {}) {
  const auto idx = rule_participants(layout);
  if (idx.size() < 2) return 1.0;
  std::size_t matched = 0;
  for (std::size_t a = 0; a < idx.size(); ++a) {
    for (std::size_t b = a + 1; b < idx.size(); ++b) {
      for (Edge e : kEdges) {
        if (std::abs(edge_value(layout.components[idx[a]], e) - edge_value(layout.components[idx[b]], e)) <
            cfg.tau_align) {
          ++matched;
        }
      }
    }
  }
  const std::size_t total = kEdges.size() * idx.size() * (idx.size() - 1) / 2;
  return static_cast<double>(matched) / static_cast<double>(total);
}

/// Separation of two boxes along their axis of separation; negative when
/// they overlap.
inline double box_gap(const Component& a, const Component& b) {
  const double gx = std::max(a.left() - b.right(), b.left() - a.right());
  const double gy = std::max(a.top() - b.bottom(), b.top() - a.bottom());
  return std::max(gx, gy);
}

inline bool spacing_conflict(const Component& a, const Component& b, const RuleConfig& cfg) {
  return box_gap(a, b) < cfg.g_min - kRuleSlack;
}

inline bool outside_canvas(const Component& c) {
  return c.left() < -kRuleSlack || c.right() > 1.0 + kRuleSlack || c.top() < -kRuleSlack ||
         c.bottom() > 1.0 + kRuleSlack;
}

/// Overlapping or too-close pairs plus components leaving the canvas.
inline int spacing_violations(const Layout& layout, const RuleConfig& cfg = {}) {
  const auto idx = rule_participants(layout);
  int count = 0;
  for (std::size_t a = 0; a < idx.size(); ++a) {
    if (outside_canvas(layout.components[idx[a]])) ++count;
    for (std::size_t b = a + 1; b < idx.size(); ++b) {
      if (spacing_conflict(layout.components[idx[a]], layout.components[idx[b]], cfg)) ++count;
    }
  }
  return count;
}

struct Hsv {
  double hue = 0.0;  // degrees in [0, 360)
  double saturation = 0.0;
  double value = 0.0;
};

inline Hsv to_hsv(const Color& c) {
  const double mx = std::max({c.r, c.g, c.b});
  const double mn = std::min({c.r, c.g, c.b});
  const double delta = mx - mn;
  Hsv out;
  out.value = mx;
  out.saturation = mx > 0.0 ? delta / mx : 0.0;
  if (delta <= 0.0) return out;
  double h;
  if (mx == c.r) {
    h = std::fmod((c.g - c.b) / delta, 6.0);
  } else if (mx == c.g) {
    h = (c.b - c.r) / delta + 2.0;
  } else {
    h = (c.r - c.g) / delta + 4.0;
  }
  h *= 60.0;
  if (h < 0.0) h += 360.0;
  out.hue = h;
  return out;
}

inline double hue_distance(double a, double b) {
  const double d = std::fmod(std::abs(a - b), 360.0);
  return std::min(d, 360.0 - d);
}

/// exp(-mean pairwise hue distance / hue_sigma) over saturated visible components.
inline double harmony(const Layout& layout, const RuleConfig& cfg = {}) {
  std::vector<double> hues;
  for (const auto& c : layout.components) {
    if (!c.visible) continue;
    const auto hsv = to_hsv(c.color);
    if (hsv.saturation > 0.1) hues.push_back(hsv.hue);
  }
  if (hues.size() < 2) return 1.0;
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < hues.size(); ++a) {
    for (std::size_t b = a + 1; b < hues.size(); ++b) {
      sum += hue_distance(hues[a], hues[b]);
      ++pairs;
    }
  }
  return std::exp(-(sum / static_cast<double>(pairs)) / cfg.hue_sigma);
}

// ---------------------------------------------------------------------------
// Differentiable penalty on a tensor estimate of x0

namespace detail {
/// C1 step from 0 (p <= 0) to 1 (p >= 1); exactly zero for absent slots.
inline double presence_gate(double p) {
  if (p <= 0.0) return 0.0;
  if (p >= 1.0) return 1.0;
  return p * p * (3.0 - 2.0 * p);
}
inline double presence_gate_grad(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return 6.0 * p * (1.0 - p);
}
}  // namespace detail

struct PenaltyResult {
  double value = 0.0;
  LayoutTensor grad = LayoutTensor::Zero();
};

/// R(x) = sum over gated non-background pairs of (overlap_x * overlap_y)^2
///      + sum over gated non-background slots of squared canvas excursions.
///
/// Geometry is read with the unclamped inverse affine map so the gradient
/// stays informative outside the canvas. Component type (argmax) is treated
/// as piecewise constant.
inline PenaltyResult penalty_with_grad(const LayoutTensor& x) {
  struct Box {
    double l, r, t, b, gate;
    bool active;
  };
  // Unit-space gradient per slot: d/dcx, d/dcy, d/dw, d/dh, d/dpresence.
  std::array<std::array<double, 5>, kMaxComponents> g{};
  std::array<Box, kMaxComponents> boxes{};
  for (int i = 0; i < kMaxComponents; ++i) {
    const auto row = x.row(i);
    const double cx = 0.5 * (row(col::kCx) + 1.0);
    const double cy = 0.5 * (row(col::kCy) + 1.0);
    const double w = 0.5 * (row(col::kW) + 1.0);
    const double h = 0.5 * (row(col::kH) + 1.0);
    const double gate = detail::presence_gate(row(col::kPresence));
    const bool active = gate > 0.0 && decode_type(row) != ComponentType::background;
    boxes[static_cast<std::size_t>(i)] = {cx - 0.5 * w, cx + 0.5 * w, cy - 0.5 * h, cy + 0.5 * h, gate, active};
  }

  // Chain rule from edge gradients to (cx, w) or (cy, h).
  auto add_edge = [&g](int i, double d_low, double d_high, int center, int size) {
    auto& gi = g[static_cast<std::size_t>(i)];
    gi[static_cast<std::size_t>(center)] += d_low + d_high;
    gi[static_cast<std::size_t>(size)] += 0.5 * (d_high - d_low);
  };

  double value = 0.0;
  for (int i = 0; i < kMaxComponents; ++i) {
    const auto& bi = boxes[static_cast<std::size_t>(i)];
    if (!bi.active) continue;
    for (int j = i + 1; j < kMaxComponents; ++j) {
      const auto& bj = boxes[static_cast<std::size_t>(j)];
      if (!bj.active) continue;
      const double ox = std::min(bi.r, bj.r) - std::max(bi.l, bj.l);
      const double oy = std::min(bi.b, bj.b) - std::max(bi.t, bj.t);
      if (ox <= 0.0 || oy <= 0.0) continue;
      const double area = ox * oy;
      const double gates = bi.gate * bj.gate;
      value += gates * area * area;
      const double d_ox = gates * 2.0 * area * oy;
      const double d_oy = gates * 2.0 * area * ox;
      // d ox / d edges: +1 on the smaller right edge, -1 on the larger left edge.
      const int r_owner = bi.r <= bj.r ? i : j;
      const int l_owner = bi.l >= bj.l ? i : j;
      add_edge(r_owner, 0.0, d_ox, 0, 2);
      add_edge(l_owner, -d_ox, 0.0, 0, 2);
      const int b_owner = bi.b <= bj.b ? i : j;
      const int t_owner = bi.t >= bj.t ? i : j;
      add_edge(b_owner, 0.0, d_oy, 1, 3);
      add_edge(t_owner, -d_oy, 0.0, 1, 3);
      g[static_cast<std::size_t>(i)][4] += bj.gate * area * area * detail::presence_gate_grad(x(i, col::kPresence));
      g[static_cast<std::size_t>(j)][4] += bi.gate * area * area * detail::presence_gate_grad(x(j, col::kPresence));
    }
  }

  for (int i = 0; i < kMaxComponents; ++i) {
    const auto& bi = boxes[static_cast<std::size_t>(i)];
    if (!bi.active) continue;
    const double el = std::max(0.0, -bi.l);
    const double er = std::max(0.0, bi.r - 1.0);
    const double et = std::max(0.0, -bi.t);
    const double eb = std::max(0.0, bi.b - 1.0);
    const double excursion = el * el + er * er + et * et + eb * eb;
    if (excursion <= 0.0) continue;
    value += bi.gate * excursion;
    add_edge(i, -2.0 * el * bi.gate, 2.0 * er * bi.gate, 0, 2);
    add_edge(i, -2.0 * et * bi.gate, 2.0 * eb * bi.gate, 1, 3);
    g[static_cast<std::size_t>(i)][4] += excursion * detail::presence_gate_grad(x(i, col::kPresence));
  }

  PenaltyResult out;
  out.value = value;
  for (int i = 0; i < kMaxComponents; ++i) {
    const auto& gi = g[static_cast<std::size_t>(i)];
    // Unit-space fields are (v + 1) / 2 of tensor entries.
    out.grad(i, col::kCx) = 0.5 * gi[0];
    out.grad(i, col::kCy) = 0.5 * gi[1];
    out.grad(i, col::kW) = 0.5 * gi[2];
    out.grad(i, col::kH) = 0.5 * gi[3];
    out.grad(i, col::kPresence) = gi[4];
  }
  return out;
}

inline double penalty(const LayoutTensor& x) { return penalty_with_grad(x).value; }

// ---------------------------------------------------------------------------
// Projection

namespace detail {

/// Nudges `center` and `extent` by a few ulps so that the edge
/// center + sign * extent / 2 equals `target` exactly when reachable, keeping
/// the opposite edge as close as possible to where it was.
inline void settle_edge(double& center, double& extent, double target, double sign) {
  if (center + sign * 0.5 * extent == target) return;
  const double opposite = center - sign * 0.5 * extent;
  double best_c = center, best_e = extent, best_err = HUGE_VAL;
  double c0 = center;
  for (int i = 0; i < 4; ++i) c0 = std::nextafter(c0, -HUGE_VAL);
  for (int i = 0; i < 9; ++i, c0 = std::nextafter(c0, HUGE_VAL)) {
    double e0 = extent;
    for (int j = 0; j < 4; ++j) e0 = std::nextafter(e0, -HUGE_VAL);
    for (int j = 0; j < 9; ++j, e0 = std::nextafter(e0, HUGE_VAL)) {
      if (c0 + sign * 0.5 * e0 != target) continue;
      const double err = std::abs((c0 - sign * 0.5 * e0) - opposite);
      if (err < best_err) best_c = c0, best_e = e0, best_err = err;
    }
  }
  center = best_c;
  extent = best_e;
}

inline void set_edge(Component& c, Edge e, double v) {
  switch (e) {
    case Edge::left: {
      const double r = c.right();
      const double l = std::min(v, r - kMinSize);
      c.w = r - l;
      c.cx = 0.5 * (l + r);
      settle_edge(c.cx, c.w, l, -1.0);
      break;
    }
    case Edge::right: {
      const double l = c.left();
      const double r = std::max(v, l + kMinSize);
      c.w = r - l;
      c.cx = 0.5 * (l + r);
      settle_edge(c.cx, c.w, r, 1.0);
      break;
    }
    case Edge::cx: c.cx = v; break;
    case Edge::top: {
      const double b = c.bottom();
      const double t = std::min(v, b - kMinSize);
      c.h = b - t;
      c.cy = 0.5 * (t + b);
      settle_edge(c.cy, c.h, t, -1.0);
      break;
    }
    case Edge::bottom: {
      const double t = c.top();
      const double b = std::max(v, t + kMinSize);
      c.h = b - t;
      c.cy = 0.5 * (t + b);
      settle_edge(c.cy, c.h, b, 1.0);
      break;
    }
    case Edge::cy: c.cy = v; break;
  }
}

inline bool is_fixed(const std::vector<bool>& fixed, std::size_t i) { return i < fixed.size() && fixed[i]; }

/// Collapses single-linkage clusters of one edge family to their mean (or
/// to a fixed member's value).
inline Layout snap_family(const Layout& in, Edge e, const RuleConfig& cfg, const std::vector<bool>& fixed) {
  Layout out = in;
  auto idx = rule_participants(in);
  std::vector<std::pair<double, std::size_t>> vals;
  vals.reserve(idx.size());
  for (auto i : idx) vals.emplace_back(edge_value(in.components[i], e), i);
  std::sort(vals.begin(), vals.end());
  std::size_t start = 0;
  while (start < vals.size()) {
    std::size_t end = start + 1;
    while (end < vals.size() && vals[end].first - vals[end - 1].first <= cfg.tau_snap) ++end;
    if (end - start >= 2) {
      // Fixed members dictate the target; if they disagree the cluster is left alone.
      std::vector<double> pinned_values;
      for (std::size_t k = start; k < end; ++k) {
        if (is_fixed(fixed, vals[k].second)) pinned_values.push_back(vals[k].first);
      }
      double target = 0.0;
      bool usable = true;
      if (pinned_values.empty()) {
        double sum = 0.0;
        for (std::size_t k = start; k < end; ++k) sum += vals[k].first;
        target = sum / static_cast<double>(end - start);
      } else {
        target = pinned_values.front();
        usable = std::all_of(pinned_values.begin(), pinned_values.end(), [&](double v) { return v == target; });
      }
      if (usable) {
        for (std::size_t k = start; k < end; ++k) {
          if (!is_fixed(fixed, vals[k].second)) set_edge(out.components[vals[k].second], e, target);
        }
      }
    }
    start = end;
  }
  return out;
}

/// Pass 1: per edge family, snap; a family's snap is kept only if it does
/// not lower the alignment score.
inline Layout snap_pass(const Layout& in, const RuleConfig& cfg, const std::vector<bool>& fixed) {
  Layout cur = in;
  double score = alignment_score(cur, cfg);
  for (Edge e : kEdges) {
    Layout next = snap_family(cur, e, cfg, fixed);
    const double next_score = alignment_score(next, cfg);
    if (next_score >= score) {
      cur = std::move(next);
      score = next_score;
    }
  }
  return cur;
}

/// Moves `mover` away from `anchor` by the smallest of the four axis-aligned
/// translations leaving a gap of exactly g_min. Translations that keep the
/// mover inside the canvas are preferred.
inline void separate(Component& mover, const Component& anchor, double g_min) {
  const double moves[4][2] = {{(anchor.right() + g_min) - mover.left(), 0.0},
                              {(anchor.left() - g_min) - mover.right(), 0.0},
                              {0.0, (anchor.bottom() + g_min) - mover.top()},
                              {0.0, (anchor.top() - g_min) - mover.bottom()}};
  int best = -1;
  bool best_inside = false;
  double best_len = 0.0;
  for (int k = 0; k < 4; ++k) {
    Component moved = mover;
    moved.cx += moves[k][0];
    moved.cy += moves[k][1];
    const bool inside = !outside_canvas(moved);
    const double len = std::abs(moves[k][0]) + std::abs(moves[k][1]);
    if (best < 0 || (inside && !best_inside) || (inside == best_inside && len < best_len)) {
      best = k;
      best_inside = inside;
      best_len = len;
    }
  }
  mover.cx += moves[best][0];
  mover.cy += moves[best][1];
}

/// Pass 2: resolve violating pairs in ascending (i, j) order by moving the
/// higher-index component (or the other one if that is fixed).
inline Layout overlap_pass(const Layout& in, const RuleConfig& cfg, const std::vector<bool>& fixed) {
  Layout out = in;
  const auto idx = rule_participants(in);
  for (std::size_t a = 0; a < idx.size(); ++a) {
    for (std::size_t b = a + 1; b < idx.size(); ++b) {
      const std::size_t i = idx[a];
      const std::size_t j = idx[b];
      auto& ci = out.components[i];
      auto& cj = out.components[j];
      if (!spacing_conflict(ci, cj, cfg)) continue;
      if (!is_fixed(fixed, j)) {
        separate(cj, ci, cfg.g_min);
      } else if (!is_fixed(fixed, i)) {
        separate(ci, cj, cfg.g_min);
      }
    }
  }
  return out;
}

/// Pass 3: shrink oversize boxes to the canvas and translate them inside.
inline Layout clamp_pass(const Layout& in, const std::vector<bool>& fixed) {
  Layout out = in;
  for (std::size_t i = 0; i < out.components.size(); ++i) {
    auto& c = out.components[i];
    if (!c.visible || is_fixed(fixed, i)) continue;
    c.w = std::min(c.w, 1.0);
    c.h = std::min(c.h, 1.0);
    if (c.left() < 0.0) c.cx = 0.5 * c.w;
    if (c.right() > 1.0) c.cx = 1.0 - 0.5 * c.w;
    if (c.top() < 0.0) c.cy = 0.5 * c.h;
    if (c.bottom() > 1.0) c.cy = 1.0 - 0.5 * c.h;
  }
  return out;
}

inline double geometry_distance(const Layout& a, const Layout& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.components.size(); ++i) {
    const auto& x = a.components[i];
    const auto& y = b.components[i];
    d = std::max({d, std::abs(x.cx - y.cx), std::abs(x.cy - y.cy), std::abs(x.w - y.w), std::abs(x.h - y.h)});
  }
  return d;
}

}  // namespace detail

inline constexpr int kProjectionMaxRounds = 64;

/// Snap-only projection (pass 1 alone).
inline Layout snap(const Layout& layout, const RuleConfig& cfg = {}) { return detail::snap_pass(layout, cfg, {}); }

/// Deterministic design-rule repair: snap, overlap resolution, canvas clamp.
///
/// The three passes are repeated until they no longer move anything. The
/// result is therefore a fixed point of the passes, which makes the
/// projection idempotent. If no fixed point is reached within
/// kProjectionMaxRounds rounds, or the repair would increase the number of
/// spacing violations, the input is returned unchanged.
///
/// Components flagged in `fixed` are never moved; other components snap to
/// them and are pushed away from them.
inline Layout project(const Layout& layout, const RuleConfig& cfg = {}, const std::vector<bool>& fixed = {}) {
  Layout cur = layout;
  bool converged = false;
  for (int round = 0; round < kProjectionMaxRounds; ++round) {
    Layout next =
        detail::clamp_pass(detail::overlap_pass(detail::snap_pass(cur, cfg, fixed), cfg, fixed), fixed);
    const double moved = detail::geometry_distance(cur, next);
    cur = std::move(next);
    if (moved <= 1e-12) {
      converged = true;
      break;
    }
  }
  if (!converged) return layout;
  if (spacing_violations(cur, cfg) > spacing_violations(layout, cfg)) return layout;
  return cur;
}

// ---------------------------------------------------------------------------

struct RuleReport {
  double alignment_score = 1.0;
  int spacing_violations = 0;
  double harmony = 1.0;
  double penalty = 0.0;

  friend bool operator==(const RuleReport&, const RuleReport&) = default;
};

inline RuleReport rule_report(const Layout& layout, const RuleConfig& cfg = {}) {
  return {alignment_score(layout, cfg), spacing_violations(layout, cfg), harmony(layout, cfg),
          penalty(encode(layout))};
}

inline nlohmann::json to_json(const RuleReport& r) {
  return {{"alignment_score", r.alignment_score},
          {"spacing_violations", r.spacing_violations},
          {"harmony", r.harmony},
          {"penalty", r.penalty}};
}

}  // namespace layoutforge
