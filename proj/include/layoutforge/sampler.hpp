#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "layoutforge/condition.hpp"
#include "layoutforge/denoiser.hpp"
#include "layoutforge/diffusion.hpp"
#include "layoutforge/error.hpp"
#include "layoutforge/layout.hpp"
#include "layoutforge/rng.hpp"
#include "layoutforge/rules.hpp"

namespace layoutforge {

struct SamplerConfig {
  std::uint64_t seed = 0;
  int steps = 0;  // 0 = schedule length; otherwise must equal it
  std::optional<Condition> condition;
  int projection_every = 25;  // 0 disables design-rule projection
  RuleConfig rules{};
};

namespace detail {

inline void check_sampler(const SamplerConfig& cfg, const DenoiserParams& params, const DiffusionSchedule& sched) {
  if (cfg.steps != 0 && cfg.steps != sched.steps()) {
    throw ConfigError("sampler steps must equal the schedule length", "sampling.steps");
  }
  if (cfg.projection_every < 0) throw ConfigError("projection_every must be >= 0", "sampling.projection_every");
  if (params.steps == 0 || params.w1.size() == 0) throw Error("denoiser weights are missing", "weights");
  if (params.steps != sched.steps()) {
    throw ConfigError("weights were trained for T=" + std::to_string(params.steps) + " but the schedule has T=" +
                          std::to_string(sched.steps()),
                      "schedule.T");
  }
}

/// Projects the current x0 estimate and shifts x_{t-1} by the change,
/// scaled to the signal level of step t-1. Only the geometry of visible
/// slots is affected.
inline void project_state(LayoutTensor& x_prev, const LayoutTensor& xt, const LayoutTensor& eps_hat, int t,
                          const DiffusionSchedule& sched, const RuleConfig& rules, const std::vector<bool>& fixed) {
  const LayoutTensor x0_hat = predict_x0(xt, t, eps_hat, sched);
  const Layout before = decode(x0_hat, kMaxComponents);
  const Layout after = project(before, rules, fixed);
  const LayoutTensor delta = encode(after) - encode(before);
  const double scale = std::sqrt(sched.alpha_bar(t - 1));
  for (int i = 0; i < kMaxComponents; ++i) {
    if (!before.components[static_cast<std::size_t>(i)].visible) continue;
    for (int c : {col::kCx, col::kCy, col::kW, col::kH}) x_prev(i, c) += scale * delta(i, c);
  }
}

inline bool projection_due(int t, int steps, int every) {
  if (every <= 0 || t <= 1) return false;
  return (steps - t + 1) % every == 0;
}

}  // namespace detail

/// Raw reverse chain from pure noise; returns x0 before decoding.
inline LayoutTensor sample_tensor(const SamplerConfig& cfg, const DenoiserParams& params,
                                  const DiffusionSchedule& sched) {
  detail::check_sampler(cfg, params, sched);
  cfg.rules.validate();
  Rng rng(cfg.seed);
  const Eigen::VectorXd c =
      cfg.condition ? cfg.condition->encoded() : Eigen::VectorXd(Eigen::VectorXd::Zero(kConditionDim));
  LayoutTensor x = gaussian_like<LayoutTensor>(rng);
  const int T = sched.steps();
  return run_reverse_chain(
      x, T, sched, [&](const LayoutTensor& xt, int t) { return predict_eps(params, xt, t, c); }, rng,
      [&](int t, const LayoutTensor& xt, const LayoutTensor& eps_hat, LayoutTensor& x_prev) {
        if (detail::projection_due(t, T, cfg.projection_every)) {
          detail::project_state(x_prev, xt, eps_hat, t, sched, cfg.rules, {});
        }
      });
}

/// Generates a layout. Same (seed, config, weights, schedule) gives the same
/// result bit for bit.
inline Layout sample(const SamplerConfig& cfg, const DenoiserParams& params, const DiffusionSchedule& sched) {
  Layout out = visible_only(decode(sample_tensor(cfg, params, sched)));
  if (cfg.projection_every > 0) out = project(out, cfg.rules);
  return out;
}

/// Result of refine with the final tensor kept for inspection.
struct RefineResult {
  Layout layout;
  LayoutTensor x0;
};

/// Masked inpainting: regenerates everything except the pinned components.
///
/// The chain starts from a noised copy of `original` at t_start. After each
/// reverse step the pinned rows are overwritten with the original noised to
/// the new timestep, and with the original itself at t = 0.
inline RefineResult refine_detailed(const Layout& original, const std::set<std::size_t>& pinned,
                                    const SamplerConfig& cfg, int t_start, const DenoiserParams& params,
                                    const DiffusionSchedule& sched) {
  detail::check_sampler(cfg, params, sched);
  cfg.rules.validate();
  validate(original);
  for (auto i : pinned) {
    if (i >= original.size()) {
      throw Error("pinned index " + std::to_string(i) + " out of range (layout has " +
                      std::to_string(original.size()) + " components)",
                  "pinned");
    }
  }
  sched.check_timestep(t_start, "t_start");

  std::vector<bool> fixed(kMaxComponents, false);
  for (auto i : pinned) fixed[i] = true;

  Rng rng(cfg.seed);
  const Eigen::VectorXd c =
      cfg.condition ? cfg.condition->encoded() : Eigen::VectorXd(Eigen::VectorXd::Zero(kConditionDim));
  const LayoutTensor x0 = encode(original);
  const LayoutTensor start = forward_sample(x0, t_start, gaussian_like<LayoutTensor>(rng), sched);
  const int T = sched.steps();

  const LayoutTensor result = run_reverse_chain(
      start, t_start, sched, [&](const LayoutTensor& xt, int t) { return predict_eps(params, xt, t, c); }, rng,
      [&](int t, const LayoutTensor& xt, const LayoutTensor& eps_hat, LayoutTensor& x_prev) {
        if (detail::projection_due(t, T, cfg.projection_every)) {
          detail::project_state(x_prev, xt, eps_hat, t, sched, cfg.rules, fixed);
        }
        for (auto i : pinned) {
          const auto row = static_cast<Eigen::Index>(i);
          Eigen::RowVectorXd noise(kFeatureDim);
          for (int k = 0; k < kFeatureDim; ++k) noise(k) = rng.normal();
          x_prev.row(row) = forward_sample(x0.row(row), t - 1, noise, sched);
        }
      });

  // The output keeps the original's slots; empty slots past its end stay empty.
  Layout out = decode(result, original.size());
  out.components.resize(original.size());
  out.canvas_width = original.canvas_width;
  out.canvas_height = original.canvas_height;
  if (cfg.projection_every > 0) out = project(out, cfg.rules, fixed);
  return {std::move(out), result};
}

inline Layout refine(const Layout& original, const std::set<std::size_t>& pinned, const SamplerConfig& cfg,
                     int t_start, const DenoiserParams& params, const DiffusionSchedule& sched) {
  return refine_detailed(original, pinned, cfg, t_start, params, sched).layout;
}

}  // namespace layoutforge
