#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "layoutforge/condition.hpp"
#include "layoutforge/denoiser.hpp"
#include "layoutforge/diffusion.hpp"
#include "layoutforge/error.hpp"
#include "layoutforge/layout.hpp"
#include "layoutforge/rng.hpp"
#include "layoutforge/rules.hpp"

namespace layoutforge {

struct TrainConfig {
  int epochs = 30;
  int batch_size = 64;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double condition_dropout_p = 0.1;
  double design_penalty_lambda = 0.1;
  std::uint64_t seed = 0;

  void validate() const {
    if (epochs < 0) throw ConfigError("epochs must be >= 0", "train.epochs");
    if (batch_size < 1) throw ConfigError("batch_size must be positive", "train.batch_size");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive", "train.learning_rate");
    if (!(beta1 > 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must lie in (0,1)", "train.beta1");
    if (!(beta2 > 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must lie in (0,1)", "train.beta2");
    if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive", "train.epsilon");
    if (!(condition_dropout_p >= 0.0 && condition_dropout_p <= 1.0)) {
      throw ConfigError("condition_dropout_p must lie in [0,1]", "train.condition_dropout_p");
    }
    if (!(design_penalty_lambda >= 0.0)) {
      throw ConfigError("design_penalty_lambda must be >= 0", "train.design_penalty_lambda");
    }
  }
};

inline nlohmann::json to_json(const TrainConfig& t) {
  return {{"epochs", t.epochs},
          {"batch_size", t.batch_size},
          {"learning_rate", t.learning_rate},
          {"beta1", t.beta1},
          {"beta2", t.beta2},
          {"epsilon", t.epsilon},
          {"condition_dropout_p", t.condition_dropout_p},
          {"design_penalty_lambda", t.design_penalty_lambda},
          {"seed", t.seed}};
}

/// One (x0, c) training pair in tensor form.
struct TrainingExample {
  LayoutTensor x0;
  Eigen::VectorXd condition;  // length kConditionDim
};

inline TrainingExample make_example(const Layout& layout, const Condition& condition) {
  return {encode(layout), condition.encoded()};
}

/// Random quantities of one minibatch: timesteps, noise, noised inputs and
/// (possibly dropped) conditions.
struct TrainingDraw {
  std::vector<int> t;
  Eigen::MatrixXd eps;   // (B*16) x D
  Eigen::MatrixXd xt;    // (B*16) x D
  Eigen::MatrixXd cond;  // B x kConditionDim
};

/// Per example, in order: t ~ U{1..T}, eps ~ N(0, I), dropout coin.
inline TrainingDraw draw_training_batch(std::span<const TrainingExample> batch, const DiffusionSchedule& sched,
                                        double condition_dropout_p, Rng& rng) {
  const auto n = static_cast<Eigen::Index>(batch.size());
  TrainingDraw d;
  d.t.resize(batch.size());
  d.eps.resize(n * kMaxComponents, kFeatureDim);
  d.xt.resize(n * kMaxComponents, kFeatureDim);
  d.cond.resize(n, kConditionDim);
  for (Eigen::Index b = 0; b < n; ++b) {
    const auto& ex = batch[static_cast<std::size_t>(b)];
    const int t = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(sched.steps())));
    const LayoutTensor eps = gaussian_like<LayoutTensor>(rng);
    const bool drop = rng.bernoulli(condition_dropout_p);
    d.t[static_cast<std::size_t>(b)] = t;
    d.eps.middleRows(b * kMaxComponents, kMaxComponents) = eps;
    d.xt.middleRows(b * kMaxComponents, kMaxComponents) = forward_sample(ex.x0, t, eps, sched);
    if (drop) {
      d.cond.row(b).setZero();
    } else {
      d.cond.row(b) = ex.condition.transpose();
    }
  }
  return d;
}

struct ObjectiveResult {
  double loss = 0.0;
  Eigen::MatrixXd d_eps_hat;  // dLoss / d(prediction)
};

/// Batch mean of ||eps - eps_hat||^2 + lambda * R(x0_hat), with
/// x0_hat = (x_t - sqrt(1 - abar_t) eps_hat) / sqrt(abar_t).
inline ObjectiveResult training_objective(const TrainingDraw& d, const Eigen::MatrixXd& eps_hat,
                                          const DiffusionSchedule& sched, double lambda) {
  const auto n = static_cast<Eigen::Index>(d.t.size());
  ObjectiveResult out;
  out.d_eps_hat.resize(eps_hat.rows(), eps_hat.cols());
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Eigen::Index b = 0; b < n; ++b) {
    const auto rows = [&](const Eigen::MatrixXd& m) { return m.middleRows(b * kMaxComponents, kMaxComponents); };
    const Eigen::MatrixXd diff = rows(d.eps) - rows(eps_hat);
    double loss = diff.squaredNorm();
    Eigen::MatrixXd grad = -2.0 * diff;
    if (lambda > 0.0) {
      const int t = d.t[static_cast<std::size_t>(b)];
      const LayoutTensor x0_hat = predict_x0(LayoutTensor(rows(d.xt)), t, LayoutTensor(rows(eps_hat)), sched);
      const auto pen = penalty_with_grad(x0_hat);
      loss += lambda * pen.value;
      const double ab = sched.alpha_bar(t);
      grad += (lambda * -std::sqrt(1.0 - ab) / std::sqrt(ab)) * pen.grad;
    }
    out.loss += loss * inv_n;
    out.d_eps_hat.middleRows(b * kMaxComponents, kMaxComponents) = grad * inv_n;
  }
  return out;
}

struct LossAndGrad {
  double loss = 0.0;
  DenoiserParams grads;
};

/// Loss and exact gradient for a fixed draw.
inline LossAndGrad loss_and_grad(const DenoiserParams& params, const TrainingDraw& draw,
                                 const DiffusionSchedule& sched, double lambda) {
  ForwardCache cache;
  const Eigen::MatrixXd eps_hat = denoiser_forward(params, draw.xt, draw.t, draw.cond, &cache);
  auto obj = training_objective(draw, eps_hat, sched, lambda);
  LossAndGrad out{obj.loss, DenoiserParams::zeros(params.dims, params.steps)};
  denoiser_backward(params, cache, obj.d_eps_hat, out.grads);
  return out;
}

/// Draws the batch's randomness from `rng`, then differentiates.
inline LossAndGrad loss_and_grad(const DenoiserParams& params, std::span<const TrainingExample> batch,
                                 const DiffusionSchedule& sched, const TrainConfig& cfg, Rng& rng) {
  if (batch.empty()) throw Error("batch must be nonempty");
  const auto draw = draw_training_batch(batch, sched, cfg.condition_dropout_p, rng);
  return loss_and_grad(params, draw, sched, cfg.design_penalty_lambda);
}

/// Loss only, for finite-difference checks.
inline double training_loss(const DenoiserParams& params, const TrainingDraw& draw, const DiffusionSchedule& sched,
                            double lambda) {
  const Eigen::MatrixXd eps_hat = denoiser_forward(params, draw.xt, draw.t, draw.cond);
  return training_objective(draw, eps_hat, sched, lambda).loss;
}

/// Adaptive-moment optimizer with bias correction.
class Adam {
 public:
  Adam(const DenoiserParams& shape, const TrainConfig& cfg)
      : cfg_(cfg),
        m_(DenoiserParams::zeros(shape.dims, shape.steps)),
        v_(DenoiserParams::zeros(shape.dims, shape.steps)) {}

  void step(DenoiserParams& params, const DenoiserParams& grads) {
    ++t_;
    const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    auto p = params.tensors();
    auto g = grads.tensors();
    auto m = m_.tensors();
    auto v = v_.tensors();
    for (std::size_t k = 0; k < p.size(); ++k) {
      *m[k] = cfg_.beta1 * *m[k] + (1.0 - cfg_.beta1) * *g[k];
      *v[k] = cfg_.beta2 * *v[k] + (1.0 - cfg_.beta2) * g[k]->cwiseAbs2();
      p[k]->array() -= cfg_.learning_rate * (m[k]->array() / c1) / ((v[k]->array() / c2).sqrt() + cfg_.epsilon);
    }
  }

  [[nodiscard]] long steps_taken() const noexcept { return t_; }

 private:
  TrainConfig cfg_;
  DenoiserParams m_;
  DenoiserParams v_;
  long t_ = 0;
};

using EpochCallback = std::function<void(int epoch, double mean_loss)>;

// Substream labels.
inline constexpr std::uint64_t kStreamInit = 1;
inline constexpr std::uint64_t kStreamShuffle = 2;
inline constexpr std::uint64_t kStreamDraws = 3;

/// Minibatch training. Deterministic given (cfg.seed, example order, cfg).
inline DenoiserParams train(std::span<const TrainingExample> data, const TrainConfig& cfg,
                            const DiffusionSchedule& sched, const DenoiserDims& dims = {},
                            const EpochCallback& on_epoch = {}) {
  cfg.validate();
  if (data.empty()) throw DataError("training set is empty", "corpus");
  const Rng root(cfg.seed);
  DenoiserParams params = DenoiserParams::initialize(dims, sched.steps(), derive_seed(cfg.seed, kStreamInit));
  Adam adam(params, cfg);
  Rng shuffle_rng = root.substream(kStreamShuffle);
  Rng draw_rng = root.substream(kStreamDraws);
  std::vector<std::size_t> order(data.size());
  std::vector<TrainingExample> batch;
  batch.reserve(static_cast<std::size_t>(cfg.batch_size));

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_rng.shuffle(order.begin(), order.end());
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      batch.clear();
      for (std::size_t k = start; k < end; ++k) batch.push_back(data[order[k]]);
      const auto lg = loss_and_grad(params, batch, sched, cfg, draw_rng);
      if (!std::isfinite(lg.loss) || !lg.grads.all_finite()) {
        throw Error("non-finite loss or gradient at epoch " + std::to_string(epoch));
      }
      adam.step(params, lg.grads);
      loss_sum += lg.loss * static_cast<double>(end - start);
      seen += end - start;
    }
    if (on_epoch) on_epoch(epoch, loss_sum / static_cast<double>(seen));
  }
  return params;
}

}  // namespace layoutforge
