#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "layoutforge/error.hpp"
#include "layoutforge/rng.hpp"

namespace layoutforge {

/// Noise schedule. Timesteps are 1-based: t = 1..T.
class DiffusionSchedule {
 public:
  /// Linear beta schedule from beta_start to beta_end inclusive.
  static DiffusionSchedule linear(int steps, double beta_start, double beta_end) {
    if (steps < 1) throw ConfigError("schedule needs at least one step", "schedule.T");
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0)) {
      throw ConfigError("need 0 < beta_start <= beta_end < 1", "schedule.beta_start");
    }
    std::vector<double> betas(static_cast<std::size_t>(steps));
    for (int i = 0; i < steps; ++i) {
      const double frac = steps == 1 ? 0.0 : static_cast<double>(i) / (steps - 1);
      betas[static_cast<std::size_t>(i)] = beta_start + frac * (beta_end - beta_start);
    }
    return DiffusionSchedule(std::move(betas));
  }

  /// Arbitrary betas, each in (0, 1).
  explicit DiffusionSchedule(std::vector<double> betas) : beta_(std::move(betas)) {
    if (beta_.empty()) throw ConfigError("schedule needs at least one step", "schedule.T");
    alpha_.resize(beta_.size());
    alpha_bar_.resize(beta_.size());
    double prod = 1.0;
    for (std::size_t i = 0; i < beta_.size(); ++i) {
      if (!(beta_[i] > 0.0 && beta_[i] < 1.0)) throw ConfigError("every beta must lie in (0,1)", "schedule.beta");
      alpha_[i] = 1.0 - beta_[i];
      prod *= alpha_[i];
      alpha_bar_[i] = prod;
    }
  }

  [[nodiscard]] int steps() const noexcept { return static_cast<int>(beta_.size()); }
  [[nodiscard]] double beta(int t) const { return beta_[index(t)]; }
  [[nodiscard]] double alpha(int t) const { return alpha_[index(t)]; }
  /// Cumulative product; alpha_bar(0) = 1 by convention.
  [[nodiscard]] double alpha_bar(int t) const { return t == 0 ? 1.0 : alpha_bar_[index(t)]; }

  [[nodiscard]] const std::vector<double>& betas() const noexcept { return beta_; }

  void check_timestep(int t, const char* what = "timestep") const {
    if (t < 1 || t > steps()) {
      throw Error(std::string(what) + " " + std::to_string(t) + " outside 1.." + std::to_string(steps()), what);
    }
  }

 private:
  [[nodiscard]] std::size_t index(int t) const {
    check_timestep(t);
    return static_cast<std::size_t>(t - 1);
  }

  std::vector<double> beta_;
  std::vector<double> alpha_;
  std::vector<double> alpha_bar_;
};

/// Matrix of i.i.d. standard normals with the shape of `like`.
template <class Mat>
Mat gaussian_like(Rng& rng) {
  Mat m;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.normal();
  return m;
}

inline Eigen::MatrixXd gaussian(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal();
  return m;
}

/// Closed-form jump x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps.
/// t = 0 returns x0.
template <class Derived, class NoiseDerived>
typename Derived::PlainObject forward_sample(const Eigen::MatrixBase<Derived>& x0, int t,
                                             const Eigen::MatrixBase<NoiseDerived>& eps,
                                             const DiffusionSchedule& sched) {
  if (t == 0) return x0;
  sched.check_timestep(t);
  const double ab = sched.alpha_bar(t);
  return std::sqrt(ab) * x0 + std::sqrt(1.0 - ab) * eps;
}

/// One single-step forward transition q(x_t | x_{t-1}).
template <class Derived, class NoiseDerived>
typename Derived::PlainObject forward_step(const Eigen::MatrixBase<Derived>& x_prev, int t,
                                           const Eigen::MatrixBase<NoiseDerived>& eps,
                                           const DiffusionSchedule& sched) {
  const double a = sched.alpha(t);
  return std::sqrt(a) * x_prev + std::sqrt(1.0 - a) * eps;
}

/// Ancestral step x_t -> x_{t-1} given the predicted noise.
/// Variance sigma_t^2 = beta_t, and the final step (t = 1) adds no noise.
template <class Derived, class EpsDerived, class NoiseDerived>
typename Derived::PlainObject reverse_step(const Eigen::MatrixBase<Derived>& xt, int t,
                                           const Eigen::MatrixBase<EpsDerived>& eps_hat,
                                           const Eigen::MatrixBase<NoiseDerived>& z, const DiffusionSchedule& sched) {
  sched.check_timestep(t);
  const double a = sched.alpha(t);
  const double ab = sched.alpha_bar(t);
  const double sigma = t == 1 ? 0.0 : std::sqrt(sched.beta(t));
  typename Derived::PlainObject out = (xt - ((1.0 - a) / std::sqrt(1.0 - ab)) * eps_hat) / std::sqrt(a);
  if (sigma != 0.0) out += sigma * z;
  return out;
}

/// Estimate of x0 implied by x_t and a noise prediction.
template <class Derived, class EpsDerived>
typename Derived::PlainObject predict_x0(const Eigen::MatrixBase<Derived>& xt, int t,
                                         const Eigen::MatrixBase<EpsDerived>& eps_hat,
                                         const DiffusionSchedule& sched) {
  const double ab = sched.alpha_bar(t);
  return (xt - std::sqrt(1.0 - ab) * eps_hat) / std::sqrt(ab);
}

/// Runs the reverse chain from x (at timestep t_start) down to x0.
///
/// `eps_fn(x, t)` returns the noise prediction; `after_step(t, x_t, eps_hat,
/// x_prev)` may modify x_prev in place (projection, inpainting overwrite).
template <class Mat, class EpsFn, class AfterStep>
Mat run_reverse_chain(Mat x, int t_start, const DiffusionSchedule& sched, EpsFn&& eps_fn, Rng& rng,
                      AfterStep&& after_step) {
  sched.check_timestep(t_start, "t_start");
  for (int t = t_start; t >= 1; --t) {
    const Mat eps_hat = eps_fn(x, t);
    Mat z = Mat::Zero(x.rows(), x.cols());
    if (t > 1) {
      for (Eigen::Index i = 0; i < z.rows(); ++i)
        for (Eigen::Index j = 0; j < z.cols(); ++j) z(i, j) = rng.normal();
    }
    Mat x_prev = reverse_step(x, t, eps_hat, z, sched);
    after_step(t, x, eps_hat, x_prev);
    x = std::move(x_prev);
  }
  return x;
}

}  // namespace layoutforge
