#include <gtest/gtest.h>

#include <cmath>

#include "layoutforge/diffusion.hpp"
#include "layoutforge/layout.hpp"

using namespace layoutforge;

TEST(Schedule, ExplicitBetas) {
  const DiffusionSchedule s({0.1, 0.2, 0.5});
  EXPECT_DOUBLE_EQ(s.alpha(1), 0.9);
  EXPECT_DOUBLE_EQ(s.alpha(2), 0.8);
  EXPECT_DOUBLE_EQ(s.alpha(3), 0.5);
  EXPECT_NEAR(s.alpha_bar(1), 0.9, 1e-15);
  EXPECT_NEAR(s.alpha_bar(2), 0.72, 1e-15);
  EXPECT_NEAR(s.alpha_bar(3), 0.36, 1e-15);
  EXPECT_EQ(s.alpha_bar(0), 1.0);
}

TEST(Schedule, SingleStep) {
  const auto s = DiffusionSchedule::linear(1, 0.3, 0.3);
  EXPECT_EQ(s.steps(), 1);
  EXPECT_DOUBLE_EQ(s.alpha_bar(1), 0.7);
}

TEST(Schedule, LinearEndpointsAndMonotone) {
  const auto s = DiffusionSchedule::linear(200, 1e-4, 0.02);
  EXPECT_DOUBLE_EQ(s.beta(1), 1e-4);
  EXPECT_DOUBLE_EQ(s.beta(200), 0.02);
  for (int t = 2; t <= 200; ++t) EXPECT_LT(s.alpha_bar(t), s.alpha_bar(t - 1));
  EXPECT_LT(s.alpha_bar(1), 1.0);
}

TEST(Schedule, InvalidRanges) {
  EXPECT_THROW(DiffusionSchedule::linear(0, 1e-4, 0.02), ConfigError);
  EXPECT_THROW(DiffusionSchedule::linear(10, 0.0, 0.02), ConfigError);
  EXPECT_THROW(DiffusionSchedule::linear(10, 0.03, 0.02), ConfigError);
  EXPECT_THROW(DiffusionSchedule::linear(10, 1e-4, 1.0), ConfigError);
  EXPECT_THROW(DiffusionSchedule({0.1, 1.0}), ConfigError);
}

TEST(ForwardSample, ZeroNoise) {
  const auto s = DiffusionSchedule::linear(50, 1e-3, 0.05);
  Rng rng(1);
  const LayoutTensor x0 = gaussian_like<LayoutTensor>(rng);
  const LayoutTensor xt = forward_sample(x0, 30, LayoutTensor(LayoutTensor::Zero()), s);
  EXPECT_LE((xt - std::sqrt(s.alpha_bar(30)) * x0).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(ForwardSample, IdentityLimit) {
  const DiffusionSchedule s(std::vector<double>(10, 1e-12));
  Rng rng(2);
  const LayoutTensor x0 = gaussian_like<LayoutTensor>(rng);
  const LayoutTensor eps = gaussian_like<LayoutTensor>(rng);
  EXPECT_LE((forward_sample(x0, 10, eps, s) - x0).cwiseAbs().maxCoeff(), 1e-5);
}

TEST(ForwardSample, LinearInInputs) {
  const auto s = DiffusionSchedule::linear(20, 1e-3, 0.1);
  Rng rng(3);
  const LayoutTensor a = gaussian_like<LayoutTensor>(rng), b = gaussian_like<LayoutTensor>(rng);
  const LayoutTensor e1 = gaussian_like<LayoutTensor>(rng), e2 = gaussian_like<LayoutTensor>(rng);
  const LayoutTensor lhs = forward_sample(LayoutTensor(a + 2 * b), 7, LayoutTensor(e1 + 2 * e2), s);
  const LayoutTensor rhs = forward_sample(a, 7, e1, s) + 2 * forward_sample(b, 7, e2, s);
  EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ForwardSample, TimestepRange) {
  const auto s = DiffusionSchedule::linear(5, 1e-3, 0.1);
  const LayoutTensor z = LayoutTensor::Zero();
  EXPECT_THROW(forward_sample(z, 6, z, s), Error);
  EXPECT_THROW(forward_sample(z, -1, z, s), Error);
  EXPECT_NO_THROW(forward_sample(z, 0, z, s));
}

TEST(ForwardSample, ComposesSingleSteps) {
  // Chained q(x_t | x_{t-1}) matches the closed-form marginal in variance.
  const auto s = DiffusionSchedule::linear(10, 0.01, 0.2);
  Rng rng(4);
  const int n = 40000;
  double sum = 0, sum2 = 0;
  for (int k = 0; k < n; ++k) {
    Eigen::Matrix<double, 1, 1> x;
    x(0) = 0.7;
    for (int t = 1; t <= 10; ++t) {
      Eigen::Matrix<double, 1, 1> e;
      e(0) = rng.normal();
      x = forward_step(x, t, e, s);
    }
    sum += x(0);
    sum2 += x(0) * x(0);
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  EXPECT_NEAR(mean, std::sqrt(s.alpha_bar(10)) * 0.7, 0.01);
  EXPECT_NEAR(var, 1.0 - s.alpha_bar(10), 0.02);
}

TEST(ReverseStep, ScalarHandValue) {
  // alpha = 0.9, alpha_bar = 0.72 at t = 2 of {0.1, 0.2}: use t with those values.
  const DiffusionSchedule s({0.2, 0.1});
  ASSERT_NEAR(s.alpha(2), 0.9, 1e-15);
  ASSERT_NEAR(s.alpha_bar(2), 0.72, 1e-15);
  Eigen::Matrix<double, 1, 1> xt, eps, z;
  xt(0) = 1.0;
  eps(0) = 0.5;
  z(0) = 0.0;
  const auto out = reverse_step(xt, 2, eps, z, s);
  EXPECT_NEAR(out(0), (1.0 / std::sqrt(0.9)) * (1.0 - (0.1 / std::sqrt(0.28)) * 0.5), 1e-12);
  EXPECT_NEAR(out(0), 0.95446, 5e-5);
}

TEST(ReverseStep, FinalStepIgnoresNoise) {
  const auto s = DiffusionSchedule::linear(10, 0.01, 0.2);
  Eigen::Matrix<double, 1, 1> xt, eps, z1, z2;
  xt(0) = 0.3;
  eps(0) = -0.2;
  z1(0) = 5.0;
  z2(0) = -5.0;
  EXPECT_EQ(reverse_step(xt, 1, eps, z1, s)(0), reverse_step(xt, 1, eps, z2, s)(0));
  EXPECT_NE(reverse_step(xt, 2, eps, z1, s)(0), reverse_step(xt, 2, eps, z2, s)(0));
}

TEST(ReverseStep, ZeroPrediction) {
  const auto s = DiffusionSchedule::linear(10, 0.01, 0.2);
  Eigen::Matrix<double, 1, 1> xt, zero;
  xt(0) = 0.8;
  zero(0) = 0.0;
  EXPECT_DOUBLE_EQ(reverse_step(xt, 5, zero, zero, s)(0), 0.8 / std::sqrt(s.alpha(5)));
}

TEST(PredictX0, InvertsForward) {
  const auto s = DiffusionSchedule::linear(100, 1e-4, 0.02);
  Rng rng(6);
  const LayoutTensor x0 = gaussian_like<LayoutTensor>(rng), eps = gaussian_like<LayoutTensor>(rng);
  const LayoutTensor xt = forward_sample(x0, 77, eps, s);
  EXPECT_LE((predict_x0(xt, 77, eps, s) - x0).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(ReverseChain, VisitsEveryStepOnce) {
  const auto s = DiffusionSchedule::linear(12, 0.01, 0.2);
  Rng rng(7);
  std::vector<int> seen;
  Eigen::Matrix<double, 1, 1> x;
  x(0) = 1.0;
  run_reverse_chain(
      x, 12, s, [](const auto& xt, int) { return std::decay_t<decltype(xt)>::PlainObject::Zero().eval(); }, rng,
      [&](int t, const auto&, const auto&, auto&) { seen.push_back(t); });
  ASSERT_EQ(seen.size(), 12u);
  for (int i = 0; i < 12; ++i) EXPECT_EQ(seen[static_cast<std::size_t>(i)], 12 - i);
}
