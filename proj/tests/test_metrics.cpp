#include <gtest/gtest.h>

#include <cmath>

#include "layoutforge/dataio.hpp"
#include "layoutforge/metrics.hpp"

using namespace layoutforge;

namespace {

RasterImage constant_image(int w, int h, double v) {
  RasterImage img;
  img.width = w;
  img.height = h;
  img.pixels.assign(static_cast<std::size_t>(3 * w * h), v);
  return img;
}

RasterImage noise_image(int w, int h, Rng& rng) {
  auto img = constant_image(w, h, 0.0);
  for (auto& p : img.pixels) p = rng.uniform();
  return img;
}

std::vector<Layout> template_set(std::size_t n, std::uint64_t seed, std::initializer_list<std::string_view> names) {
  std::vector<Layout> out;
  const auto corpus = synth_corpus(4 * n, seed);
  for (const auto& item : corpus.items) {
    if (out.size() == n) break;
    for (auto name : names) {
      if (item.source == name) out.push_back(item.layout);
    }
  }
  return out;
}

Eigen::MatrixXd random_spd(int d, Rng& rng) {
  Eigen::MatrixXd a(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) a(i, j) = rng.normal();
  return a * a.transpose() + 0.1 * Eigen::MatrixXd::Identity(d, d);
}

}  // namespace

TEST(Psnr, IdenticalIsCapped) {
  Rng rng(1);
  const auto a = noise_image(16, 16, rng);
  EXPECT_EQ(psnr(a, a), 100.0);
}

TEST(Psnr, UniformDifferenceTwentyDb) {
  const auto a = constant_image(10, 12, 0.3);
  const auto b = constant_image(10, 12, 0.4);
  EXPECT_NEAR(mean_squared_error(a, b), 0.01, 1e-15);
  EXPECT_NEAR(psnr(a, b), 20.0, 1e-9);
}

TEST(Psnr, WhiteVersusBlackZero) {
  EXPECT_EQ(psnr(constant_image(8, 8, 1.0), constant_image(8, 8, 0.0)), 0.0);
}

TEST(Psnr, SizeMismatchThrows) {
  EXPECT_THROW(psnr(constant_image(8, 8, 1.0), constant_image(8, 9, 1.0)), Error);
}

TEST(Psnr, CapThreshold) {
  EXPECT_EQ(psnr_from_mse(9.9e-11), 100.0);
  EXPECT_NEAR(psnr_from_mse(1e-10), 100.0, 1e-9);
  EXPECT_NEAR(psnr_from_mse(1e-3), 30.0, 1e-12);
}

TEST(Ssim, IdenticalIsOne) {
  Rng rng(2);
  const auto a = noise_image(32, 24, rng);
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
  EXPECT_NEAR(ssim(constant_image(16, 16, 0.5), constant_image(16, 16, 0.5)), 1.0, 1e-12);
}

TEST(Ssim, ConstantZeroVersusOne) {
  const double expect = kSsimC1 / (1.0 + kSsimC1);
  EXPECT_NEAR(ssim(constant_image(16, 16, 0.0), constant_image(16, 16, 1.0)), expect, 1e-15);
  EXPECT_NEAR(expect, 9.999e-5, 1e-8);
}

TEST(Ssim, Symmetric) {
  Rng rng(3);
  for (int k = 0; k < 10; ++k) {
    const auto a = noise_image(20, 28, rng);
    const auto b = noise_image(20, 28, rng);
    EXPECT_DOUBLE_EQ(ssim(a, b), ssim(b, a));
    EXPECT_GE(ssim(a, b), -1.0);
    EXPECT_LE(ssim(a, b), 1.0);
  }
}

TEST(Ssim, SingleWindowClosedForm) {
  Rng rng(4);
  const auto a = noise_image(8, 8, rng);
  const auto b = noise_image(8, 8, rng);
  std::vector<double> ya(64), yb(64);
  for (int i = 0; i < 64; ++i) {
    ya[i] = (a.pixels[3 * i] + a.pixels[3 * i + 1] + a.pixels[3 * i + 2]) / 3.0;
    yb[i] = (b.pixels[3 * i] + b.pixels[3 * i + 1] + b.pixels[3 * i + 2]) / 3.0;
  }
  double ma = 0, mb = 0;
  for (int i = 0; i < 64; ++i) ma += ya[i] / 64, mb += yb[i] / 64;
  double va = 0, vb = 0, cab = 0;
  for (int i = 0; i < 64; ++i) {
    va += (ya[i] - ma) * (ya[i] - ma) / 64;
    vb += (yb[i] - mb) * (yb[i] - mb) / 64;
    cab += (ya[i] - ma) * (yb[i] - mb) / 64;
  }
  const double c1 = 1e-4, c2 = 9e-4;
  const double expect = (2 * ma * mb + c1) * (2 * cab + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
  EXPECT_NEAR(ssim(a, b), expect, 1e-12);
}

TEST(Ssim, TooSmallThrows) {
  EXPECT_THROW(ssim(constant_image(7, 20, 0.0), constant_image(7, 20, 0.0)), Error);
  EXPECT_THROW(ssim(constant_image(8, 8, 0.0), constant_image(8, 9, 0.0)), Error);
}

TEST(Features, EmptyLayout) {
  const auto f = layout_features(Layout{});
  EXPECT_EQ(f.size(), 22);
  EXPECT_EQ(f(0), 0.0);
  EXPECT_EQ(f(3), 1.0);
  EXPECT_EQ(f.tail<16>().sum(), 0.0);
}

TEST(Features, FullCanvasButton) {
  Layout l;
  l.components.push_back({ComponentType::button, 0.5, 0.5, 1.0, 1.0, {1.0, 0.0, 0.0}, true});
  const auto f = layout_features(l);
  EXPECT_EQ(f(0), 1.0 / 16.0);
  EXPECT_EQ(f(1), 1.0);
  EXPECT_EQ(f(2), 0.0);
  EXPECT_EQ(f(4), 0.0);
  EXPECT_EQ(f(5), 1.0);
  EXPECT_EQ(f.tail<16>().sum(), 16.0);
}

TEST(Features, CircularHueMean) {
  Layout l;
  l.components.push_back({ComponentType::icon, 0.2, 0.2, 0.1, 0.1, {1.0, 0.0, 0.5}, true});
  l.components.push_back({ComponentType::icon, 0.6, 0.6, 0.1, 0.1, {1.0, 0.5, 0.0}, true});
  // hues 330 and 30 average to 0, not 180
  const auto f = layout_features(l);
  EXPECT_NEAR(std::min(f(4), 1.0 - f(4)), 0.0, 1e-9);
}

TEST(Features, TopLeftOccupancyCell) {
  Layout l;
  l.components.push_back({ComponentType::image, 0.125, 0.125, 0.25, 0.25, {0, 0, 0}, true});
  const auto f = layout_features(l);
  EXPECT_EQ(f(6), 1.0);
  EXPECT_EQ(f.tail<16>().sum(), 1.0);
}

TEST(Frechet, DiagonalClosedForm) {
  Eigen::VectorXd mu_a = Eigen::VectorXd::Zero(3), mu_b = Eigen::VectorXd::Zero(3);
  mu_b(0) = 1.0;
  Eigen::MatrixXd s = Eigen::MatrixXd::Identity(3, 3);
  EXPECT_NEAR(frechet_distance_squared(mu_a, s, mu_b, s), 1.0, 1e-12);

  Rng rng(5);
  for (int k = 0; k < 20; ++k) {
    const int d = 1 + static_cast<int>(rng.below(8));
    Eigen::VectorXd ma(d), mb(d), sa(d), sb(d);
    double expect = 0.0;
    for (int i = 0; i < d; ++i) {
      ma(i) = rng.normal();
      mb(i) = rng.normal();
      sa(i) = rng.uniform(0.1, 2.0);
      sb(i) = rng.uniform(0.1, 2.0);
      expect += (ma(i) - mb(i)) * (ma(i) - mb(i)) + (sa(i) - sb(i)) * (sa(i) - sb(i));
    }
    const Eigen::MatrixXd ca = sa.cwiseProduct(sa).asDiagonal();
    const Eigen::MatrixXd cb = sb.cwiseProduct(sb).asDiagonal();
    EXPECT_NEAR(frechet_distance_squared(ma, ca, mb, cb), expect, 1e-10 * (1.0 + expect));
  }
}

// For 2x2 P with positive eigenvalues, tr(P^(1/2)) = sqrt(tr P + 2 sqrt(det P)).
TEST(Frechet, TwoByTwoClosedForm) {
  Rng rng(6);
  for (int k = 0; k < 50; ++k) {
    const Eigen::MatrixXd ca = random_spd(2, rng);
    const Eigen::MatrixXd cb = random_spd(2, rng);
    Eigen::VectorXd ma(2), mb(2);
    ma << rng.normal(), rng.normal();
    mb << rng.normal(), rng.normal();
    const Eigen::Matrix2d p = ca * cb;
    const double tr_root = std::sqrt(p.trace() + 2.0 * std::sqrt(p.determinant()));
    const double expect = (ma - mb).squaredNorm() + ca.trace() + cb.trace() - 2.0 * tr_root;
    EXPECT_NEAR(frechet_distance_squared(ma, ca, mb, cb), expect, 1e-9 * (1.0 + std::abs(expect)));
  }
}

TEST(Frechet, SymmetricAndNonNegative) {
  Rng rng(7);
  for (int k = 0; k < 20; ++k) {
    const int d = 2 + static_cast<int>(rng.below(20));
    const Eigen::MatrixXd ca = random_spd(d, rng);
    const Eigen::MatrixXd cb = random_spd(d, rng);
    Eigen::VectorXd ma(d), mb(d);
    for (int i = 0; i < d; ++i) ma(i) = rng.normal(), mb(i) = rng.normal();
    const double ab = frechet_distance(ma, ca, mb, cb);
    EXPECT_NEAR(ab, frechet_distance(mb, cb, ma, ca), 1e-9);
    EXPECT_GE(ab, 0.0);
    EXPECT_NEAR(frechet_distance(ma, ca, ma, ca), 0.0, 1e-6);
  }
}

TEST(LayoutFd, SelfIsZero) {
  const auto a = template_set(200, 1, {"login", "list", "gallery", "content"});
  EXPECT_LT(layout_fd(a, a), 1e-6);
}

TEST(LayoutFd, Symmetric) {
  const auto a = template_set(100, 1, {"login", "list"});
  const auto b = template_set(100, 2, {"gallery", "content"});
  EXPECT_NEAR(layout_fd(a, b), layout_fd(b, a), 1e-9);
  EXPECT_GT(layout_fd(a, b), 0.0);
}

TEST(LayoutFd, TooSmallThrows) {
  const auto a = template_set(22, 1, {"login"});
  const auto b = template_set(30, 1, {"login"});
  EXPECT_THROW(layout_fd(a, b), Error);
  EXPECT_THROW(layout_fd(b, a), Error);
  const auto c = template_set(23, 1, {"login"});
  EXPECT_NO_THROW(layout_fd(b, c));
}

TEST(LayoutFd, SameDistributionBelowDifferentTemplates) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto a = template_set(1000, 100 + s, {"login", "list"});
    const auto b = template_set(1000, 200 + s, {"login", "list"});
    const auto c = template_set(1000, 300 + s, {"gallery", "content"});
    EXPECT_LT(layout_fd(a, b), layout_fd(a, c)) << "seed " << s;
  }
}
