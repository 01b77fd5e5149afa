#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "layoutforge/error.hpp"
#include "layoutforge/layout.hpp"
#include "layoutforge/raster.hpp"
#include "layoutforge/rules.hpp"

namespace layoutforge {

inline constexpr double kPsnrCapDb = 100.0;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;
inline constexpr int kSsimWindow = 8;
inline constexpr int kSsimStride = 4;

inline void check_same_size(const RasterImage& a, const RasterImage& b) {
  if (a.width != b.width || a.height != b.height) {
    throw Error("image sizes differ: " + std::to_string(a.width) + "x" + std::to_string(a.height) + " vs " +
                std::to_string(b.width) + "x" + std::to_string(b.height));
  }
}

inline double mean_squared_error(const RasterImage& a, const RasterImage& b) {
  check_same_size(a, b);
  double sum = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = a.pixels[i] - b.pixels[i];
    sum += d * d;
  }
  return sum / static_cast<double>(a.pixels.size());
}

/// Unit peak; capped at 100 dB for near-identical images.
inline double psnr_from_mse(double mse) {
  if (mse < 1e-10) return kPsnrCapDb;
  return 10.0 * std::log10(1.0 / mse);
}

inline double psnr(const RasterImage& a, const RasterImage& b) { return psnr_from_mse(mean_squared_error(a, b)); }

/// Mean SSIM over 8x8 windows at stride 4 on luma = (r + g + b) / 3.
inline double ssim(const RasterImage& a, const RasterImage& b) {
  check_same_size(a, b);
  if (a.width < kSsimWindow || a.height < kSsimWindow) throw Error("image smaller than one SSIM window");
  const auto luma = [](const RasterImage& img) {
    std::vector<double> y(static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height));
    for (std::size_t i = 0; i < y.size(); ++i) {
      y[i] = (img.pixels[3 * i] + img.pixels[3 * i + 1] + img.pixels[3 * i + 2]) / 3.0;
    }
    return y;
  };
  const auto ya = luma(a);
  const auto yb = luma(b);
  const auto W = static_cast<std::size_t>(a.width);
  constexpr double n = kSsimWindow * kSsimWindow;
  double total = 0.0;
  std::size_t windows = 0;
  for (int y0 = 0; y0 + kSsimWindow <= a.height; y0 += kSsimStride) {
    for (int x0 = 0; x0 + kSsimWindow <= a.width; x0 += kSsimStride) {
      double sa = 0, sb = 0;
      for (int dy = 0; dy < kSsimWindow; ++dy) {
        for (int dx = 0; dx < kSsimWindow; ++dx) {
          const std::size_t k = static_cast<std::size_t>(y0 + dy) * W + static_cast<std::size_t>(x0 + dx);
          sa += ya[k];
          sb += yb[k];
        }
      }
      const double ma = sa / n;
      const double mb = sb / n;
      double va = 0, vb = 0, cov = 0;
      for (int dy = 0; dy < kSsimWindow; ++dy) {
        for (int dx = 0; dx < kSsimWindow; ++dx) {
          const std::size_t k = static_cast<std::size_t>(y0 + dy) * W + static_cast<std::size_t>(x0 + dx);
          const double da = ya[k] - ma;
          const double db = yb[k] - mb;
          va += da * da;
          vb += db * db;
          cov += da * db;
        }
      }
      va /= n;
      vb /= n;
      cov /= n;
      total += ((2 * ma * mb + kSsimC1) * (2 * cov + kSsimC2)) / ((ma * ma + mb * mb + kSsimC1) * (va + vb + kSsimC2));
      ++windows;
    }
  }
  return total / static_cast<double>(windows);
}

// ---------------------------------------------------------------------------
// Layout features for the Frechet distance

inline constexpr int kLayoutFeatureDim = 22;
using LayoutFeatures = Eigen::Matrix<double, kLayoutFeatureDim, 1>;

/// visible fraction, mean area, area std, alignment, circular mean hue in
/// [0,1], mean saturation, then a 4x4 occupancy grid (cell centers covered by
/// a visible non-background component).
inline LayoutFeatures layout_features(const Layout& layout, const RuleConfig& rules = {}) {
  LayoutFeatures f = LayoutFeatures::Zero();
  std::vector<double> areas;
  double sin_sum = 0.0, cos_sum = 0.0, sat_sum = 0.0;
  for (const auto& c : layout.components) {
    if (!c.visible) continue;
    areas.push_back(c.area());
    const auto hsv = to_hsv(c.color);
    const double rad = hsv.hue * std::numbers::pi / 180.0;
    sin_sum += std::sin(rad);
    cos_sum += std::cos(rad);
    sat_sum += hsv.saturation;
  }
  const auto n = static_cast<double>(areas.size());
  f(0) = n / kMaxComponents;
  if (!areas.empty()) {
    double mean = 0.0;
    for (double a : areas) mean += a;
    mean /= n;
    double var = 0.0;
    for (double a : areas) var += (a - mean) * (a - mean);
    f(1) = mean;
    f(2) = std::sqrt(var / n);
    double angle = std::atan2(sin_sum, cos_sum);
    if (angle < 0.0) angle += 2.0 * std::numbers::pi;
    f(4) = angle / (2.0 * std::numbers::pi);
    f(5) = sat_sum / n;
  }
  f(3) = alignment_score(layout, rules);
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      const double u = (c + 0.5) / 4.0;
      const double v = (r + 0.5) / 4.0;
      const bool hit = std::any_of(layout.components.begin(), layout.components.end(), [&](const Component& comp) {
        return rule_participant(comp) && u >= comp.left() && u < comp.right() && v >= comp.top() && v < comp.bottom();
      });
      f(6 + r * 4 + c) = hit ? 1.0 : 0.0;
    }
  }
  return f;
}

struct GaussianFit {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

inline constexpr double kCovarianceRidge = 1e-6;

/// Sample mean and (n - 1)-normalized covariance plus ridge * I.
inline GaussianFit fit_gaussian(const Eigen::MatrixXd& rows) {
  const auto n = rows.rows();
  if (n < 2) throw Error("need at least two samples to fit a Gaussian");
  GaussianFit g;
  g.mean = rows.colwise().mean().transpose();
  const Eigen::MatrixXd centered = rows.rowwise() - g.mean.transpose();
  g.cov = (centered.transpose() * centered) / static_cast<double>(n - 1);
  g.cov += kCovarianceRidge * Eigen::MatrixXd::Identity(rows.cols(), rows.cols());
  return g;
}

/// Symmetric PSD square root by eigendecomposition; negative eigenvalues clamp to 0.
inline Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& m) {
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

/// Squared Frechet distance between two Gaussians:
///   |mu_a - mu_b|^2 + tr(S_a + S_b - 2 (S_a S_b)^(1/2)).
/// With A = S_a^(1/2) and B = S_b^(1/2), the eigenvalues of (S_a S_b)^(1/2)
/// are the singular values of A B, so the cross trace is its nuclear norm.
/// This avoids square-rooting eigenvalues near zero.
inline double frechet_distance_squared(const Eigen::VectorXd& mu_a, const Eigen::MatrixXd& cov_a,
                                       const Eigen::VectorXd& mu_b, const Eigen::MatrixXd& cov_b) {
  const Eigen::MatrixXd product = psd_sqrt(cov_a) * psd_sqrt(cov_b);
  const double tr_cross = Eigen::JacobiSVD<Eigen::MatrixXd>(product).singularValues().sum();
  return (mu_a - mu_b).squaredNorm() + cov_a.trace() + cov_b.trace() - 2.0 * tr_cross;
}

inline double frechet_distance(const Eigen::VectorXd& mu_a, const Eigen::MatrixXd& cov_a, const Eigen::VectorXd& mu_b,
                               const Eigen::MatrixXd& cov_b) {
  return std::sqrt(std::max(frechet_distance_squared(mu_a, cov_a, mu_b, cov_b), 0.0));
}

inline Eigen::MatrixXd feature_matrix(std::span<const Layout> layouts, const RuleConfig& rules = {}) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(layouts.size()), kLayoutFeatureDim);
  for (std::size_t i = 0; i < layouts.size(); ++i) {
    m.row(static_cast<Eigen::Index>(i)) = layout_features(layouts[i], rules).transpose();
  }
  return m;
}

inline constexpr std::size_t kMinFdSetSize = kLayoutFeatureDim + 1;

/// Frechet distance between Gaussian fits of the two sets' layout features.
inline double layout_fd(std::span<const Layout> set_a, std::span<const Layout> set_b, const RuleConfig& rules = {}) {
  if (set_a.size() < kMinFdSetSize || set_b.size() < kMinFdSetSize) {
    throw Error("layout-FD needs at least " + std::to_string(kMinFdSetSize) + " layouts per set (got " +
                std::to_string(set_a.size()) + " and " + std::to_string(set_b.size()) + ")");
  }
  const auto fa = fit_gaussian(feature_matrix(set_a, rules));
  const auto fb = fit_gaussian(feature_matrix(set_b, rules));
  return frechet_distance(fa.mean, fa.cov, fb.mean, fb.cov);
}

}  // namespace layoutforge
