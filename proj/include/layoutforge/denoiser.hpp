#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "layoutforge/condition.hpp"
#include "layoutforge/error.hpp"
#include "layoutforge/layout.hpp"
#include "layoutforge/rng.hpp"

namespace layoutforge {

inline constexpr int kTimeEmbedDim = 32;

/// Widths of the noise-prediction network.
struct DenoiserDims {
  int hidden = 256;
  int context = 64;

  [[nodiscard]] int input() const noexcept { return kFeatureDim + kTimeEmbedDim + kConditionDim + context; }
  friend bool operator==(const DenoiserDims&, const DenoiserDims&) = default;
};

/// Weights of eps_theta(x_t, t, c).
///
/// Every component slot runs the same MLP on
///   [row | time embedding | condition | global context]
/// where the global context is the slot-mean of a linear projection of the
/// rows. Shared weights plus mean pooling make the network equivariant to
/// permutations of the slots.
struct DenoiserParams {
  static constexpr std::size_t kTensorCount = 8;

  DenoiserDims dims;
  int steps = 0;  // schedule length T the time embedding is normalized by

  Eigen::MatrixXd ctx_w;  // D x context
  Eigen::MatrixXd ctx_b;  // 1 x context
  Eigen::MatrixXd w1;     // input x hidden
  Eigen::MatrixXd b1;     // 1 x hidden
  Eigen::MatrixXd w2;     // hidden x hidden
  Eigen::MatrixXd b2;     // 1 x hidden
  Eigen::MatrixXd w3;     // hidden x D
  Eigen::MatrixXd b3;     // 1 x D

  static constexpr std::array<std::string_view, kTensorCount> kNames = {"ctx_w", "ctx_b", "w1", "b1",
                                                                         "w2",    "b2",    "w3", "b3"};

  static DenoiserParams zeros(const DenoiserDims& dims, int steps) {
    DenoiserParams p;
    p.dims = dims;
    p.steps = steps;
    p.ctx_w = Eigen::MatrixXd::Zero(kFeatureDim, dims.context);
    p.ctx_b = Eigen::MatrixXd::Zero(1, dims.context);
    p.w1 = Eigen::MatrixXd::Zero(dims.input(), dims.hidden);
    p.b1 = Eigen::MatrixXd::Zero(1, dims.hidden);
    p.w2 = Eigen::MatrixXd::Zero(dims.hidden, dims.hidden);
    p.b2 = Eigen::MatrixXd::Zero(1, dims.hidden);
    p.w3 = Eigen::MatrixXd::Zero(dims.hidden, kFeatureDim);
    p.b3 = Eigen::MatrixXd::Zero(1, kFeatureDim);
    return p;
  }

  /// Glorot-uniform weights, zero biases.
  static DenoiserParams initialize(const DenoiserDims& dims, int steps, std::uint64_t seed) {
    if (dims.hidden < 1 || dims.context < 1) throw ConfigError("network widths must be positive", "model");
    if (steps < 1) throw ConfigError("steps must be positive", "schedule.T");
    DenoiserParams p = zeros(dims, steps);
    Rng rng(seed);
    auto glorot = [&rng](Eigen::MatrixXd& m) {
      const double limit = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
      for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.uniform(-limit, limit);
    };
    glorot(p.ctx_w);
    glorot(p.w1);
    glorot(p.w2);
    glorot(p.w3);
    return p;
  }

  [[nodiscard]] std::array<Eigen::MatrixXd*, kTensorCount> tensors() {
    return {&ctx_w, &ctx_b, &w1, &b1, &w2, &b2, &w3, &b3};
  }
  [[nodiscard]] std::array<const Eigen::MatrixXd*, kTensorCount> tensors() const {
    return {&ctx_w, &ctx_b, &w1, &b1, &w2, &b2, &w3, &b3};
  }

  [[nodiscard]] std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto* t : tensors()) n += static_cast<std::size_t>(t->size());
    return n;
  }

  [[nodiscard]] bool all_finite() const {
    for (const auto* t : tensors()) {
      if (!t->allFinite()) return false;
    }
    return true;
  }

  // Row blocks of w1 by input segment.
  [[nodiscard]] auto w1_row() const { return w1.topRows(kFeatureDim); }
  [[nodiscard]] auto w1_time() const { return w1.middleRows(kFeatureDim, kTimeEmbedDim); }
  [[nodiscard]] auto w1_cond() const { return w1.middleRows(kFeatureDim + kTimeEmbedDim, kConditionDim); }
  [[nodiscard]] auto w1_ctx() const { return w1.bottomRows(dims.context); }
};

/// 16 sine/cosine pairs of t/T at geometrically spaced frequencies 1..1000.
inline Eigen::RowVectorXd time_embedding(int t, int steps) {
  constexpr int kPairs = kTimeEmbedDim / 2;
  Eigen::RowVectorXd e(kTimeEmbedDim);
  const double s = static_cast<double>(t) / static_cast<double>(steps);
  for (int k = 0; k < kPairs; ++k) {
    const double freq = std::exp(std::log(1000.0) * k / (kPairs - 1));
    e(k) = std::sin(freq * s);
    e(kPairs + k) = std::cos(freq * s);
  }
  return e;
}

namespace detail {
inline double sigmoid(double a) { return 1.0 / (1.0 + std::exp(-a)); }
inline double silu(double a) { return a * sigmoid(a); }
inline double silu_grad(double a) {
  const double s = sigmoid(a);
  return s * (1.0 + a * (1.0 - s));
}
}  // namespace detail

/// Intermediate values kept for the backward pass.
struct ForwardCache {
  Eigen::MatrixXd x;       // (B*16) x D
  Eigen::MatrixXd x_mean;  // B x D
  Eigen::MatrixXd temb;    // B x 32
  Eigen::MatrixXd cond;    // B x 96
  Eigen::MatrixXd ctx;     // B x context
  Eigen::MatrixXd a1, h1, a2, h2;
};

/// Batched forward pass. `x` stacks B tensors of 16 rows; `t` and the rows of
/// `cond` are per example.
inline Eigen::MatrixXd denoiser_forward(const DenoiserParams& p, const Eigen::MatrixXd& x, std::span<const int> t,
                                        const Eigen::MatrixXd& cond, ForwardCache* cache = nullptr) {
  const auto batch = static_cast<Eigen::Index>(t.size());
  if (x.rows() != batch * kMaxComponents || x.cols() != kFeatureDim) throw Error("denoiser input shape mismatch");
  if (cond.rows() != batch || cond.cols() != kConditionDim) throw Error("condition batch shape mismatch");

  Eigen::MatrixXd x_mean(batch, kFeatureDim);
  Eigen::MatrixXd temb(batch, kTimeEmbedDim);
  for (Eigen::Index b = 0; b < batch; ++b) {
    x_mean.row(b) = x.middleRows(b * kMaxComponents, kMaxComponents).colwise().mean();
    temb.row(b) = time_embedding(t[static_cast<std::size_t>(b)], p.steps);
  }
  Eigen::MatrixXd ctx = x_mean * p.ctx_w;
  ctx.rowwise() += p.ctx_b.row(0);

  // Per-example part of the first layer, shared by that example's 16 rows.
  Eigen::MatrixXd shared = temb * p.w1_time() + cond * p.w1_cond() + ctx * p.w1_ctx();
  Eigen::MatrixXd a1 = x * p.w1_row();
  for (Eigen::Index b = 0; b < batch; ++b) {
    a1.middleRows(b * kMaxComponents, kMaxComponents).rowwise() += shared.row(b) + p.b1.row(0);
  }
  Eigen::MatrixXd h1 = a1.unaryExpr(&detail::silu);
  Eigen::MatrixXd a2 = h1 * p.w2;
  a2.rowwise() += p.b2.row(0);
  Eigen::MatrixXd h2 = a2.unaryExpr(&detail::silu);
  Eigen::MatrixXd out = h2 * p.w3;
  out.rowwise() += p.b3.row(0);

  if (cache) {
    cache->x = x;
    cache->x_mean = std::move(x_mean);
    cache->temb = std::move(temb);
    cache->cond = cond;
    cache->ctx = std::move(ctx);
    cache->a1 = std::move(a1);
    cache->h1 = std::move(h1);
    cache->a2 = std::move(a2);
    cache->h2 = std::move(h2);
  }
  return out;
}

/// Reverse-mode pass: accumulates dLoss/dParams into `grads` given
/// dLoss/dOutput.
inline void denoiser_backward(const DenoiserParams& p, const ForwardCache& c, const Eigen::MatrixXd& d_out,
                              DenoiserParams& grads) {
  const Eigen::Index batch = c.x_mean.rows();

  grads.w3.noalias() += c.h2.transpose() * d_out;
  grads.b3 += d_out.colwise().sum();
  Eigen::MatrixXd d_a2 = (d_out * p.w3.transpose()).cwiseProduct(c.a2.unaryExpr(&detail::silu_grad));

  grads.w2.noalias() += c.h1.transpose() * d_a2;
  grads.b2 += d_a2.colwise().sum();
  Eigen::MatrixXd d_a1 = (d_a2 * p.w2.transpose()).cwiseProduct(c.a1.unaryExpr(&detail::silu_grad));

  Eigen::MatrixXd d_shared(batch, p.dims.hidden);
  for (Eigen::Index b = 0; b < batch; ++b) {
    d_shared.row(b) = d_a1.middleRows(b * kMaxComponents, kMaxComponents).colwise().sum();
  }
  grads.w1.topRows(kFeatureDim).noalias() += c.x.transpose() * d_a1;
  grads.w1.middleRows(kFeatureDim, kTimeEmbedDim).noalias() += c.temb.transpose() * d_shared;
  grads.w1.middleRows(kFeatureDim + kTimeEmbedDim, kConditionDim).noalias() += c.cond.transpose() * d_shared;
  grads.w1.bottomRows(p.dims.context).noalias() += c.ctx.transpose() * d_shared;
  grads.b1 += d_shared.colwise().sum();

  const Eigen::MatrixXd d_ctx = d_shared * p.w1_ctx().transpose();
  grads.ctx_w.noalias() += c.x_mean.transpose() * d_ctx;
  grads.ctx_b += d_ctx.colwise().sum();
}

/// Noise prediction for one tensor. No condition means c = 0.
inline LayoutTensor predict_eps(const DenoiserParams& p, const LayoutTensor& xt, int t,
                                const std::optional<Condition>& condition = std::nullopt) {
  const Eigen::MatrixXd cond = condition ? Eigen::MatrixXd(condition->encoded().transpose())
                                         : Eigen::MatrixXd::Zero(1, kConditionDim);
  const int ts[1] = {t};
  return LayoutTensor(denoiser_forward(p, Eigen::MatrixXd(xt), ts, cond));
}

inline LayoutTensor predict_eps(const DenoiserParams& p, const LayoutTensor& xt, int t, const Eigen::VectorXd& c) {
  const int ts[1] = {t};
  return LayoutTensor(denoiser_forward(p, Eigen::MatrixXd(xt), ts, Eigen::MatrixXd(c.transpose())));
}

// ---------------------------------------------------------------------------
// Weights file
//
//   bytes 0..3   magic "LFDN"
//   u32          format version (1)
//   u32 x 8      max components, feature dim, time-embedding dim,
//                condition dim, context width, hidden width, steps T,
//                vocabulary version
//   u64          parameter count
//   f64 ...      ctx_w, ctx_b, w1, b1, w2, b2, w3, b3, each row-major
//
// All integers and floats are little-endian.

inline constexpr std::string_view kWeightsMagic = "LFDN";
inline constexpr std::uint32_t kWeightsVersion = 1;

namespace detail {
template <class T>
void put_le(std::string& out, T value) {
  std::array<char, sizeof(T)> raw{};
  std::memcpy(raw.data(), &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
  out.append(raw.data(), raw.size());
}

template <class T>
T get_le(std::string_view& in) {
  if (in.size() < sizeof(T)) throw DataError("weights file truncated", "weights");
  std::array<char, sizeof(T)> raw{};
  std::memcpy(raw.data(), in.data(), sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(raw.begin(), raw.end());
  in.remove_prefix(sizeof(T));
  T value;
  std::memcpy(&value, raw.data(), sizeof(T));
  return value;
}
}  // namespace detail

inline std::string serialize_weights(const DenoiserParams& p) {
  std::string out(kWeightsMagic);
  detail::put_le<std::uint32_t>(out, kWeightsVersion);
  for (int v : {kMaxComponents, kFeatureDim, kTimeEmbedDim, kConditionDim, p.dims.context, p.dims.hidden, p.steps,
                kVocabVersion}) {
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(v));
  }
  detail::put_le<std::uint64_t>(out, p.parameter_count());
  for (const auto* m : p.tensors()) {
    for (Eigen::Index i = 0; i < m->rows(); ++i)
      for (Eigen::Index j = 0; j < m->cols(); ++j) detail::put_le<double>(out, (*m)(i, j));
  }
  return out;
}

inline DenoiserParams deserialize_weights(std::string_view in) {
  if (in.substr(0, 4) != kWeightsMagic) throw DataError("not a weights file (bad magic)", "weights");
  in.remove_prefix(4);
  if (detail::get_le<std::uint32_t>(in) != kWeightsVersion) throw DataError("unsupported weights version", "weights");
  const auto expect = [&](int want, const char* what) {
    const auto got = detail::get_le<std::uint32_t>(in);
    if (got != static_cast<std::uint32_t>(want)) {
      throw DataError(std::string("weights ") + what + " is " + std::to_string(got) + ", expected " +
                          std::to_string(want),
                      "weights");
    }
  };
  expect(kMaxComponents, "max components");
  expect(kFeatureDim, "feature dim");
  expect(kTimeEmbedDim, "time embedding dim");
  expect(kConditionDim, "condition dim");
  DenoiserDims dims;
  dims.context = static_cast<int>(detail::get_le<std::uint32_t>(in));
  dims.hidden = static_cast<int>(detail::get_le<std::uint32_t>(in));
  const int steps = static_cast<int>(detail::get_le<std::uint32_t>(in));
  expect(kVocabVersion, "vocabulary version");
  if (dims.context < 1 || dims.hidden < 1 || steps < 1) throw DataError("weights header has invalid dims", "weights");
  DenoiserParams p = DenoiserParams::zeros(dims, steps);
  if (detail::get_le<std::uint64_t>(in) != p.parameter_count()) {
    throw DataError("weights parameter count does not match header dims", "weights");
  }
  for (auto* m : p.tensors()) {
    for (Eigen::Index i = 0; i < m->rows(); ++i)
      for (Eigen::Index j = 0; j < m->cols(); ++j) (*m)(i, j) = detail::get_le<double>(in);
  }
  if (!in.empty()) throw DataError("trailing bytes after weights", "weights");
  return p;
}

inline void save_weights(const DenoiserParams& p, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open '" + path + "' for writing", "weights");
  const auto bytes = serialize_weights(p);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline DenoiserParams load_weights(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open weights file '" + path + "'", "weights");
  std::ostringstream ss;
  ss << f.rdbuf();
  return deserialize_weights(ss.str());
}

/// Short content hash identifying a set of weights.
inline std::string model_version(const DenoiserParams& p) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(serialize_weights(p))));
  return std::string("lfdn-v1-") + buf;
}

}  // namespace layoutforge
