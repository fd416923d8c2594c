#pragma once

#include <cmath>

#include "colonnet/tensor.hpp"

namespace colonnet {

/// Focal Tversky parameters. alpha weights false negatives, beta false
/// positives, gamma is the focal exponent. Defaults follow the loss's
/// original formulation.
struct FocalTverskyConfig {
  double alpha = 0.7;
  double beta = 0.3;
  double gamma = 4.0 / 3.0;
  double epsilon = 1e-6;

  void validate() const {
    COLONNET_CHECK(alpha > 0 && beta > 0, "focal tversky alpha/beta must be > 0");
    COLONNET_CHECK(gamma > 0, "focal tversky gamma must be > 0");
    COLONNET_CHECK(epsilon > 0, "focal tversky epsilon must be > 0");
  }
};

// ---------------------------------------------------------------------------
// Mean squared error (detection head)
// ---------------------------------------------------------------------------

/// Mean of squared differences over all elements.
template <typename DP, typename DT>
typename DP::Scalar mse(const Eigen::ArrayBase<DP>& pred,
                        const Eigen::ArrayBase<DT>& truth) {
  using S = typename DP::Scalar;
  return (pred - truth).square().sum() / static_cast<S>(pred.size());
}

template <typename T>
T mse_loss(const Tensor<T>& pred, const Tensor<T>& truth) {
  COLONNET_CHECK(pred.same_shape(truth), "mse shape mismatch: ",
                 shape_string(pred.shape()), " vs ", shape_string(truth.shape()));
  COLONNET_CHECK(pred.size() > 0, "mse on empty tensors");
  return mse(pred.array(), truth.array());
}

template <typename T>
Tensor<T> mse_loss_grad(const Tensor<T>& pred, const Tensor<T>& truth) {
  COLONNET_CHECK(pred.same_shape(truth), "mse shape mismatch");
  Tensor<T> g(pred.shape());
  g.array() = T(2) * (pred.array() - truth.array()) / static_cast<T>(pred.size());
  return g;
}

// ---------------------------------------------------------------------------
// Binary cross-entropy (classification head)
// ---------------------------------------------------------------------------

inline constexpr double kBceClip = 1e-7;

/// -[y ln p + (1-y) ln(1-p)], averaged; p clipped to [1e-7, 1-1e-7].
template <typename DP, typename DT>
typename DP::Scalar binary_cross_entropy(const Eigen::ArrayBase<DP>& pred,
                                         const Eigen::ArrayBase<DT>& truth) {
  using S = typename DP::Scalar;
  const S lo = static_cast<S>(kBceClip);
  const S hi = S(1) - static_cast<S>(kBceClip);
  auto p = pred.min(hi).max(lo);
  return -(truth * p.log() + (S(1) - truth) * (S(1) - p).log()).sum() /
         static_cast<S>(pred.size());
}

template <typename T>
T bce_loss(const Tensor<T>& pred, const Tensor<T>& truth) {
  COLONNET_CHECK(pred.same_shape(truth), "bce shape mismatch: ",
                 shape_string(pred.shape()), " vs ", shape_string(truth.shape()));
  COLONNET_CHECK(pred.size() > 0, "bce on empty tensors");
  return binary_cross_entropy(pred.array(), truth.array());
}

template <typename T>
T bce_loss(T pred, T truth) {
  Tensor<T> p({1}), y({1});
  p[0] = pred;
  y[0] = truth;
  return bce_loss(p, y);
}

template <typename T>
Tensor<T> bce_loss_grad(const Tensor<T>& pred, const Tensor<T>& truth) {
  COLONNET_CHECK(pred.same_shape(truth), "bce shape mismatch");
  const T lo = static_cast<T>(kBceClip);
  const T hi = T(1) - static_cast<T>(kBceClip);
  Tensor<T> g(pred.shape());
  auto p = pred.array().min(hi).max(lo);
  g.array() = (p - truth.array()) / (p * (T(1) - p)) / static_cast<T>(pred.size());
  return g;
}

// ---------------------------------------------------------------------------
// Focal Tversky (segmentation)
// ---------------------------------------------------------------------------

/// Soft-count Tversky index over flattened probability/target arrays:
///   TP = sum p*y, FN = sum (1-p)*y, FP = sum p*(1-y)
///   TI = (TP + eps) / (TP + alpha*FN + beta*FP + eps)
template <typename DP, typename DT>
typename DP::Scalar tversky_index(const Eigen::ArrayBase<DP>& pred,
                                  const Eigen::ArrayBase<DT>& truth,
                                  const FocalTverskyConfig& cfg) {
  using S = typename DP::Scalar;
  const S tp = (pred * truth).sum();
  const S fn = ((S(1) - pred) * truth).sum();
  const S fp = (pred * (S(1) - truth)).sum();
  const S eps = static_cast<S>(cfg.epsilon);
  return (tp + eps) /
         (tp + static_cast<S>(cfg.alpha) * fn + static_cast<S>(cfg.beta) * fp + eps);
}

/// (1 - TI)^gamma on flattened arrays; pixel order is irrelevant.
template <typename DP, typename DT>
typename DP::Scalar focal_tversky(const Eigen::ArrayBase<DP>& pred,
                                  const Eigen::ArrayBase<DT>& truth,
                                  const FocalTverskyConfig& cfg) {
  using S = typename DP::Scalar;
  const S ti = tversky_index(pred, truth, cfg);
  const S base = ti < S(1) ? S(1) - ti : S(0);
  return std::pow(base, static_cast<S>(cfg.gamma));
}

template <typename T>
T focal_tversky_loss(const Tensor<T>& pred, const Tensor<T>& truth,
                     const FocalTverskyConfig& cfg = {}) {
  cfg.validate();
  COLONNET_CHECK(pred.same_shape(truth), "focal tversky shape mismatch: ",
                 shape_string(pred.shape()), " vs ", shape_string(truth.shape()));
  COLONNET_CHECK(pred.size() > 0, "focal tversky on empty tensors");
  return focal_tversky(pred.array(), truth.array(), cfg);
}

template <typename T>
Tensor<T> focal_tversky_loss_grad(const Tensor<T>& pred, const Tensor<T>& truth,
                                  const FocalTverskyConfig& cfg = {}) {
  cfg.validate();
  COLONNET_CHECK(pred.same_shape(truth), "focal tversky shape mismatch");
  const T alpha = static_cast<T>(cfg.alpha);
  const T beta = static_cast<T>(cfg.beta);
  const T gamma = static_cast<T>(cfg.gamma);
  const T eps = static_cast<T>(cfg.epsilon);

  auto p = pred.array();
  auto y = truth.array();
  const T tp = (p * y).sum();
  const T fn = ((T(1) - p) * y).sum();
  const T fp = (p * (T(1) - y)).sum();
  const T num = tp + eps;
  const T den = tp + alpha * fn + beta * fp + eps;
  const T ti = num / den;
  const T base = ti < T(1) ? T(1) - ti : T(0);

  Tensor<T> g(pred.shape());
  if (base <= T(0)) {
    g.set_zero();
    return g;
  }
  // dTI/dp_i = [y_i*den - num*(y_i - alpha*y_i + beta*(1-y_i))] / den^2
  const T scale = -gamma * std::pow(base, gamma - T(1)) / (den * den);
  g.array() = scale * (y * den - num * (y * (T(1) - alpha) + beta * (T(1) - y)));
  return g;
}

/// Per-image focal Tversky averaged over the batch. pred is (B, H, W, 1)
/// probabilities, truth (B, H, W) binary targets.
template <typename T>
T focal_tversky_batch_loss(const Tensor<T>& pred, const Tensor<T>& truth,
                           const FocalTverskyConfig& cfg = {}) {
  cfg.validate();
  const Eigen::Index batch = pred.dim(0);
  COLONNET_CHECK(truth.dim(0) == batch && pred.size() == truth.size(),
                 "focal tversky batch shape mismatch");
  const Eigen::Index pixels = pred.size() / batch;
  T total = T(0);
  for (Eigen::Index b = 0; b < batch; ++b) {
    Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>> p(pred.data() + b * pixels,
                                                           pixels);
    Eigen::Map<const Eigen::Array<T, Eigen::Dynamic, 1>> y(truth.data() + b * pixels,
                                                           pixels);
    total += focal_tversky(p, y, cfg);
  }
  return total / static_cast<T>(batch);
}

template <typename T>
Tensor<T> focal_tversky_batch_loss_grad(const Tensor<T>& pred, const Tensor<T>& truth,
                                        const FocalTverskyConfig& cfg = {}) {
  const Eigen::Index batch = pred.dim(0);
  COLONNET_CHECK(truth.dim(0) == batch && pred.size() == truth.size(),
                 "focal tversky batch shape mismatch");
  const Eigen::Index pixels = pred.size() / batch;
  Tensor<T> g(pred.shape());
  for (Eigen::Index b = 0; b < batch; ++b) {
    Tensor<T> p({pixels}), y({pixels});
    std::memcpy(p.data(), pred.data() + b * pixels,
                static_cast<std::size_t>(pixels) * sizeof(T));
    std::memcpy(y.data(), truth.data() + b * pixels,
                static_cast<std::size_t>(pixels) * sizeof(T));
    Tensor<T> gi = focal_tversky_loss_grad(p, y, cfg);
    for (Eigen::Index i = 0; i < pixels; ++i) {
      g[b * pixels + i] = gi[i] / static_cast<T>(batch);
    }
  }
  return g;
}

}  // namespace colonnet
