#pragma once

#include <algorithm>
#include <cmath>

#include "colonnet/backbone.hpp"
#include "colonnet/heads.hpp"
#include "colonnet/image_ops.hpp"
#include "colonnet/tensor.hpp"

namespace colonnet {

/// Class-activation heatmap at feature resolution plus its image-sized
/// upsampling. Both live in [0,1]; an all-zero map stays all-zero.
struct Heatmap {
  Tensorf values;     // (h, w)
  Tensorf upsampled;  // (H, W)
};

/// Rectify negatives, then scale so the maximum is 1 (idempotent; an
/// all-zero map is left untouched).
template <typename T>
Tensor<T> normalize_heatmap(const Tensor<T>& raw) {
  Tensor<T> out(raw.shape());
  out.array() = raw.array().max(T(0));
  const T peak = out.size() > 0 ? out.array().maxCoeff() : T(0);
  if (peak > T(0)) out.array() /= peak;
  return out;
}

/// Gradient-weighted activation map: channel weights are the global average
/// of the logit gradient over the feature grid, the map is the rectified
/// weighted channel sum, normalized to [0,1].
template <typename T>
Tensor<T> cam_from_features(const Tensor<T>& features, const Tensor<T>& grads) {
  COLONNET_CHECK(features.rank() == 4 && features.dim(0) == 1,
                 "cam expects single-image (1, h, w, C) features, got ",
                 shape_string(features.shape()));
  COLONNET_CHECK(features.same_shape(grads), "cam feature/gradient shape mismatch");
  const Eigen::Index h = features.dim(1), w = features.dim(2), c = features.dim(3);
  // weights: (1, h*w, C) columns averaged -> C
  auto gmat = grads.matrix(h * w, c);
  Eigen::Matrix<T, Eigen::Dynamic, 1> weights =
      gmat.colwise().mean().transpose();
  Tensor<T> cam({h, w});
  cam.vec() = features.matrix(h * w, c) * weights;
  return normalize_heatmap(cam);
}

/// Full pipeline on one image: forward through the backbone, differentiate
/// the pre-sigmoid bleeding logit w.r.t. the final feature map, fold into a
/// normalized heatmap, and bilinearly upsample to image size. Needs
/// exclusive access to the heads (they cache per call); the backbone runs
/// in inference mode.
template <typename T>
Heatmap compute_cam(Backbone<T>& backbone, ColonSegHeads<T>& heads,
                    const Tensor<T>& image) {
  COLONNET_CHECK(image.rank() == 3 && image.dim(2) == 3,
                 "compute_cam expects an (S, S, 3) image, got ",
                 shape_string(image.shape()));
  const Eigen::Index s = image.dim(0);
  Tensor<T> batch = image.reshaped({1, image.dim(0), image.dim(1), 3});
  Tensor<T> features = backbone.forward(batch, false);

  nn::zero_grads(heads.cls_params());
  (void)heads.cls_logits(features, true);
  Tensor<T> grad_logit({1, 1});
  grad_logit[0] = T(1);
  Tensor<T> grad_features = heads.cls_backward_from_logits(grad_logit);
  nn::zero_grads(heads.cls_params());

  Heatmap map;
  map.values = cam_from_features(features, grad_features);
  map.upsampled = bilinear_resize(map.values, s, image.dim(1));
  return map;
}

/// Blue-to-red colormap for heatmap rendering.
inline void heat_color(double v, float rgb[3]) {
  v = std::clamp(v, 0.0, 1.0);
  rgb[0] = static_cast<float>(std::clamp(1.5 - std::abs(4.0 * v - 3.0), 0.0, 1.0));
  rgb[1] = static_cast<float>(std::clamp(1.5 - std::abs(4.0 * v - 2.0), 0.0, 1.0));
  rgb[2] = static_cast<float>(std::clamp(1.5 - std::abs(4.0 * v - 1.0), 0.0, 1.0));
}

/// Alpha-blend the color-mapped heatmap over the image. alpha 0 returns the
/// image unchanged; alpha 1 returns the pure colormap.
inline Tensorf overlay(const Tensorf& image, const Tensorf& heatmap, double alpha = 0.4) {
  COLONNET_CHECK(alpha >= 0.0 && alpha <= 1.0, "overlay alpha must be in [0,1], got ",
                 alpha);
  COLONNET_CHECK(image.rank() == 3 && image.dim(2) == 3, "overlay expects HxWx3 image");
  COLONNET_CHECK(heatmap.rank() == 2 && heatmap.dim(0) == image.dim(0) &&
                     heatmap.dim(1) == image.dim(1),
                 "overlay heatmap must match image extent, got ",
                 shape_string(heatmap.shape()));
  Tensorf out(image.shape());
  const auto a = static_cast<float>(alpha);
  for (Eigen::Index y = 0; y < image.dim(0); ++y) {
    for (Eigen::Index x = 0; x < image.dim(1); ++x) {
      float rgb[3];
      heat_color(static_cast<double>(heatmap(y, x)), rgb);
      for (Eigen::Index ch = 0; ch < 3; ++ch) {
        out(y, x, ch) = (1.0f - a) * image(y, x, ch) + a * rgb[ch];
      }
    }
  }
  return out;
}

/// Draw a normalized corner-form box onto the image as a 2-pixel outline.
inline Tensorf draw_bbox(const Tensorf& image, const BoundingBox& box,
                         float r = 0.1f, float g = 1.0f, float b = 0.1f) {
  box.validate("draw_bbox");
  COLONNET_CHECK(image.rank() == 3 && image.dim(2) == 3,
                 "draw_bbox expects HxWx3 image");
  const Eigen::Index h = image.dim(0), w = image.dim(1);
  auto clampi = [](Eigen::Index v, Eigen::Index hi) {
    return std::min(std::max<Eigen::Index>(v, 0), hi - 1);
  };
  const Eigen::Index x0 = clampi(static_cast<Eigen::Index>(box.x_min * static_cast<double>(w)), w);
  const Eigen::Index x1 = clampi(static_cast<Eigen::Index>(box.x_max * static_cast<double>(w)) - 1, w);
  const Eigen::Index y0 = clampi(static_cast<Eigen::Index>(box.y_min * static_cast<double>(h)), h);
  const Eigen::Index y1 = clampi(static_cast<Eigen::Index>(box.y_max * static_cast<double>(h)) - 1, h);
  Tensorf out = image;
  auto paint = [&](Eigen::Index y, Eigen::Index x) {
    out(y, x, 0) = r;
    out(y, x, 1) = g;
    out(y, x, 2) = b;
  };
  for (Eigen::Index t = 0; t < 2; ++t) {
    for (Eigen::Index x = x0; x <= x1; ++x) {
      paint(clampi(y0 + t, h), x);
      paint(clampi(y1 - t, h), x);
    }
    for (Eigen::Index y = y0; y <= y1; ++y) {
      paint(y, clampi(x0 + t, w));
      paint(y, clampi(x1 - t, w));
    }
  }
  return out;
}

}  // namespace colonnet
