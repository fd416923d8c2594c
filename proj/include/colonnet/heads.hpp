#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "colonnet/backbone.hpp"
#include "colonnet/dataset.hpp"
#include "colonnet/nn/layers.hpp"

namespace colonnet {

/// Widths of the fully connected stacks behind the two heads. The
/// classification stack is rectified throughout; the detection stack
/// alternates rectified-linear and exponential-linear units.
struct HeadConfig {
  std::vector<Eigen::Index> cls_widths = {512, 128};
  std::vector<Eigen::Index> det_widths = {512, 256, 64};

  void validate() const {
    COLONNET_CHECK(!cls_widths.empty(), "heads.cls_widths must not be empty");
    COLONNET_CHECK(!det_widths.empty(), "heads.det_widths must not be empty");
    for (auto w : cls_widths) {
      COLONNET_CHECK(w > 0, "heads.cls_widths entries must be positive, got ", w);
    }
    for (auto w : det_widths) {
      COLONNET_CHECK(w > 0, "heads.det_widths entries must be positive, got ", w);
    }
  }
};

/// One per-image prediction from the ColonSeg branch.
struct ColonSegOutput {
  double bleed_prob = 0.0;
  BoundingBox bbox;
};

/// Map a raw sigmoid 4-vector (a, b, c, d) onto a valid corner-form box:
/// x bounds from {a, c}, y bounds from {b, d}, degenerate sides nudged open.
inline BoundingBox corner_sorted_box(double a, double b, double c, double d) {
  BoundingBox box{std::min(a, c), std::min(b, d), std::max(a, c), std::max(b, d)};
  constexpr double kMinSide = 1e-6;
  if (box.x_max <= box.x_min) {
    if (box.x_min + kMinSide <= 1.0) {
      box.x_max = box.x_min + kMinSide;
    } else {
      box.x_min = box.x_max - kMinSide;
    }
  }
  if (box.y_max <= box.y_min) {
    if (box.y_min + kMinSide <= 1.0) {
      box.y_max = box.y_min + kMinSide;
    } else {
      box.y_min = box.y_max - kMinSide;
    }
  }
  return box;
}

/// 1 iff bleed_prob >= threshold (boundary counts as positive).
inline int classify(const ColonSegOutput& out, double threshold = 0.5) {
  COLONNET_CHECK(threshold > 0.0 && threshold < 1.0,
                 "classification threshold must be in (0,1), got ", threshold);
  return out.bleed_prob >= threshold ? 1 : 0;
}

/// The two ColonSeg heads on top of a shared feature map. The classification
/// sigmoid is kept outside the dense stack so the pre-sigmoid logit (and its
/// gradient, needed for activation maps) stays addressable.
template <typename T>
class ColonSegHeads {
 public:
  ColonSegHeads(const HeadConfig& cfg, const Shape& feature_shape, Rng& rng)
      : config_(cfg) {
    cfg.validate();
    COLONNET_CHECK(feature_shape.size() == 3, "feature shape must be (h, w, C), got ",
                   shape_string(feature_shape));
    const Eigen::Index flat =
        feature_shape[0] * feature_shape[1] * feature_shape[2];

    cls_.template emplace<nn::Flatten<T>>("flatten");
    Eigen::Index prev = flat;
    for (std::size_t i = 0; i < cfg.cls_widths.size(); ++i) {
      cls_.template emplace<nn::Dense<T>>("fc" + std::to_string(i + 1), prev,
                                          cfg.cls_widths[i], rng);
      cls_.template emplace<nn::ReLU<T>>("relu" + std::to_string(i + 1));
      prev = cfg.cls_widths[i];
    }
    cls_.template emplace<nn::Dense<T>>("out", prev, 1, rng);

    det_.template emplace<nn::Flatten<T>>("flatten");
    prev = flat;
    for (std::size_t i = 0; i < cfg.det_widths.size(); ++i) {
      det_.template emplace<nn::Dense<T>>("fc" + std::to_string(i + 1), prev,
                                          cfg.det_widths[i], rng);
      if (i % 2 == 0) {
        det_.template emplace<nn::ReLU<T>>("relu" + std::to_string(i + 1));
      } else {
        det_.template emplace<nn::ELU<T>>("elu" + std::to_string(i + 1));
      }
      prev = cfg.det_widths[i];
    }
    det_.template emplace<nn::Dense<T>>("out", prev, 4, rng);
    det_.template emplace<nn::Sigmoid<T>>("sigmoid");
  }

  const HeadConfig& config() const { return config_; }

  /// Pre-sigmoid classification scores, shape (B, 1).
  Tensor<T> cls_logits(const Tensor<T>& features, bool train) {
    return cls_.forward(features, train);
  }

  /// Bleeding probabilities in (0, 1), shape (B, 1).
  Tensor<T> cls_probs(const Tensor<T>& features, bool train) {
    return cls_sig_.forward(cls_.forward(features, train), train);
  }

  /// Gradient w.r.t. features from a gradient w.r.t. probabilities.
  Tensor<T> cls_backward(const Tensor<T>& grad_probs) {
    return cls_.backward(cls_sig_.backward(grad_probs));
  }

  /// Gradient w.r.t. features from a gradient w.r.t. raw logits,
  /// bypassing the sigmoid (activation-map path).
  Tensor<T> cls_backward_from_logits(const Tensor<T>& grad_logits) {
    return cls_.backward(grad_logits);
  }

  /// Raw sigmoid-bounded box coordinates, shape (B, 4).
  Tensor<T> det_boxes(const Tensor<T>& features, bool train) {
    return det_.forward(features, train);
  }

  Tensor<T> det_backward(const Tensor<T>& grad_boxes) {
    return det_.backward(grad_boxes);
  }

  void collect(const std::string& prefix, nn::ParamRefs<T>& out) {
    cls_.collect(prefix + ".cls", out);
    det_.collect(prefix + ".det", out);
  }

  nn::ParamRefs<T> cls_params() {
    nn::ParamRefs<T> out;
    cls_.collect("heads.cls", out);
    return out;
  }

  nn::ParamRefs<T> det_params() {
    nn::ParamRefs<T> out;
    det_.collect("heads.det", out);
    return out;
  }

 private:
  HeadConfig config_;
  nn::Sequential<T> cls_, det_;
  nn::Sigmoid<T> cls_sig_;
};

/// Full ColonSeg inference: backbone features -> per-image probability + box.
template <typename T>
std::vector<ColonSegOutput> colonseg_forward(Backbone<T>& backbone,
                                             ColonSegHeads<T>& heads,
                                             const Tensor<T>& batch) {
  Tensor<T> f = backbone.forward(batch, false);
  Tensor<T> probs = heads.cls_probs(f, false);
  Tensor<T> boxes = heads.det_boxes(f, false);
  std::vector<ColonSegOutput> out(static_cast<std::size_t>(batch.dim(0)));
  for (Eigen::Index b = 0; b < batch.dim(0); ++b) {
    auto& o = out[static_cast<std::size_t>(b)];
    o.bleed_prob = static_cast<double>(probs(b, 0));
    o.bbox = corner_sorted_box(boxes(b, 0), boxes(b, 1), boxes(b, 2), boxes(b, 3));
  }
  return out;
}

}  // namespace colonnet
