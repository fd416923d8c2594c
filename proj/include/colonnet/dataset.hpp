#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "colonnet/image_ops.hpp"
#include "colonnet/tensor.hpp"

namespace colonnet {

/// Axis-aligned rectangle in normalized [0,1] corner coordinates.
struct BoundingBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  void validate(const std::string& context = "bounding box") const {
    COLONNET_CHECK(0.0 <= x_min && x_min < x_max && x_max <= 1.0,
                   context, ": need 0 <= x_min < x_max <= 1, got x_min=", x_min,
                   " x_max=", x_max);
    COLONNET_CHECK(0.0 <= y_min && y_min < y_max && y_max <= 1.0,
                   context, ": need 0 <= y_min < y_max <= 1, got y_min=", y_min,
                   " y_max=", y_max);
  }

  double area() const { return (x_max - x_min) * (y_max - y_min); }

  bool operator==(const BoundingBox&) const = default;
};

/// One dataset frame: RGB image in [0,1], binary bleeding label, and the
/// optional localization annotations (normalized box, per-pixel mask).
struct ImageSample {
  std::string id;
  Tensorf image;  // {H, W, 3}
  int label = 0;  // 1 = bleeding
  std::optional<BoundingBox> bbox;
  std::optional<MaskTensor> mask;  // {H, W}, values in {0, 1}

  Eigen::Index height() const { return image.dim(0); }
  Eigen::Index width() const { return image.dim(1); }

  void validate() const {
    COLONNET_CHECK(image.rank() == 3 && image.dim(2) == 3,
                   "sample '", id, "': image must be HxWx3, got ",
                   shape_string(image.shape()));
    COLONNET_CHECK(label == 0 || label == 1, "sample '", id,
                   "': label must be 0 or 1, got ", label);
    COLONNET_CHECK(!bbox || label == 1, "sample '", id,
                   "': bbox present but label is 0");
    if (bbox) bbox->validate("sample '" + id + "'");
    if (mask) {
      COLONNET_CHECK(mask->rank() == 2 && mask->dim(0) == height() &&
                         mask->dim(1) == width(),
                     "sample '", id, "': mask shape ",
                     shape_string(mask->shape()), " does not match image ",
                     height(), "x", width());
    }
  }
};

struct AugmentationConfig {
  double flip_h_prob = 0.5;
  double flip_v_prob = 0.5;
  std::vector<int> rotation_choices = {0, 90, 180, 270};
  Eigen::Index target_size = 224;
  bool ablation_contrast = false;

  void validate() const {
    COLONNET_CHECK(flip_h_prob >= 0.0 && flip_h_prob <= 1.0,
                   "flip_h_prob must be in [0,1], got ", flip_h_prob);
    COLONNET_CHECK(flip_v_prob >= 0.0 && flip_v_prob <= 1.0,
                   "flip_v_prob must be in [0,1], got ", flip_v_prob);
    COLONNET_CHECK(!rotation_choices.empty(), "rotation_choices must not be empty");
    for (int deg : rotation_choices) {
      COLONNET_CHECK(deg % 90 == 0, "rotation must be a multiple of 90 degrees, got ",
                     deg);
    }
    COLONNET_CHECK(target_size > 0, "target_size must be positive, got ", target_size);
  }
};

// --- bbox coordinate maps (pure, exact) -------------------------------------

inline BoundingBox flip_horizontal_bbox(const BoundingBox& b) {
  return {1.0 - b.x_max, b.y_min, 1.0 - b.x_min, b.y_max};
}

inline BoundingBox flip_vertical_bbox(const BoundingBox& b) {
  return {b.x_min, 1.0 - b.y_max, b.x_max, 1.0 - b.y_min};
}

/// k*90 degrees counter-clockwise: apply (x, y) -> (y, 1-x) to all four
/// corners and retake the min/max corner form.
inline BoundingBox rotate90_bbox(const BoundingBox& b, int k) {
  k = ((k % 4) + 4) % 4;
  double xs[4] = {b.x_min, b.x_max, b.x_min, b.x_max};
  double ys[4] = {b.y_min, b.y_min, b.y_max, b.y_max};
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < k; ++j) {
      const double nx = ys[i];
      const double ny = 1.0 - xs[i];
      xs[i] = nx;
      ys[i] = ny;
    }
  }
  return {*std::min_element(xs, xs + 4), *std::min_element(ys, ys + 4),
          *std::max_element(xs, xs + 4), *std::max_element(ys, ys + 4)};
}

// --- sample-level geometric transforms ---------------------------------------

inline ImageSample flip_horizontal(const ImageSample& s) {
  ImageSample out = s;
  out.image = flip_horizontal_image(s.image);
  if (s.mask) out.mask = flip_horizontal_image(*s.mask);
  if (s.bbox) out.bbox = flip_horizontal_bbox(*s.bbox);
  return out;
}

inline ImageSample flip_vertical(const ImageSample& s) {
  ImageSample out = s;
  out.image = flip_vertical_image(s.image);
  if (s.mask) out.mask = flip_vertical_image(*s.mask);
  if (s.bbox) out.bbox = flip_vertical_bbox(*s.bbox);
  return out;
}

inline ImageSample rotate90(const ImageSample& s, int k) {
  COLONNET_CHECK(s.height() == s.width(), "rotate90 requires a square image; sample '",
                 s.id, "' is ", s.height(), "x", s.width());
  ImageSample out = s;
  out.image = rot90_image(s.image, k);
  if (s.mask) out.mask = rot90_image(*s.mask, k);
  if (s.bbox) out.bbox = rotate90_bbox(*s.bbox, k);
  return out;
}

/// Bilinear on the image, nearest-neighbor on the mask (preserves binarity);
/// normalized bbox coordinates are resolution-independent and stay put.
inline ImageSample resize(const ImageSample& s, Eigen::Index target_size) {
  COLONNET_CHECK(target_size > 0, "target_size must be positive, got ", target_size);
  ImageSample out = s;
  if (s.height() != target_size || s.width() != target_size) {
    out.image = bilinear_resize(s.image, target_size, target_size);
    if (s.mask) out.mask = nearest_resize(*s.mask, target_size, target_size);
  }
  return out;
}

/// Local contrast enhancement, 3x3 erosion, then 3x3 dilation on the image
/// only; mask and bbox untouched. Off by default (it makes training worse).
inline ImageSample apply_contrast_ablation(const ImageSample& s) {
  ImageSample out = s;
  out.image = dilate3x3(erode3x3(local_contrast_enhance(s.image)));
  return out;
}

/// Random flips at the configured probabilities, one uniformly drawn 90-degree
/// rotation, then resize to the target size. Deterministic given the rng state;
/// the label never changes and bbox/mask move with the image.
inline ImageSample augment(const ImageSample& sample, const AugmentationConfig& cfg,
                           Rng& rng) {
  cfg.validate();
  ImageSample out = sample;
  if (rng.bernoulli(cfg.flip_h_prob)) out = flip_horizontal(out);
  if (rng.bernoulli(cfg.flip_v_prob)) out = flip_vertical(out);
  const int deg = cfg.rotation_choices[rng.uniform_index(cfg.rotation_choices.size())];
  if (deg % 360 != 0) out = rotate90(out, deg / 90);
  out = resize(out, cfg.target_size);
  if (cfg.ablation_contrast) out = apply_contrast_ablation(out);
  return out;
}

/// Deterministic shuffle-then-cut split; |train| = round(fraction * N).
inline std::pair<std::vector<ImageSample>, std::vector<ImageSample>> split_dataset(
    const std::vector<ImageSample>& samples, double train_fraction,
    std::uint64_t seed) {
  COLONNET_CHECK(train_fraction > 0.0 && train_fraction < 1.0,
                 "train_fraction must be in (0,1), got ", train_fraction);
  COLONNET_CHECK(samples.size() >= 2, "need at least 2 samples to split, got ",
                 samples.size());
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  shuffle(order, rng);
  const auto n_train = static_cast<std::size_t>(
      std::llround(train_fraction * static_cast<double>(samples.size())));
  std::pair<std::vector<ImageSample>, std::vector<ImageSample>> out;
  out.first.reserve(n_train);
  out.second.reserve(samples.size() - n_train);
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_train ? out.first : out.second).push_back(samples[order[i]]);
  }
  return out;
}

/// Loads `root/images/*.png` (+ optional masks and annotation rows) into
/// samples sorted by id. See dataset.cpp for the directory contract.
std::vector<ImageSample> load_dataset(const std::string& root_path);

}  // namespace colonnet
