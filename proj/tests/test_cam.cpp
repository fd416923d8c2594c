#include "doctest.h"

#include <cmath>

#include "colonnet/cam.hpp"
#include "flip_sym.hpp"

using namespace colonnet;

TEST_CASE("normalize heatmap rectifies and rescales") {
  Tensorf raw({1, 3});
  raw[0] = -1.0f;
  raw[1] = 0.5f;
  raw[2] = 2.0f;
  Tensorf out = normalize_heatmap(raw);
  CHECK(out[0] == 0.0f);
  CHECK(out[1] == doctest::Approx(0.25));
  CHECK(out[2] == 1.0f);

  // Idempotent: a normalized map renormalizes to itself.
  Tensorf again = normalize_heatmap(out);
  for (Eigen::Index i = 0; i < out.size(); ++i) CHECK(again[i] == out[i]);

  Tensorf zeros({2, 2});
  Tensorf still = normalize_heatmap(zeros);
  for (Eigen::Index i = 0; i < still.size(); ++i) CHECK(still[i] == 0.0f);
}

TEST_CASE("single channel cam reproduces the rectified feature map") {
  Tensorf features({1, 2, 2, 1});
  features[0] = 0.5f;
  features[1] = -1.0f;
  features[2] = 2.0f;
  features[3] = 1.0f;
  Tensorf grads(features.shape());
  for (Eigen::Index i = 0; i < grads.size(); ++i) grads[i] = 1.0f;

  Tensorf cam = cam_from_features(features, grads);
  REQUIRE(cam.rank() == 2);
  CHECK(cam.dim(0) == 2);
  CHECK(cam.dim(1) == 2);
  CHECK(cam(0, 0) == doctest::Approx(0.25));
  CHECK(cam(0, 1) == 0.0f);  // rectified negative
  CHECK(cam(1, 0) == 1.0f);
  CHECK(cam(1, 1) == doctest::Approx(0.5));
}

TEST_CASE("cam weights channels by mean gradient") {
  // Channel 0 gradient averages to 1, channel 1 to 0, so only channel 0
  // contributes to the map.
  Tensorf features({1, 1, 2, 2});
  features(0, 0, 0, 0) = 3.0f;
  features(0, 0, 0, 1) = 100.0f;
  features(0, 0, 1, 0) = 1.0f;
  features(0, 0, 1, 1) = -50.0f;
  Tensorf grads(features.shape());
  grads(0, 0, 0, 0) = 1.0f;
  grads(0, 0, 0, 1) = 0.5f;
  grads(0, 0, 1, 0) = 1.0f;
  grads(0, 0, 1, 1) = -0.5f;
  Tensorf cam = cam_from_features(features, grads);
  CHECK(cam(0, 0) == 1.0f);
  CHECK(cam(0, 1) == doctest::Approx(1.0 / 3.0));

  CHECK_THROWS(cam_from_features(Tensorf({2, 1, 2, 2}), Tensorf({2, 1, 2, 2})));
  CHECK_THROWS(cam_from_features(features, Tensorf({1, 1, 2, 1})));
}

TEST_CASE("full cam pipeline on the small backbone") {
  BackboneSpec spec;
  spec.name = "tiny";
  spec.input_size = 64;
  Rng rng(21);
  Backbone<float> backbone(spec, rng);
  HeadConfig hcfg;
  hcfg.cls_widths = {8};
  hcfg.det_widths = {8};
  ColonSegHeads<float> heads(hcfg, spec.feature_shape(), rng);

  Tensorf image({64, 64, 3});
  Rng img_rng(22);
  for (Eigen::Index i = 0; i < image.size(); ++i) {
    image[i] = static_cast<float>(img_rng.uniform());
  }

  Heatmap map = compute_cam(backbone, heads, image);
  REQUIRE(map.values.rank() == 2);
  CHECK(map.values.dim(0) == 2);
  CHECK(map.values.dim(1) == 2);
  REQUIRE(map.upsampled.rank() == 2);
  CHECK(map.upsampled.dim(0) == 64);
  CHECK(map.upsampled.dim(1) == 64);

  float peak = 0.0f;
  for (Eigen::Index i = 0; i < map.values.size(); ++i) {
    CHECK(map.values[i] >= 0.0f);
    CHECK(map.values[i] <= 1.0f);
    peak = std::max(peak, map.values[i]);
  }
  CHECK(peak == 1.0f);  // normalization pins the maximum
  for (Eigen::Index i = 0; i < map.upsampled.size(); ++i) {
    CHECK(map.upsampled[i] >= 0.0f);
    CHECK(map.upsampled[i] <= 1.0f);
  }

  // Deterministic: same inputs, same map.
  Heatmap map2 = compute_cam(backbone, heads, image);
  for (Eigen::Index i = 0; i < map.values.size(); ++i) {
    CHECK(map2.values[i] == map.values[i]);
  }

  CHECK_THROWS(compute_cam(backbone, heads, Tensorf({64, 64, 1})));
}

TEST_CASE("cam commutes with horizontal flips on a symmetrized model") {
  BackboneSpec spec;
  spec.name = "tiny";
  spec.input_size = 64;
  Rng rng(23);
  Backbone<float> backbone(spec, rng);
  HeadConfig hcfg;
  hcfg.cls_widths = {8};
  hcfg.det_widths = {8};
  ColonSegHeads<float> heads(hcfg, spec.feature_shape(), rng);

  flip_sym::symmetrize_conv_kernels(backbone.params());
  const Shape fshape = spec.feature_shape();
  flip_sym::symmetrize_cls_entry(heads, fshape[0], fshape[1], fshape[2]);

  Tensorf image({64, 64, 3});
  Rng img_rng(24);
  for (Eigen::Index i = 0; i < image.size(); ++i) {
    image[i] = static_cast<float>(img_rng.uniform());
  }

  Heatmap plain = compute_cam(backbone, heads, image);
  Heatmap flipped = compute_cam(backbone, heads, flip_horizontal_image(image));

  Tensorf want_values = flip_horizontal_image(plain.values);
  float worst = 0.0f;
  for (Eigen::Index i = 0; i < want_values.size(); ++i) {
    worst = std::max(worst, std::fabs(flipped.values[i] - want_values[i]));
  }
  CHECK(worst < 1e-3f);

  Tensorf want_up = flip_horizontal_image(plain.upsampled);
  worst = 0.0f;
  for (Eigen::Index i = 0; i < want_up.size(); ++i) {
    worst = std::max(worst, std::fabs(flipped.upsampled[i] - want_up[i]));
  }
  CHECK(worst < 1e-3f);
}

TEST_CASE("overlay blends image with the colormap") {
  Tensorf image({2, 2, 3});
  for (Eigen::Index i = 0; i < image.size(); ++i) image[i] = 0.5f;
  Tensorf heat({2, 2});
  heat(0, 0) = 0.0f;
  heat(0, 1) = 1.0f;
  heat(1, 0) = 0.5f;
  heat(1, 1) = 0.25f;

  Tensorf same = overlay(image, heat, 0.0);
  for (Eigen::Index i = 0; i < image.size(); ++i) CHECK(same[i] == image[i]);

  Tensorf pure = overlay(image, heat, 1.0);
  // The jet-style ramp tapers at its ends: v = 1 is red-only at half
  // intensity, v = 0 blue-only, and mid values pass through green.
  CHECK(pure(0, 1, 0) == doctest::Approx(0.5));
  CHECK(pure(0, 1, 1) == doctest::Approx(0.0));
  CHECK(pure(0, 1, 2) == doctest::Approx(0.0));
  CHECK(pure(0, 0, 0) == doctest::Approx(0.0));
  CHECK(pure(0, 0, 1) == doctest::Approx(0.0));
  CHECK(pure(0, 0, 2) == doctest::Approx(0.5));
  CHECK(pure(1, 0, 1) == doctest::Approx(1.0));  // v = 0.5 peaks in green

  Tensorf mixed = overlay(image, heat, 0.4);
  for (Eigen::Index i = 0; i < mixed.size(); ++i) {
    CHECK(mixed[i] >= 0.0f);
    CHECK(mixed[i] <= 1.0f);
  }
  CHECK_THROWS(overlay(image, Tensorf({3, 2})));
  CHECK_THROWS(overlay(image, heat, 1.5));
}

TEST_CASE("draw bbox paints an outline inside the box") {
  Tensorf image({16, 16, 3});  // all black
  BoundingBox box{0.25, 0.25, 0.75, 0.75};
  Tensorf painted = draw_bbox(image, box);
  // A corner pixel of the outline takes the pen color.
  CHECK(painted(4, 4, 1) == doctest::Approx(1.0));
  // The centre stays untouched.
  CHECK(painted(8, 8, 1) == 0.0f);
  // Pixels well outside stay untouched.
  CHECK(painted(0, 0, 1) == 0.0f);
}
