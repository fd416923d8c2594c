#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "colonnet/dataset.hpp"
#include "colonnet/png_io.hpp"

using namespace colonnet;
namespace fs = std::filesystem;

namespace {

ImageSample make_sample(Eigen::Index size = 16) {
  ImageSample s;
  s.id = "t";
  s.label = 1;
  s.image = Tensorf({size, size, 3});
  Rng rng(5);
  for (Eigen::Index i = 0; i < s.image.size(); ++i) {
    s.image[i] = static_cast<float>(rng.uniform());
  }
  MaskTensor mask({size, size});
  mask.set_zero();
  // Rectangle rows 2..4, cols 5..9 (inclusive).
  for (Eigen::Index y = 2; y <= 4; ++y) {
    for (Eigen::Index x = 5; x <= 9; ++x) mask(y, x) = 1;
  }
  s.mask = mask;
  const double n = static_cast<double>(size);
  s.bbox = BoundingBox{5.0 / n, 2.0 / n, 10.0 / n, 5.0 / n};
  return s;
}

BoundingBox tight_box_of(const MaskTensor& mask) {
  const Eigen::Index h = mask.dim(0), w = mask.dim(1);
  Eigen::Index r0 = h, r1 = -1, c0 = w, c1 = -1;
  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) {
      if (!mask(y, x)) continue;
      r0 = std::min(r0, y);
      r1 = std::max(r1, y);
      c0 = std::min(c0, x);
      c1 = std::max(c1, x);
    }
  }
  REQUIRE(r1 >= 0);
  return {static_cast<double>(c0) / static_cast<double>(w),
          static_cast<double>(r0) / static_cast<double>(h),
          static_cast<double>(c1 + 1) / static_cast<double>(w),
          static_cast<double>(r1 + 1) / static_cast<double>(h)};
}

bool same_box(const BoundingBox& a, const BoundingBox& b, double tol = 1e-12) {
  return std::fabs(a.x_min - b.x_min) <= tol && std::fabs(a.y_min - b.y_min) <= tol &&
         std::fabs(a.x_max - b.x_max) <= tol && std::fabs(a.y_max - b.y_max) <= tol;
}

bool same_sample(const ImageSample& a, const ImageSample& b) {
  if (a.label != b.label) return false;
  if (!a.image.same_shape(b.image)) return false;
  for (Eigen::Index i = 0; i < a.image.size(); ++i) {
    if (a.image[i] != b.image[i]) return false;
  }
  if (a.mask.has_value() != b.mask.has_value()) return false;
  if (a.mask) {
    for (Eigen::Index i = 0; i < a.mask->size(); ++i) {
      if ((*a.mask)[i] != (*b.mask)[i]) return false;
    }
  }
  if (a.bbox.has_value() != b.bbox.has_value()) return false;
  if (a.bbox && !same_box(*a.bbox, *b.bbox)) return false;
  return true;
}

}  // namespace

TEST_CASE("horizontal flip bbox and involution") {
  const BoundingBox b{0.1, 0.2, 0.4, 0.6};
  const BoundingBox f = flip_horizontal_bbox(b);
  CHECK(same_box(f, {0.6, 0.2, 0.9, 0.6}));

  const ImageSample s = make_sample();
  const ImageSample once = flip_horizontal(s);
  // Column 0 moved to column W-1.
  CHECK(once.image(3, 15, 0) == s.image(3, 0, 0));
  CHECK(same_sample(flip_horizontal(once), s));
}

TEST_CASE("vertical flip bbox and involution") {
  const BoundingBox b{0.1, 0.2, 0.4, 0.6};
  const BoundingBox f = flip_vertical_bbox(b);
  CHECK(same_box(f, {0.1, 0.4, 0.4, 0.8}));

  const ImageSample s = make_sample();
  const ImageSample once = flip_vertical(s);
  CHECK(once.image(15, 3, 1) == s.image(0, 3, 1));
  CHECK(same_sample(flip_vertical(once), s));
}

TEST_CASE("rotation bbox example, identity, and 4-cycle") {
  const BoundingBox b{0.1, 0.2, 0.4, 0.6};
  CHECK(same_box(rotate90_bbox(b, 0), b));
  CHECK(same_box(rotate90_bbox(b, 1), {0.2, 0.6, 0.6, 0.9}));
  CHECK(same_box(rotate90_bbox(rotate90_bbox(b, 2), 2), b));

  const ImageSample s = make_sample();
  CHECK(same_sample(rotate90(s, 0), s));
  ImageSample r = s;
  for (int i = 0; i < 4; ++i) r = rotate90(r, 1);
  CHECK(same_sample(r, s));
  CHECK(same_sample(rotate90(rotate90(s, 2), 2), s));

  // CCW quarter turn moves pixel (y, x) to (n-1-x, y).
  const ImageSample q = rotate90(s, 1);
  CHECK(q.image(15 - 7, 4, 2) == s.image(4, 7, 2));
}

TEST_CASE("rotation requires square images") {
  ImageSample s;
  s.id = "rect";
  s.label = 0;
  s.image = Tensorf({4, 6, 3});
  s.image.set_zero();
  CHECK_THROWS(rotate90(s, 1));
}

TEST_CASE("geometric transforms keep the bbox tight around the mask") {
  const ImageSample s = make_sample();
  REQUIRE(same_box(*s.bbox, tight_box_of(*s.mask)));
  for (const ImageSample& t :
       {flip_horizontal(s), flip_vertical(s), rotate90(s, 1), rotate90(s, 2),
        rotate90(s, 3), flip_vertical(rotate90(flip_horizontal(s), 1))}) {
    CHECK(same_box(*t.bbox, tight_box_of(*t.mask)));
  }
}

TEST_CASE("resize contract") {
  const ImageSample s = make_sample(16);
  const ImageSample r = resize(s, 8);
  CHECK(r.image.dim(0) == 8);
  CHECK(r.image.dim(1) == 8);
  CHECK(r.mask->dim(0) == 8);
  CHECK(same_box(*r.bbox, *s.bbox));

  const ImageSample same = resize(s, 16);
  CHECK(same_sample(same, s));

  ImageSample flat;
  flat.id = "flat";
  flat.label = 0;
  flat.image = Tensorf({6, 6, 3});
  for (Eigen::Index i = 0; i < flat.image.size(); ++i) flat.image[i] = 0.25f;
  const ImageSample up = resize(flat, 13);
  for (Eigen::Index i = 0; i < up.image.size(); ++i) {
    CHECK(up.image[i] == doctest::Approx(0.25f).epsilon(1e-6));
  }
}

TEST_CASE("split dataset cardinality and determinism") {
  std::vector<ImageSample> samples(10);
  for (int i = 0; i < 10; ++i) {
    samples[static_cast<std::size_t>(i)].id = "s" + std::to_string(i);
    samples[static_cast<std::size_t>(i)].label = 0;
    samples[static_cast<std::size_t>(i)].image = Tensorf({2, 2, 3});
    samples[static_cast<std::size_t>(i)].image.set_zero();
  }
  auto [train, val] = split_dataset(samples, 0.8, 7);
  CHECK(train.size() == 8);
  CHECK(val.size() == 2);

  std::vector<std::string> seen;
  for (const auto& s : train) seen.push_back(s.id);
  for (const auto& s : val) seen.push_back(s.id);
  std::sort(seen.begin(), seen.end());
  CHECK(std::unique(seen.begin(), seen.end()) == seen.end());
  CHECK(seen.size() == 10);

  auto [train2, val2] = split_dataset(samples, 0.8, 7);
  for (std::size_t i = 0; i < train.size(); ++i) CHECK(train[i].id == train2[i].id);
  auto [train3, val3] = split_dataset(samples, 0.8, 8);
  bool any_diff = false;
  for (std::size_t i = 0; i < train.size(); ++i) {
    any_diff = any_diff || train[i].id != train3[i].id;
  }
  CHECK(any_diff);

  CHECK_THROWS(split_dataset({samples[0]}, 0.8, 0));
  CHECK_THROWS(split_dataset(samples, 0.0, 0));
  CHECK_THROWS(split_dataset(samples, 1.0, 0));
}

TEST_CASE("split sizes for the reference cardinality") {
  std::vector<ImageSample> samples(2618);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    samples[i].id = "s" + std::to_string(i);
    samples[i].label = 0;
    samples[i].image = Tensorf({1, 1, 3});
    samples[i].image.set_zero();
  }
  auto [train, val] = split_dataset(samples, 0.8, 0);
  CHECK(train.size() == 2094);
  CHECK(val.size() == 524);
}

TEST_CASE("augment with zero probabilities is resize only") {
  AugmentationConfig cfg;
  cfg.flip_h_prob = 0.0;
  cfg.flip_v_prob = 0.0;
  cfg.rotation_choices = {0};
  cfg.target_size = 8;
  const ImageSample s = make_sample(16);
  Rng rng(1);
  const ImageSample a = augment(s, cfg, rng);
  CHECK(same_sample(a, resize(s, 8)));
}

TEST_CASE("augment is deterministic given the seed and keeps the label") {
  AugmentationConfig cfg;
  cfg.target_size = 16;
  const ImageSample s = make_sample(16);
  Rng r1(33), r2(33);
  const ImageSample a = augment(s, cfg, r1);
  const ImageSample b = augment(s, cfg, r2);
  CHECK(same_sample(a, b));
  CHECK(a.label == s.label);
}

TEST_CASE("flip frequency concentrates near one half") {
  AugmentationConfig cfg;
  cfg.flip_h_prob = 0.5;
  cfg.flip_v_prob = 0.0;
  cfg.rotation_choices = {0};
  cfg.target_size = 2;

  ImageSample s;
  s.id = "probe";
  s.label = 0;
  s.image = Tensorf({2, 2, 3});
  s.image.set_zero();
  s.image(0, 0, 0) = 1.0f;  // marker moves to (0,1) iff flipped

  Rng rng(2024);
  int flips = 0;
  for (int i = 0; i < 10000; ++i) {
    const ImageSample a = augment(s, cfg, rng);
    if (a.image(0, 1, 0) == 1.0f) ++flips;
  }
  const double freq = flips / 10000.0;
  CHECK(freq >= 0.47);
  CHECK(freq <= 0.53);
}

TEST_CASE("contrast ablation is image-only and tames a lone bright pixel") {
  ImageSample flat;
  flat.id = "flat";
  flat.label = 1;
  flat.image = Tensorf({5, 5, 3});
  for (Eigen::Index i = 0; i < flat.image.size(); ++i) flat.image[i] = 0.5f;
  MaskTensor m({5, 5});
  m.set_zero();
  m(2, 2) = 1;
  flat.mask = m;
  flat.bbox = BoundingBox{0.4, 0.4, 0.6, 0.6};

  const ImageSample out = apply_contrast_ablation(flat);
  for (Eigen::Index i = 0; i < out.image.size(); ++i) {
    CHECK(out.image[i] == doctest::Approx(0.5f));
  }
  CHECK((*out.mask)(2, 2) == 1);
  CHECK(same_box(*out.bbox, *flat.bbox));

  // A single bright pixel disappears under the 3x3 erosion before dilation.
  Tensorf spike({5, 5, 1});
  spike.set_zero();
  spike(2, 2, 0) = 1.0f;
  const Tensorf eroded = erode3x3(spike);
  for (Eigen::Index i = 0; i < eroded.size(); ++i) CHECK(eroded[i] == 0.0f);
  const Tensorf reopened = dilate3x3(eroded);
  for (Eigen::Index i = 0; i < reopened.size(); ++i) CHECK(reopened[i] == 0.0f);
}

TEST_CASE("dataset loader round trip and validation errors") {
  const fs::path root = fs::temp_directory_path() / "colonnet_dataset_test";
  fs::remove_all(root);
  fs::create_directories(root / "images");
  fs::create_directories(root / "masks");

  Tensorf img({4, 4, 3});
  for (Eigen::Index i = 0; i < img.size(); ++i) img[i] = 0.25f;
  write_image_png((root / "images" / "a.png").string(), img);
  write_image_png((root / "images" / "b.png").string(), img);
  MaskTensor mask({4, 4});
  mask.set_zero();
  mask(1, 1) = 1;
  mask(1, 2) = 1;
  write_mask_png((root / "masks" / "a.png").string(), mask);

  auto write_csv = [&](const std::string& body) {
    std::ofstream os(root / "annotations.csv");
    os << body;
  };

  write_csv(
      "id,label,x_min,y_min,x_max,y_max\n"
      "a,1,0.2500,0.2500,0.7500,0.5000\n"
      "b,0,,,,\n");
  const auto samples = load_dataset(root.string());
  REQUIRE(samples.size() == 2);
  CHECK(samples[0].id == "a");
  CHECK(samples[0].label == 1);
  REQUIRE(samples[0].bbox.has_value());
  CHECK(samples[0].bbox->x_min == doctest::Approx(0.25));
  REQUIRE(samples[0].mask.has_value());
  CHECK((*samples[0].mask)(1, 1) == 1);
  CHECK((*samples[0].mask)(0, 0) == 0);
  CHECK(samples[1].id == "b");
  CHECK(samples[1].label == 0);
  CHECK(!samples[1].bbox.has_value());
  CHECK(samples[1].image(0, 0, 0) == doctest::Approx(0.25).epsilon(0.01));

  write_csv("id,label\n");
  CHECK_THROWS_WITH_AS(load_dataset(root.string()),
                       doctest::Contains("header"), std::runtime_error);

  write_csv(
      "id,label,x_min,y_min,x_max,y_max\n"
      "a,1,0.2500,0.2500,0.7500,0.5000\n"
      "zz,0,,,,\n");
  CHECK_THROWS(load_dataset(root.string()));

  write_csv(
      "id,label,x_min,y_min,x_max,y_max\n"
      "a,1,0.2500,0.2500,0.7500,0.5000\n"
      "a,1,0.2500,0.2500,0.7500,0.5000\n"
      "b,0,,,,\n");
  CHECK_THROWS_WITH_AS(load_dataset(root.string()),
                       doctest::Contains("duplicate"), std::runtime_error);

  write_csv(
      "id,label,x_min,y_min,x_max,y_max\n"
      "a,1,0.2500,0.2500,0.7500,0.5000\n"
      "b,0,0.1000,0.1000,0.2000,0.2000\n");
  CHECK_THROWS(load_dataset(root.string()));

  write_csv(
      "id,label,x_min,y_min,x_max,y_max\n"
      "a,1,0.9000,0.2500,0.1000,0.5000\n"
      "b,0,,,,\n");
  CHECK_THROWS(load_dataset(root.string()));

  CHECK_THROWS(load_dataset((root / "missing").string()));
  fs::remove_all(root);
}
