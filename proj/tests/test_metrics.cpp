#include "doctest.h"

#include <cmath>

#include "colonnet/metrics.hpp"
#include "oracles.hpp"

using namespace colonnet;

namespace {

MaskTensor mask_from(const std::vector<std::uint8_t>& values, Eigen::Index h,
                     Eigen::Index w) {
  MaskTensor m({h, w});
  REQUIRE(m.size() == static_cast<Eigen::Index>(values.size()));
  std::copy(values.begin(), values.end(), m.data());
  return m;
}

std::vector<std::uint8_t> to_values(const MaskTensor& m) {
  return std::vector<std::uint8_t>(m.data(), m.data() + m.size());
}

}  // namespace

TEST_CASE("classification metrics worked example") {
  // tp=3, fp=1, tn=4, fn=2.
  std::vector<int> preds = {1, 1, 1, 1, 0, 0, 0, 0, 0, 0};
  std::vector<int> truths = {1, 1, 1, 0, 1, 1, 0, 0, 0, 0};
  const auto c = confusion_counts(preds, truths);
  CHECK(c.tp == 3);
  CHECK(c.fp == 1);
  CHECK(c.tn == 4);
  CHECK(c.fn == 2);
  const auto m = classification_metrics(c);
  CHECK(m.accuracy == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(m.recall == doctest::Approx(0.6).epsilon(1e-12));
  // precision 0.75, recall 0.6 -> f1 = 2*0.45/1.35 = 2/3.
  CHECK(m.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("classification metrics degenerate conventions") {
  const auto perfect = classification_metrics({1, 0, 1}, {1, 0, 1});
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.f1 == 1.0);

  const auto all_negative = classification_metrics({0, 0, 0}, {0, 0, 0});
  CHECK(all_negative.accuracy == 1.0);
  CHECK(all_negative.recall == 0.0);
  CHECK(all_negative.f1 == 0.0);

  CHECK_THROWS(classification_metrics({1, 0}, {1}));
}

TEST_CASE("box iou examples") {
  const BoundingBox a{0.0, 0.0, 0.5, 0.5};
  CHECK(box_iou(a, a) == doctest::Approx(1.0).epsilon(1e-12));

  const BoundingBox far{0.6, 0.6, 0.9, 0.9};
  CHECK(box_iou(a, far) == 0.0);

  const BoundingBox b{0.25, 0.25, 0.75, 0.75};
  CHECK(box_iou(a, b) == doctest::Approx(1.0 / 7.0).epsilon(1e-9));
  CHECK(box_iou(a, b) == doctest::Approx(box_iou(b, a)).epsilon(1e-15));
}

TEST_CASE("box iou matches the grid counting oracle exactly") {
  Rng rng(55);
  const long grid = 64;
  for (int trial = 0; trial < 100; ++trial) {
    // Boxes with coordinates on a 1/64 grid: the analytic IoU and the
    // cell-counting ratio are the same exact rational number.
    auto draw_box = [&](long& x0, long& y0, long& x1, long& y1) {
      x0 = static_cast<long>(rng.uniform_index(grid - 1));
      y0 = static_cast<long>(rng.uniform_index(grid - 1));
      x1 = x0 + 1 + static_cast<long>(rng.uniform_index(grid - x0 - 1));
      y1 = y0 + 1 + static_cast<long>(rng.uniform_index(grid - y0 - 1));
    };
    long ax0, ay0, ax1, ay1, bx0, by0, bx1, by1;
    draw_box(ax0, ay0, ax1, ay1);
    draw_box(bx0, by0, bx1, by1);
    const double g = static_cast<double>(grid);
    const BoundingBox a{ax0 / g, ay0 / g, ax1 / g, ay1 / g};
    const BoundingBox b{bx0 / g, by0 / g, bx1 / g, by1 / g};
    const double want =
        oracles::naive_box_iou_on_grid(ax0, ay0, ax1, ay1, bx0, by0, bx1, by1, grid);
    CHECK(box_iou(a, b) == want);
  }
}

TEST_CASE("average precision hit rate") {
  const BoundingBox t{0.2, 0.2, 0.6, 0.6};
  std::vector<BoundingBox> truths(4, t);
  // IoUs 1.0, 1.0, ~0, 1.0 -> 3 of 4 hits.
  std::vector<BoundingBox> preds = {t, t, {0.8, 0.8, 0.9, 0.9}, t};
  CHECK(average_precision(preds, truths, 0.5) == doctest::Approx(0.75));
  CHECK(average_precision(truths, truths, 0.5) == 1.0);
  std::vector<BoundingBox> off(4, BoundingBox{0.8, 0.8, 0.9, 0.9});
  CHECK(average_precision(off, truths, 0.5) == 0.0);
  CHECK_THROWS(average_precision({}, {}, 0.5));
  CHECK_THROWS(average_precision(preds, {t, t}, 0.5));
}

TEST_CASE("average precision counts boxes at the exact threshold") {
  // One pred/truth pair with IoU exactly 0.5: threshold is inclusive.
  const BoundingBox t{0.0, 0.0, 0.5, 0.5};
  const BoundingBox half{0.0, 0.0, 0.25, 0.5};  // inter 0.125, union 0.25
  CHECK(box_iou(half, t) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(average_precision({half}, {t}, 0.5) == 1.0);
}

TEST_CASE("dice and mask iou worked examples") {
  // 2x2 grid with TP=2, FP=1, FN=1.
  const MaskTensor pred = mask_from({1, 1, 1, 0}, 2, 2);
  const MaskTensor truth = mask_from({1, 1, 0, 1}, 2, 2);
  CHECK(dice_coefficient(pred, truth) == doctest::Approx(4.0 / 6.0).epsilon(1e-12));
  CHECK(mask_iou(pred, truth) == doctest::Approx(0.5).epsilon(1e-12));

  CHECK(dice_coefficient(truth, truth) == 1.0);
  CHECK(mask_iou(truth, truth) == 1.0);

  const MaskTensor empty = mask_from({0, 0, 0, 0}, 2, 2);
  CHECK(dice_coefficient(empty, empty) == 1.0);
  CHECK(mask_iou(empty, empty) == 1.0);

  const MaskTensor left = mask_from({1, 0, 1, 0}, 2, 2);
  const MaskTensor right = mask_from({0, 1, 0, 1}, 2, 2);
  CHECK(dice_coefficient(left, right) == 0.0);
  CHECK(mask_iou(left, right) == 0.0);

  CHECK_THROWS(dice_coefficient(mask_from({1}, 1, 1), truth));
}

TEST_CASE("mask metrics match counting oracles and the dice identity") {
  Rng rng(66);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Index h = 2 + static_cast<Eigen::Index>(rng.uniform_index(6));
    const Eigen::Index w = 2 + static_cast<Eigen::Index>(rng.uniform_index(6));
    MaskTensor pred({h, w}), truth({h, w});
    for (Eigen::Index i = 0; i < pred.size(); ++i) {
      pred[i] = rng.bernoulli(0.45) ? 1 : 0;
      truth[i] = rng.bernoulli(0.45) ? 1 : 0;
    }
    const double dice = dice_coefficient(pred, truth);
    const double iou = mask_iou(pred, truth);
    CHECK(dice == oracles::naive_dice(to_values(pred), to_values(truth)));
    CHECK(iou == oracles::naive_mask_iou(to_values(pred), to_values(truth)));
    // Algebraic identity between the two overlap scores.
    CHECK(std::fabs(dice - 2.0 * iou / (1.0 + iou)) <= 1e-12);
    // Symmetry.
    CHECK(dice == dice_coefficient(truth, pred));
    CHECK(iou == mask_iou(truth, pred));
  }
}

TEST_CASE("classification metrics match the counting oracle") {
  Rng rng(77);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng.uniform_index(40);
    std::vector<int> preds(n), truths(n);
    for (std::size_t i = 0; i < n; ++i) {
      preds[i] = rng.bernoulli(0.5) ? 1 : 0;
      truths[i] = rng.bernoulli(0.5) ? 1 : 0;
    }
    const auto m = classification_metrics(preds, truths);
    const auto c = oracles::naive_confusion(preds, truths);
    CHECK(m.accuracy == oracles::naive_accuracy(c));
    CHECK(m.recall == oracles::naive_recall(c));
    CHECK(m.f1 == oracles::naive_f1(c));
  }
}

TEST_CASE("metrics report serializes all seven metrics") {
  MetricsReport r;
  r.classification = {0.9, 0.8, 0.85};
  r.detection = {0.75, 0.6};
  r.segmentation = {0.7, 0.55};
  const auto j = r.to_json();
  CHECK(j.at("classification").at("accuracy").get<double>() == 0.9);
  CHECK(j.at("classification").at("recall").get<double>() == 0.8);
  CHECK(j.at("classification").at("f1").get<double>() == 0.85);
  CHECK(j.at("detection").at("avg_precision").get<double>() == 0.75);
  CHECK(j.at("detection").at("mean_box_iou").get<double>() == 0.6);
  CHECK(j.at("segmentation").at("dice").get<double>() == 0.7);
  CHECK(j.at("segmentation").at("mask_iou").get<double>() == 0.55);

  const auto back = MetricsReport::from_json(j);
  CHECK(back.classification.f1 == r.classification.f1);
  CHECK(back.segmentation.mask_iou == r.segmentation.mask_iou);
}

TEST_CASE("metrics table groups the three sections") {
  MetricsReport r;
  const std::string table = r.to_table();
  const auto pos_cls = table.find("Classification");
  const auto pos_det = table.find("Detection");
  const auto pos_seg = table.find("Segmentation");
  REQUIRE(pos_cls != std::string::npos);
  REQUIRE(pos_det != std::string::npos);
  REQUIRE(pos_seg != std::string::npos);
  CHECK(pos_cls < pos_det);
  CHECK(pos_det < pos_seg);
  CHECK(table.find("Accuracy") != std::string::npos);
  CHECK(table.find("Recall") != std::string::npos);
  CHECK(table.find("F1-score") != std::string::npos);
  CHECK(table.find("Avg. Precision") != std::string::npos);
  CHECK(table.find("Dice-Coeff.") != std::string::npos);
  CHECK(table.find("IoU Score") != std::string::npos);
}
