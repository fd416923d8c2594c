#pragma once

#include <algorithm>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "colonnet/dataset.hpp"
#include "colonnet/tensor.hpp"

namespace colonnet {

struct ConfusionCounts {
  long tp = 0;
  long fp = 0;
  long tn = 0;
  long fn = 0;

  long total() const { return tp + fp + tn + fn; }
};

inline ConfusionCounts confusion_counts(const std::vector<int>& preds,
                                        const std::vector<int>& truths) {
  COLONNET_CHECK(preds.size() == truths.size() && !preds.empty(),
                 "confusion counts need equal non-empty prediction/truth lists, got ",
                 preds.size(), " vs ", truths.size());
  ConfusionCounts c;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool p = preds[i] != 0, t = truths[i] != 0;
    if (p && t) ++c.tp;
    else if (p && !t) ++c.fp;
    else if (!p && t) ++c.fn;
    else ++c.tn;
  }
  return c;
}

struct ClassificationMetrics {
  double accuracy = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// accuracy = (tp+tn)/N, recall = tp/(tp+fn), f1 = harmonic(precision, recall).
/// Degenerate conventions: recall = 0 when tp+fn = 0; f1 = 0 when
/// precision+recall = 0.
inline ClassificationMetrics classification_metrics(const ConfusionCounts& c) {
  COLONNET_CHECK(c.total() > 0, "classification metrics over zero samples");
  ClassificationMetrics m;
  m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  m.recall = (c.tp + c.fn) > 0
                 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn)
                 : 0.0;
  const double precision =
      (c.tp + c.fp) > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp)
                        : 0.0;
  m.f1 = (precision + m.recall) > 0.0
             ? 2.0 * precision * m.recall / (precision + m.recall)
             : 0.0;
  return m;
}

inline ClassificationMetrics classification_metrics(const std::vector<int>& preds,
                                                    const std::vector<int>& truths) {
  return classification_metrics(confusion_counts(preds, truths));
}

/// Intersection-over-union of two corner-form boxes; 0 when disjoint.
inline double box_iou(const BoundingBox& a, const BoundingBox& b) {
  a.validate("box_iou lhs");
  b.validate("box_iou rhs");
  const double ix = std::max(
      0.0, std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min));
  const double iy = std::max(
      0.0, std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min));
  const double inter = ix * iy;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

/// Single-box regime: the fraction of images whose predicted box reaches
/// IoU >= threshold against the ground truth. With exactly one unranked box
/// per image a precision-recall sweep is degenerate, so the hit rate is the
/// meaningful summary.
inline double average_precision(const std::vector<BoundingBox>& pred_boxes,
                                const std::vector<BoundingBox>& true_boxes,
                                double iou_threshold = 0.5) {
  COLONNET_CHECK(!pred_boxes.empty(), "average precision over an empty box list");
  COLONNET_CHECK(pred_boxes.size() == true_boxes.size(),
                 "average precision needs aligned box lists, got ", pred_boxes.size(),
                 " vs ", true_boxes.size());
  COLONNET_CHECK(iou_threshold > 0.0 && iou_threshold < 1.0,
                 "iou threshold must be in (0,1), got ", iou_threshold);
  long hits = 0;
  for (std::size_t i = 0; i < pred_boxes.size(); ++i) {
    if (box_iou(pred_boxes[i], true_boxes[i]) >= iou_threshold) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(pred_boxes.size());
}

namespace detail {

struct MaskCounts {
  long inter = 0;
  long pred = 0;
  long truth = 0;
};

inline MaskCounts mask_counts(const MaskTensor& pred, const MaskTensor& truth) {
  COLONNET_CHECK(pred.same_shape(truth), "mask metric shape mismatch: ",
                 shape_string(pred.shape()), " vs ", shape_string(truth.shape()));
  MaskCounts c;
  for (Eigen::Index i = 0; i < pred.size(); ++i) {
    const bool p = pred[i] != 0, t = truth[i] != 0;
    c.inter += p && t;
    c.pred += p;
    c.truth += t;
  }
  return c;
}

}  // namespace detail

/// 2|P∩T| / (|P|+|T|); 1 when both masks are empty.
inline double dice_coefficient(const MaskTensor& pred, const MaskTensor& truth) {
  const auto c = detail::mask_counts(pred, truth);
  if (c.pred + c.truth == 0) return 1.0;
  return 2.0 * static_cast<double>(c.inter) / static_cast<double>(c.pred + c.truth);
}

/// |P∩T| / |P∪T|; 1 when both masks are empty.
inline double mask_iou(const MaskTensor& pred, const MaskTensor& truth) {
  const auto c = detail::mask_counts(pred, truth);
  const long uni = c.pred + c.truth - c.inter;
  if (uni == 0) return 1.0;
  return static_cast<double>(c.inter) / static_cast<double>(uni);
}

/// The seven headline metrics, grouped the way the results table groups them.
struct MetricsReport {
  ClassificationMetrics classification;
  struct Detection {
    double avg_precision = 0.0;
    double mean_box_iou = 0.0;
  } detection;
  struct Segmentation {
    double dice = 0.0;
    double mask_iou = 0.0;
  } segmentation;

  nlohmann::json to_json() const {
    return nlohmann::json{
        {"classification",
         {{"accuracy", classification.accuracy},
          {"recall", classification.recall},
          {"f1", classification.f1}}},
        {"detection",
         {{"avg_precision", detection.avg_precision},
          {"mean_box_iou", detection.mean_box_iou}}},
        {"segmentation",
         {{"dice", segmentation.dice}, {"mask_iou", segmentation.mask_iou}}}};
  }

  static MetricsReport from_json(const nlohmann::json& j) {
    MetricsReport r;
    r.classification.accuracy = j.at("classification").at("accuracy").get<double>();
    r.classification.recall = j.at("classification").at("recall").get<double>();
    r.classification.f1 = j.at("classification").at("f1").get<double>();
    r.detection.avg_precision = j.at("detection").at("avg_precision").get<double>();
    r.detection.mean_box_iou = j.at("detection").at("mean_box_iou").get<double>();
    r.segmentation.dice = j.at("segmentation").at("dice").get<double>();
    r.segmentation.mask_iou = j.at("segmentation").at("mask_iou").get<double>();
    return r;
  }

  /// Aligned three-group table in the style of the results table.
  std::string to_table() const {
    std::ostringstream os;
    os << std::fixed << std::setprecision(4);
    auto row = [&os](const std::string& group, const std::string& metric,
                     double value) {
      os << "  " << std::left << std::setw(16) << group << std::setw(16) << metric
         << std::right << std::setw(8) << value << "\n";
    };
    os << "  " << std::left << std::setw(16) << "Group" << std::setw(16) << "Metric"
       << std::right << std::setw(8) << "Value" << "\n";
    os << "  " << std::string(40, '-') << "\n";
    row("Classification", "Accuracy", classification.accuracy);
    row("Classification", "Recall", classification.recall);
    row("Classification", "F1-score", classification.f1);
    row("Detection", "Avg. Precision", detection.avg_precision);
    row("Detection", "IoU Score", detection.mean_box_iou);
    row("Segmentation", "Dice-Coeff.", segmentation.dice);
    row("Segmentation", "IoU Score", segmentation.mask_iou);
    return os.str();
  }
};

}  // namespace colonnet
