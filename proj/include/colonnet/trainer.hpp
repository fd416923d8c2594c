#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "colonnet/dataset.hpp"
#include "colonnet/metrics.hpp"
#include "colonnet/model.hpp"

namespace colonnet {

struct OptimizerConfig {
  std::string method = "adam";
  double learning_rate = 1e-4;
  Eigen::Index batch_size = 16;
  std::uint64_t seed = 0;

  void validate() const {
    COLONNET_CHECK(method == "adam" || method == "sgd",
                   "optimizer method must be adam or sgd, got '", method, "'");
    COLONNET_CHECK(learning_rate > 0.0, "learning_rate must be > 0, got ",
                   learning_rate);
    COLONNET_CHECK(batch_size >= 1, "batch_size must be >= 1, got ", batch_size);
  }
};

/// One schedule entry. The three canonical stages fix their own loss,
/// sample filter, and frozen set; epochs are the free parameter.
struct StageSpec {
  std::string name;           // detection | classification | segmentation
  Eigen::Index epochs = 1;
  std::string sample_filter;  // bleeding_only | all
  std::vector<std::string> frozen;  // component names held bit-identical
  std::string loss;           // mse | bce | focal_tversky

  void validate() const;
};

struct TrainingSchedule {
  std::vector<StageSpec> stages;
  OptimizerConfig optimizer;
  AugmentationConfig augment;
  bool per_epoch_validation = false;
  bool backbone_trainable_in_detection = true;
  double iou_threshold = 0.5;

  void validate() const;

  /// detection(10, bleeding-only, mse) -> classification(20, all, bce,
  /// backbone+detection frozen) -> segmentation(40, all, focal tversky).
  static TrainingSchedule defaults(Eigen::Index detection_epochs = 10,
                                   Eigen::Index classification_epochs = 20,
                                   Eigen::Index segmentation_epochs = 40);
};

TrainingSchedule schedule_from_run_config(const RunConfig& run);

/// Everything a finished stage reports: per-epoch mean training loss,
/// wall-clock seconds, how many samples passed the filter, and the
/// per-component parameter checksums at both stage boundaries.
struct StageReport {
  std::string name;
  Eigen::Index epochs = 0;
  std::size_t samples_used = 0;
  std::size_t samples_skipped = 0;
  std::vector<double> epoch_losses;
  double seconds = 0.0;
  std::map<std::string, std::uint64_t> checksums_before;
  std::map<std::string, std::uint64_t> checksums_after;
  MetricsReport validation;
  bool has_validation = false;

  nlohmann::json to_json() const;
};

struct TrainOutcome {
  std::vector<StageReport> stages;
  MetricsReport validation;
  std::uint64_t seed = 0;
  double seconds = 0.0;

  nlohmann::json to_json() const;
};

/// Per-batch instrumentation hook: stage name plus the samples entering the
/// batch (pre-augmentation). Used by tests to assert the stage filters.
using BatchObserver =
    std::function<void(const std::string& stage, const std::vector<const ImageSample*>&)>;

class Trainer {
 public:
  Trainer(ModelBundle& model, TrainingSchedule schedule);

  void set_batch_observer(BatchObserver observer) { observer_ = std::move(observer); }

  /// Bleeding-only MSE training of backbone + detection head.
  StageReport train_detection_stage(const std::vector<ImageSample>& train_samples,
                                    const StageSpec& stage);

  /// BCE training of the classification head over all samples; backbone and
  /// detection head stay bit-identical.
  StageReport train_classification_stage(const std::vector<ImageSample>& train_samples,
                                         const StageSpec& stage);

  /// Focal-Tversky training of the U-Net over all samples; label-0 samples
  /// without masks contribute all-zero targets, label-1 samples without
  /// masks are skipped with a warning.
  StageReport train_segmentation_stage(const std::vector<ImageSample>& train_samples,
                                       const StageSpec& stage);

  /// Executes the stages in order, validating after each; stage errors
  /// propagate as std::runtime_error.
  TrainOutcome run_full_schedule(const std::vector<ImageSample>& train_samples,
                                 const std::vector<ImageSample>& val_samples);

 private:
  StageReport run_stage(const std::vector<ImageSample>& train_samples,
                        const StageSpec& stage);

  ModelBundle& model_;
  TrainingSchedule schedule_;
  BatchObserver observer_;
  std::function<void(Eigen::Index epoch, double loss)> epoch_end_;
};

/// Thresholded inference metrics over a split: classification over every
/// sample, detection and segmentation over the bleeding-labeled samples that
/// carry the corresponding annotation.
MetricsReport evaluate_model(ModelBundle& model,
                             const std::vector<ImageSample>& samples,
                             double threshold = 0.5, double iou_threshold = 0.5,
                             Eigen::Index batch_size = 16);

}  // namespace colonnet
