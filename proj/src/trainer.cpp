#include "colonnet/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <iostream>
#include <memory>

#include "colonnet/losses.hpp"
#include "colonnet/nn/optim.hpp"

namespace colonnet {

namespace {

constexpr const char* kDetection = "detection";
constexpr const char* kClassification = "classification";
constexpr const char* kSegmentation = "segmentation";

bool contains(const std::vector<std::string>& values, const std::string& v) {
  return std::find(values.begin(), values.end(), v) != values.end();
}

void check_frozen(const StageSpec& stage, const std::vector<std::string>& required,
                  const std::vector<std::string>& banned) {
  for (const auto& name : stage.frozen) {
    component_from_name(name);  // rejects unknown names
    COLONNET_CHECK(!contains(banned, name), "stage '", stage.name,
                   "' trains component '", name, "'; it cannot also be frozen");
  }
  for (const auto& name : required) {
    COLONNET_CHECK(contains(stage.frozen, name), "stage '", stage.name,
                   "' must freeze component '", name, "'");
  }
}

/// Dispatches on the optimizer method while keeping Adam state alive for the
/// whole stage.
class StageOptimizer {
 public:
  StageOptimizer(const OptimizerConfig& config, const nn::ParamRefs<float>& params)
      : params_(params) {
    const auto lr = static_cast<float>(config.learning_rate);
    if (config.method == "adam") {
      // A damping epsilon of 1e-3 (instead of the 1e-8 textbook value) caps
      // how much the RMS normalizer can amplify tiny gradients. The focal
      // Tversky loss is nearly flat for empty-truth masks, and amplifying
      // that faint but sign-consistent "suppress everything" direction to
      // full-step size collapses segmentation to all-zero masks; gradients
      // of ordinary magnitude are unaffected.
      adam_ = std::make_unique<nn::Adam<float>>(params, lr, 0.9f, 0.999f, 1e-3f);
    } else {
      sgd_ = std::make_unique<nn::Sgd<float>>(params, lr);
    }
  }

  void step() {
    if (adam_) {
      adam_->step(params_);
    } else {
      sgd_->step(params_);
    }
  }

  const nn::ParamRefs<float>& params() const { return params_; }

 private:
  nn::ParamRefs<float> params_;
  std::unique_ptr<nn::Adam<float>> adam_;
  std::unique_ptr<nn::Sgd<float>> sgd_;
};

Tensorf batch_images(const std::vector<ImageSample>& batch) {
  COLONNET_CHECK(!batch.empty(), "empty training batch");
  const Eigen::Index h = batch.front().height();
  const Eigen::Index w = batch.front().width();
  Tensorf out({static_cast<Eigen::Index>(batch.size()), h, w, 3});
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto& img = batch[b].image;
    COLONNET_CHECK(img.dim(0) == h && img.dim(1) == w,
                   "inconsistent image sizes within a batch");
    std::copy(img.data(), img.data() + img.size(),
              out.data() + static_cast<Eigen::Index>(b) * img.size());
  }
  return out;
}

Tensorf batch_boxes(const std::vector<ImageSample>& batch) {
  Tensorf out({static_cast<Eigen::Index>(batch.size()), 4});
  for (std::size_t b = 0; b < batch.size(); ++b) {
    COLONNET_CHECK(batch[b].bbox.has_value(),
                   "detection batch sample without a bounding box: ", batch[b].id);
    const auto& box = *batch[b].bbox;
    const auto i = static_cast<Eigen::Index>(b);
    out(i, 0) = static_cast<float>(box.x_min);
    out(i, 1) = static_cast<float>(box.y_min);
    out(i, 2) = static_cast<float>(box.x_max);
    out(i, 3) = static_cast<float>(box.y_max);
  }
  return out;
}

Tensorf batch_labels(const std::vector<ImageSample>& batch) {
  Tensorf out({static_cast<Eigen::Index>(batch.size()), 1});
  for (std::size_t b = 0; b < batch.size(); ++b) {
    out(static_cast<Eigen::Index>(b), 0) = static_cast<float>(batch[b].label);
  }
  return out;
}

/// Missing masks have been filtered out for label-1 samples already; label-0
/// samples without masks contribute all-zero targets.
Tensorf batch_masks(const std::vector<ImageSample>& batch) {
  const Eigen::Index h = batch.front().height();
  const Eigen::Index w = batch.front().width();
  Tensorf out({static_cast<Eigen::Index>(batch.size()), h, w});
  out.set_zero();
  for (std::size_t b = 0; b < batch.size(); ++b) {
    if (!batch[b].mask) continue;
    const auto& mask = *batch[b].mask;
    COLONNET_CHECK(mask.dim(0) == h && mask.dim(1) == w,
                   "mask size mismatch in batch for sample ", batch[b].id);
    float* dst = out.data() + static_cast<Eigen::Index>(b) * h * w;
    for (Eigen::Index i = 0; i < mask.size(); ++i) {
      dst[i] = static_cast<float>(mask[i]);
    }
  }
  return out;
}

}  // namespace

void StageSpec::validate() const {
  COLONNET_CHECK(epochs >= 1, "stage '", name, "' must run at least one epoch, got ",
                 epochs);
  if (name == kDetection) {
    COLONNET_CHECK(sample_filter == "bleeding_only", "detection stage must use the ",
                   "bleeding_only sample filter, got '", sample_filter, "'");
    COLONNET_CHECK(loss == "mse", "detection stage must use the mse loss, got '",
                   loss, "'");
    check_frozen(*this, {"classification_head", "unet"}, {"detection_head"});
  } else if (name == kClassification) {
    COLONNET_CHECK(sample_filter == "all", "classification stage must use the all ",
                   "sample filter, got '", sample_filter, "'");
    COLONNET_CHECK(loss == "bce", "classification stage must use the bce loss, ",
                   "got '", loss, "'");
    check_frozen(*this, {"backbone", "detection_head", "unet"},
                 {"classification_head"});
  } else if (name == kSegmentation) {
    COLONNET_CHECK(sample_filter == "all", "segmentation stage must use the all ",
                   "sample filter, got '", sample_filter, "'");
    COLONNET_CHECK(loss == "focal_tversky", "segmentation stage must use the ",
                   "focal_tversky loss, got '", loss, "'");
    check_frozen(*this, {"backbone", "classification_head", "detection_head"},
                 {"unet"});
  } else {
    fail("unknown training stage '", name,
         "' (expected detection, classification, or segmentation)");
  }
}

void TrainingSchedule::validate() const {
  COLONNET_CHECK(!stages.empty(), "training schedule has no stages");
  optimizer.validate();
  augment.validate();
  COLONNET_CHECK(iou_threshold > 0.0 && iou_threshold < 1.0,
                 "iou_threshold must be in (0,1), got ", iou_threshold);
  for (const auto& stage : stages) {
    stage.validate();
    if (stage.name == kDetection) {
      const bool backbone_frozen = contains(stage.frozen, "backbone");
      COLONNET_CHECK(backbone_frozen == !backbone_trainable_in_detection,
                     "detection stage freeze list disagrees with the ",
                     "backbone_trainable_in_detection flag");
    }
  }
  for (std::size_t i = 0; i < stages.size(); ++i) {
    for (std::size_t j = i + 1; j < stages.size(); ++j) {
      COLONNET_CHECK(stages[i].name != stages[j].name, "duplicate training stage '",
                     stages[i].name, "'");
    }
  }
}

TrainingSchedule TrainingSchedule::defaults(Eigen::Index detection_epochs,
                                            Eigen::Index classification_epochs,
                                            Eigen::Index segmentation_epochs) {
  TrainingSchedule s;
  s.stages = {
      {kDetection, detection_epochs, "bleeding_only",
       {"classification_head", "unet"}, "mse"},
      {kClassification, classification_epochs, "all",
       {"backbone", "detection_head", "unet"}, "bce"},
      {kSegmentation, segmentation_epochs, "all",
       {"backbone", "classification_head", "detection_head"}, "focal_tversky"},
  };
  return s;
}

TrainingSchedule schedule_from_run_config(const RunConfig& run) {
  TrainingSchedule s = TrainingSchedule::defaults(
      run.detection_epochs, run.classification_epochs, run.segmentation_epochs);
  s.optimizer.learning_rate = run.learning_rate;
  s.optimizer.batch_size = run.batch_size;
  s.optimizer.seed = run.seed;
  s.augment.flip_h_prob = run.flip_h_prob;
  s.augment.flip_v_prob = run.flip_v_prob;
  s.augment.target_size = run.input_size;
  s.augment.ablation_contrast = run.contrast_ablation;
  s.per_epoch_validation = run.per_epoch_validation;
  s.backbone_trainable_in_detection = run.backbone_trainable_in_detection;
  s.iou_threshold = run.iou_threshold;
  if (!run.backbone_trainable_in_detection) {
    for (auto& stage : s.stages) {
      if (stage.name == kDetection) stage.frozen.push_back("backbone");
    }
  }
  return s;
}

nlohmann::json StageReport::to_json() const {
  // Wall-clock seconds stay out of the JSON so that reports from identical
  // runs are byte-identical.
  nlohmann::json j = {
      {"name", name},
      {"epochs", epochs},
      {"samples_used", samples_used},
      {"samples_skipped", samples_skipped},
      {"epoch_losses", epoch_losses},
      {"checksums_before", checksums_before},
      {"checksums_after", checksums_after},
  };
  if (has_validation) j["validation"] = validation.to_json();
  return j;
}

nlohmann::json TrainOutcome::to_json() const {
  nlohmann::json stage_list = nlohmann::json::array();
  for (const auto& s : stages) stage_list.push_back(s.to_json());
  return {
      {"seed", seed},
      {"stages", stage_list},
      {"validation", validation.to_json()},
  };
}

Trainer::Trainer(ModelBundle& model, TrainingSchedule schedule)
    : model_(model), schedule_(std::move(schedule)) {
  schedule_.validate();
  model_.config.validate();
  COLONNET_CHECK(schedule_.augment.target_size == model_.config.backbone.input_size,
                 "augmentation target size ", schedule_.augment.target_size,
                 " does not match the model input size ",
                 model_.config.backbone.input_size);
}

StageReport Trainer::run_stage(const std::vector<ImageSample>& train_samples,
                               const StageSpec& stage) {
  if (stage.name == kDetection) return train_detection_stage(train_samples, stage);
  if (stage.name == kClassification) {
    return train_classification_stage(train_samples, stage);
  }
  if (stage.name == kSegmentation) {
    return train_segmentation_stage(train_samples, stage);
  }
  fail("unknown training stage '", stage.name, "'");
}

namespace {

using EpochHook = std::function<void(Eigen::Index epoch, double loss)>;

/// Shared epoch/batch loop. `step` consumes one augmented batch and returns
/// its mean loss; the optimizer step happens inside.
template <typename StepFn>
StageReport run_epochs(const StageSpec& stage, const TrainingSchedule& schedule,
                       ModelBundle& model, const std::vector<const ImageSample*>& used,
                       std::size_t skipped, const BatchObserver& observer,
                       const EpochHook& epoch_end, StepFn&& step) {
  StageReport report;
  report.name = stage.name;
  report.epochs = stage.epochs;
  report.samples_used = used.size();
  report.samples_skipped = skipped;
  for (Component c : {Component::backbone, Component::classification_head,
                      Component::detection_head, Component::unet}) {
    report.checksums_before[component_name(c)] = model.checksum(c);
  }

  const auto start = std::chrono::steady_clock::now();
  Rng stage_rng =
      Rng(schedule.optimizer.seed).derive(fnv1a(stage.name.data(), stage.name.size()));
  std::vector<const ImageSample*> order = used;
  const auto batch_size = static_cast<std::size_t>(schedule.optimizer.batch_size);

  for (Eigen::Index epoch = 0; epoch < stage.epochs; ++epoch) {
    Rng epoch_rng = stage_rng.derive(static_cast<std::uint64_t>(epoch) + 1);
    shuffle(order, epoch_rng);
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += batch_size) {
      const std::size_t end = std::min(order.size(), begin + batch_size);
      const std::vector<const ImageSample*> batch_ptrs(order.begin() + begin,
                                                       order.begin() + end);
      if (observer) observer(stage.name, batch_ptrs);
      std::vector<ImageSample> batch;
      batch.reserve(batch_ptrs.size());
      for (const auto* s : batch_ptrs) {
        batch.push_back(augment(*s, schedule.augment, epoch_rng));
      }
      loss_sum += step(batch) * static_cast<double>(batch.size());
    }
    const double epoch_loss = loss_sum / static_cast<double>(order.size());
    report.epoch_losses.push_back(epoch_loss);
    if (epoch_end) epoch_end(epoch, epoch_loss);
  }
  report.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  for (Component c : {Component::backbone, Component::classification_head,
                      Component::detection_head, Component::unet}) {
    report.checksums_after[component_name(c)] = model.checksum(c);
  }
  return report;
}

}  // namespace

StageReport Trainer::train_detection_stage(const std::vector<ImageSample>& train_samples,
                                           const StageSpec& stage) {
  stage.validate();
  std::vector<const ImageSample*> used;
  std::size_t skipped = 0;
  for (const auto& s : train_samples) {
    if (s.label == 1 && s.bbox.has_value()) {
      used.push_back(&s);
    } else {
      ++skipped;
      if (s.label == 1) {
        std::cerr << "[colonnet] warning: bleeding sample '" << s.id
                  << "' has no bounding box; skipped in the detection stage\n";
      }
    }
  }
  COLONNET_CHECK(!used.empty(),
                 "detection stage requires at least one bleeding sample with a ",
                 "bounding box; the training split has none");

  const bool train_backbone = schedule_.backbone_trainable_in_detection;
  nn::ParamRefs<float> trainable = model_.params(Component::detection_head);
  if (train_backbone) {
    auto bp = model_.params(Component::backbone);
    trainable.insert(trainable.end(), bp.begin(), bp.end());
  }
  StageOptimizer optimizer(schedule_.optimizer, trainable);

  return run_epochs(stage, schedule_, model_, used, skipped, observer_, epoch_end_,
                    [&](const std::vector<ImageSample>& batch) {
                      nn::zero_grads(optimizer.params());
                      Tensorf images = batch_images(batch);
                      Tensorf targets = batch_boxes(batch);
                      Tensorf f = model_.backbone->forward(images, train_backbone);
                      Tensorf boxes = model_.heads->det_boxes(f, true);
                      const double loss = mse_loss(boxes, targets);
                      Tensorf grad = mse_loss_grad(boxes, targets);
                      Tensorf gfeat = model_.heads->det_backward(grad);
                      if (train_backbone) model_.backbone->backward(gfeat);
                      optimizer.step();
                      return loss;
                    });
}

StageReport Trainer::train_classification_stage(
    const std::vector<ImageSample>& train_samples, const StageSpec& stage) {
  stage.validate();
  COLONNET_CHECK(!train_samples.empty(), "classification stage has no samples");
  std::vector<const ImageSample*> used;
  used.reserve(train_samples.size());
  for (const auto& s : train_samples) used.push_back(&s);

  StageOptimizer optimizer(schedule_.optimizer,
                           model_.params(Component::classification_head));

  return run_epochs(stage, schedule_, model_, used, 0, observer_, epoch_end_,
                    [&](const std::vector<ImageSample>& batch) {
                      nn::zero_grads(optimizer.params());
                      Tensorf images = batch_images(batch);
                      Tensorf targets = batch_labels(batch);
                      Tensorf f = model_.backbone->forward(images, false);
                      Tensorf probs = model_.heads->cls_probs(f, true);
                      const double loss = bce_loss(probs, targets);
                      Tensorf grad = bce_loss_grad(probs, targets);
                      model_.heads->cls_backward(grad);
                      optimizer.step();
                      return loss;
                    });
}

StageReport Trainer::train_segmentation_stage(
    const std::vector<ImageSample>& train_samples, const StageSpec& stage) {
  stage.validate();
  std::vector<const ImageSample*> used;
  std::size_t skipped = 0;
  for (const auto& s : train_samples) {
    if (s.label == 1 && !s.mask.has_value()) {
      ++skipped;
      std::cerr << "[colonnet] warning: bleeding sample '" << s.id
                << "' has no mask; skipped in the segmentation stage\n";
      continue;
    }
    used.push_back(&s);
  }
  COLONNET_CHECK(!used.empty(),
                 "segmentation stage has no usable samples: every training sample ",
                 "is bleeding-labeled without a mask");

  StageOptimizer optimizer(schedule_.optimizer, model_.params(Component::unet));
  const FocalTverskyConfig& ft = model_.config.focal_tversky;

  return run_epochs(stage, schedule_, model_, used, skipped, observer_, epoch_end_,
                    [&](const std::vector<ImageSample>& batch) {
                      nn::zero_grads(optimizer.params());
                      Tensorf images = batch_images(batch);
                      Tensorf targets = batch_masks(batch);
                      Tensorf probs = model_.unet->forward(images, true);
                      const double loss =
                          focal_tversky_batch_loss(probs, targets, ft);
                      Tensorf grad = focal_tversky_batch_loss_grad(probs, targets, ft);
                      model_.unet->backward(grad);
                      optimizer.step();
                      return loss;
                    });
}

TrainOutcome Trainer::run_full_schedule(const std::vector<ImageSample>& train_samples,
                                        const std::vector<ImageSample>& val_samples) {
  TrainOutcome outcome;
  outcome.seed = schedule_.optimizer.seed;
  const auto start = std::chrono::steady_clock::now();

  if (schedule_.per_epoch_validation && !val_samples.empty()) {
    epoch_end_ = [&](Eigen::Index epoch, double loss) {
      const MetricsReport m =
          evaluate_model(model_, val_samples, 0.5, schedule_.iou_threshold,
                         schedule_.optimizer.batch_size);
      std::cerr << "[colonnet] epoch " << (epoch + 1) << ": loss " << loss
                << ", val accuracy " << m.classification.accuracy << ", val dice "
                << m.segmentation.dice << "\n";
    };
  }

  for (const auto& stage : schedule_.stages) {
    StageReport report = run_stage(train_samples, stage);
    if (!val_samples.empty()) {
      report.validation =
          evaluate_model(model_, val_samples, 0.5, schedule_.iou_threshold,
                         schedule_.optimizer.batch_size);
      report.has_validation = true;
      outcome.validation = report.validation;
      std::cerr << "[colonnet] stage " << stage.name << ": final loss "
                << (report.epoch_losses.empty() ? 0.0 : report.epoch_losses.back())
                << ", val accuracy " << report.validation.classification.accuracy
                << ", val dice " << report.validation.segmentation.dice << "\n";
    }
    model_.trained_stages.push_back(stage.name);
    outcome.stages.push_back(std::move(report));
  }

  epoch_end_ = nullptr;
  outcome.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return outcome;
}

MetricsReport evaluate_model(ModelBundle& model,
                             const std::vector<ImageSample>& samples,
                             double threshold, double iou_threshold,
                             Eigen::Index batch_size) {
  COLONNET_CHECK(!samples.empty(), "cannot evaluate over an empty sample list");
  COLONNET_CHECK(batch_size >= 1, "batch_size must be >= 1, got ", batch_size);
  const Eigen::Index input_size = model.config.backbone.input_size;

  std::vector<int> pred_labels;
  std::vector<int> true_labels;
  std::vector<BoundingBox> pred_boxes;
  std::vector<BoundingBox> true_boxes;
  double iou_sum = 0.0;
  double dice_sum = 0.0;
  double mask_iou_sum = 0.0;
  std::size_t mask_count = 0;

  const auto n = static_cast<Eigen::Index>(samples.size());
  for (Eigen::Index begin = 0; begin < n; begin += batch_size) {
    const Eigen::Index end = std::min(n, begin + batch_size);
    std::vector<ImageSample> batch;
    batch.reserve(static_cast<std::size_t>(end - begin));
    for (Eigen::Index i = begin; i < end; ++i) {
      batch.push_back(resize(samples[static_cast<std::size_t>(i)], input_size));
    }
    Tensorf images = batch_images(batch);
    Tensorf f = model.backbone->forward(images, false);
    Tensorf probs = model.heads->cls_probs(f, false);
    Tensorf boxes = model.heads->det_boxes(f, false);
    Tensorf seg = model.unet->forward(images, false);

    for (Eigen::Index b = 0; b < end - begin; ++b) {
      const ImageSample& s = batch[static_cast<std::size_t>(b)];
      const bool predicted_bleeding =
          static_cast<double>(probs(b, 0)) >= threshold;
      pred_labels.push_back(predicted_bleeding ? 1 : 0);
      true_labels.push_back(s.label);

      if (s.label == 1 && s.bbox.has_value()) {
        const BoundingBox pred = corner_sorted_box(
            boxes(b, 0), boxes(b, 1), boxes(b, 2), boxes(b, 3));
        pred_boxes.push_back(pred);
        true_boxes.push_back(*s.bbox);
        iou_sum += box_iou(pred, *s.bbox);
      }
      if (s.label == 1 && s.mask.has_value()) {
        Tensorf sample_probs({input_size, input_size});
        for (Eigen::Index i = 0; i < sample_probs.size(); ++i) {
          sample_probs[i] = seg[b * input_size * input_size + i];
        }
        const MaskTensor pred_mask = binarize_mask(sample_probs, threshold);
        dice_sum += dice_coefficient(pred_mask, *s.mask);
        mask_iou_sum += mask_iou(pred_mask, *s.mask);
        ++mask_count;
      }
    }
  }

  MetricsReport report;
  report.classification = classification_metrics(pred_labels, true_labels);
  if (!pred_boxes.empty()) {
    report.detection.avg_precision =
        average_precision(pred_boxes, true_boxes, iou_threshold);
    report.detection.mean_box_iou = iou_sum / static_cast<double>(pred_boxes.size());
  }
  if (mask_count > 0) {
    report.segmentation.dice = dice_sum / static_cast<double>(mask_count);
    report.segmentation.mask_iou = mask_iou_sum / static_cast<double>(mask_count);
  }
  return report;
}

}  // namespace colonnet
