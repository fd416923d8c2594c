#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "colonnet/tensor.hpp"

namespace colonnet {

/// A configuration problem attributable to one key (unknown key, bad value).
/// The CLI maps this to exit code 2 and prints the key.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error(message), key_(std::move(key)) {}

  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// Flat key-value run configuration. Every key has a documented default;
/// unknown keys are rejected. Files are UTF-8 `key = value` lines with `#`
/// comments; the COLONNET_SEED environment variable overrides `seed`.
struct RunConfig {
  std::uint64_t seed = 0;
  std::string dataset_root;
  std::string output_dir = "out";
  Eigen::Index input_size = 224;

  std::string backbone_name = "densenet121";
  bool backbone_pretrained = false;
  std::string backbone_weights_path;

  std::vector<Eigen::Index> cls_widths = {512, 128};
  std::vector<Eigen::Index> det_widths = {512, 256, 64};

  Eigen::Index unet_depth = 4;
  Eigen::Index unet_base_channels = 64;

  double ft_alpha = 0.7;
  double ft_beta = 0.3;
  double ft_gamma = 4.0 / 3.0;

  double flip_h_prob = 0.5;
  double flip_v_prob = 0.5;
  bool contrast_ablation = false;

  double learning_rate = 1e-4;
  Eigen::Index batch_size = 16;
  Eigen::Index detection_epochs = 10;
  Eigen::Index classification_epochs = 20;
  Eigen::Index segmentation_epochs = 40;
  double train_fraction = 0.8;
  bool per_epoch_validation = false;
  bool backbone_trainable_in_detection = true;

  double iou_threshold = 0.5;

  /// Applies one `key = value` assignment; throws ConfigError for unknown
  /// keys or unparsable values.
  void set(const std::string& key, const std::string& value);

  /// Current value of a key, formatted the way a config file would write it.
  std::string get(const std::string& key) const;

  void validate() const;
};

struct ConfigKeyInfo {
  std::string key;
  std::string default_value;
  std::string description;
};

/// Every accepted key with its default and one-line description, in a
/// stable order (used by --help and the config docs).
const std::vector<ConfigKeyInfo>& config_key_registry();

/// Parses a config file, applies COLONNET_SEED if set, validates.
RunConfig load_run_config(const std::string& path);

/// Parses config text (without the environment override).
RunConfig parse_run_config_text(const std::string& text);

/// Applies the COLONNET_SEED environment variable, if present.
void apply_env_overrides(RunConfig& config);

}  // namespace colonnet
