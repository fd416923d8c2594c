#include "colonnet/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace colonnet {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value,
                            const std::string& expected) {
  throw ConfigError(key, detail::concat("config key '", key, "': cannot parse '",
                                        value, "' as ", expected));
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(value, &used);
    if (used != value.size()) bad_value(key, value, "an unsigned integer");
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    bad_value(key, value, "an unsigned integer");
  }
}

Eigen::Index to_index(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const auto v = std::stoll(value, &used);
    if (used != value.size()) bad_value(key, value, "an integer");
    return static_cast<Eigen::Index>(v);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    bad_value(key, value, "an integer");
  }
}

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) bad_value(key, value, "a number");
    return v;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception&) {
    bad_value(key, value, "a number");
  }
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes" || value == "on") return true;
  if (value == "false" || value == "0" || value == "no" || value == "off") {
    return false;
  }
  bad_value(key, value, "a boolean (true/false)");
}

std::vector<Eigen::Index> to_index_list(const std::string& key,
                                        const std::string& value) {
  std::vector<Eigen::Index> out;
  std::istringstream is(value);
  std::string item;
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (item.empty()) bad_value(key, value, "a comma-separated integer list");
    out.push_back(to_index(key, item));
  }
  if (out.empty()) bad_value(key, value, "a comma-separated integer list");
  return out;
}

std::string format_index_list(const std::vector<Eigen::Index>& values) {
  std::ostringstream os;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) os << ",";
    os << values[i];
  }
  return os.str();
}

std::string format_double(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key == "seed") seed = to_u64(key, value);
  else if (key == "dataset.root") dataset_root = value;
  else if (key == "output.dir") output_dir = value;
  else if (key == "model.input_size") input_size = to_index(key, value);
  else if (key == "backbone.name") backbone_name = value;
  else if (key == "backbone.pretrained") backbone_pretrained = to_bool(key, value);
  else if (key == "backbone.weights_path") backbone_weights_path = value;
  else if (key == "heads.cls_widths") cls_widths = to_index_list(key, value);
  else if (key == "heads.det_widths") det_widths = to_index_list(key, value);
  else if (key == "unet.depth") unet_depth = to_index(key, value);
  else if (key == "unet.base_channels") unet_base_channels = to_index(key, value);
  else if (key == "loss.ft_alpha") ft_alpha = to_double(key, value);
  else if (key == "loss.ft_beta") ft_beta = to_double(key, value);
  else if (key == "loss.ft_gamma") ft_gamma = to_double(key, value);
  else if (key == "augment.flip_h_prob") flip_h_prob = to_double(key, value);
  else if (key == "augment.flip_v_prob") flip_v_prob = to_double(key, value);
  else if (key == "augment.contrast_ablation") contrast_ablation = to_bool(key, value);
  else if (key == "train.learning_rate") learning_rate = to_double(key, value);
  else if (key == "train.batch_size") batch_size = to_index(key, value);
  else if (key == "train.detection_epochs") detection_epochs = to_index(key, value);
  else if (key == "train.classification_epochs") {
    classification_epochs = to_index(key, value);
  } else if (key == "train.segmentation_epochs") {
    segmentation_epochs = to_index(key, value);
  } else if (key == "train.train_fraction") train_fraction = to_double(key, value);
  else if (key == "train.per_epoch_validation") {
    per_epoch_validation = to_bool(key, value);
  } else if (key == "train.backbone_trainable_in_detection") {
    backbone_trainable_in_detection = to_bool(key, value);
  } else if (key == "metrics.iou_threshold") iou_threshold = to_double(key, value);
  else {
    throw ConfigError(key, "unknown config key '" + key + "'");
  }
}

std::string RunConfig::get(const std::string& key) const {
  if (key == "seed") return std::to_string(seed);
  if (key == "dataset.root") return dataset_root;
  if (key == "output.dir") return output_dir;
  if (key == "model.input_size") return std::to_string(input_size);
  if (key == "backbone.name") return backbone_name;
  if (key == "backbone.pretrained") return backbone_pretrained ? "true" : "false";
  if (key == "backbone.weights_path") return backbone_weights_path;
  if (key == "heads.cls_widths") return format_index_list(cls_widths);
  if (key == "heads.det_widths") return format_index_list(det_widths);
  if (key == "unet.depth") return std::to_string(unet_depth);
  if (key == "unet.base_channels") return std::to_string(unet_base_channels);
  if (key == "loss.ft_alpha") return format_double(ft_alpha);
  if (key == "loss.ft_beta") return format_double(ft_beta);
  if (key == "loss.ft_gamma") return format_double(ft_gamma);
  if (key == "augment.flip_h_prob") return format_double(flip_h_prob);
  if (key == "augment.flip_v_prob") return format_double(flip_v_prob);
  if (key == "augment.contrast_ablation") return contrast_ablation ? "true" : "false";
  if (key == "train.learning_rate") return format_double(learning_rate);
  if (key == "train.batch_size") return std::to_string(batch_size);
  if (key == "train.detection_epochs") return std::to_string(detection_epochs);
  if (key == "train.classification_epochs") {
    return std::to_string(classification_epochs);
  }
  if (key == "train.segmentation_epochs") return std::to_string(segmentation_epochs);
  if (key == "train.train_fraction") return format_double(train_fraction);
  if (key == "train.per_epoch_validation") {
    return per_epoch_validation ? "true" : "false";
  }
  if (key == "train.backbone_trainable_in_detection") {
    return backbone_trainable_in_detection ? "true" : "false";
  }
  if (key == "metrics.iou_threshold") return format_double(iou_threshold);
  throw ConfigError(key, "unknown config key '" + key + "'");
}

void RunConfig::validate() const {
  auto check = [](bool ok, const std::string& key, const std::string& message) {
    if (!ok) throw ConfigError(key, "config key '" + key + "': " + message);
  };
  check(input_size > 0, "model.input_size", "must be positive");
  check(flip_h_prob >= 0.0 && flip_h_prob <= 1.0, "augment.flip_h_prob",
        "must be in [0,1]");
  check(flip_v_prob >= 0.0 && flip_v_prob <= 1.0, "augment.flip_v_prob",
        "must be in [0,1]");
  check(learning_rate > 0.0, "train.learning_rate", "must be > 0");
  check(batch_size >= 1, "train.batch_size", "must be >= 1");
  check(detection_epochs >= 1, "train.detection_epochs", "must be >= 1");
  check(classification_epochs >= 1, "train.classification_epochs", "must be >= 1");
  check(segmentation_epochs >= 1, "train.segmentation_epochs", "must be >= 1");
  check(train_fraction > 0.0 && train_fraction < 1.0, "train.train_fraction",
        "must be in (0,1)");
  check(iou_threshold > 0.0 && iou_threshold < 1.0, "metrics.iou_threshold",
        "must be in (0,1)");
  check(ft_alpha > 0.0, "loss.ft_alpha", "must be > 0");
  check(ft_beta > 0.0, "loss.ft_beta", "must be > 0");
  check(ft_gamma > 0.0, "loss.ft_gamma", "must be > 0");
  check(unet_depth >= 1, "unet.depth", "must be >= 1");
  check(unet_base_channels >= 1, "unet.base_channels", "must be >= 1");
  bool backbone_known = false;
  check(!cls_widths.empty(), "heads.cls_widths", "must not be empty");
  check(!det_widths.empty(), "heads.det_widths", "must not be empty");
  for (const auto& name : {"densenet121", "resnet50", "tiny", "vgg19"}) {
    backbone_known = backbone_known || backbone_name == name;
  }
  check(backbone_known, "backbone.name",
        "unknown backbone '" + backbone_name +
            "' (densenet121, resnet50, tiny, vgg19)");
}

const std::vector<ConfigKeyInfo>& config_key_registry() {
  static const std::vector<ConfigKeyInfo> registry = [] {
    const RunConfig defaults;
    std::vector<std::pair<std::string, std::string>> keys = {
        {"seed", "random seed for init, splits, and augmentation"},
        {"dataset.root", "dataset directory (images/, masks/, annotations.csv)"},
        {"output.dir", "directory for checkpoint.bin, report.json, artifacts"},
        {"model.input_size", "square input resolution fed to both branches"},
        {"backbone.name", "feature extractor: densenet121, resnet50, tiny, vgg19"},
        {"backbone.pretrained", "load pretrained backbone weights when available"},
        {"backbone.weights_path", "weight-blob file used when pretrained is true"},
        {"heads.cls_widths", "hidden widths of the classification head"},
        {"heads.det_widths", "hidden widths of the detection head"},
        {"unet.depth", "number of encoder/decoder levels"},
        {"unet.base_channels", "channels at the first encoder level"},
        {"loss.ft_alpha", "focal tversky false-negative weight"},
        {"loss.ft_beta", "focal tversky false-positive weight"},
        {"loss.ft_gamma", "focal tversky focal exponent"},
        {"augment.flip_h_prob", "horizontal flip probability"},
        {"augment.flip_v_prob", "vertical flip probability"},
        {"augment.contrast_ablation", "enable contrast/erosion/dilation ablation"},
        {"train.learning_rate", "optimizer step size"},
        {"train.batch_size", "samples per training batch"},
        {"train.detection_epochs", "epochs of the detection stage"},
        {"train.classification_epochs", "epochs of the classification stage"},
        {"train.segmentation_epochs", "epochs of the segmentation stage"},
        {"train.train_fraction", "training share of the dataset split"},
        {"train.per_epoch_validation", "validate after every epoch, not just stages"},
        {"train.backbone_trainable_in_detection",
         "update backbone weights during the detection stage"},
        {"metrics.iou_threshold", "box IoU threshold for average precision"},
    };
    std::vector<ConfigKeyInfo> out;
    out.reserve(keys.size());
    for (auto& [key, description] : keys) {
      out.push_back({key, defaults.get(key), description});
    }
    return out;
  }();
  return registry;
}

RunConfig parse_run_config_text(const std::string& text) {
  RunConfig config;
  std::istringstream is(text);
  std::string line;
  int line_number = 0;
  while (std::getline(is, line)) {
    ++line_number;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(line, detail::concat("config line ", line_number,
                                             ": expected 'key = value', got '", line,
                                             "'"));
    }
    config.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return config;
}

void apply_env_overrides(RunConfig& config) {
  if (const char* env_seed = std::getenv("COLONNET_SEED")) {
    config.seed = to_u64("seed", env_seed);
  }
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path);
  COLONNET_CHECK(is.good(), "cannot open config file: ", path);
  std::ostringstream buffer;
  buffer << is.rdbuf();
  RunConfig config = parse_run_config_text(buffer.str());
  apply_env_overrides(config);
  config.validate();
  return config;
}

}  // namespace colonnet
