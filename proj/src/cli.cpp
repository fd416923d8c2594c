#include "colonnet/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "colonnet/cam.hpp"
#include "colonnet/checkpoint.hpp"
#include "colonnet/config.hpp"
#include "colonnet/dataset.hpp"
#include "colonnet/png_io.hpp"
#include "colonnet/synthgen.hpp"
#include "colonnet/trainer.hpp"

namespace colonnet {

namespace {

namespace fs = std::filesystem;

std::string config_key_footer() {
  std::size_t key_width = 0;
  std::size_t default_width = 0;
  for (const auto& info : config_key_registry()) {
    key_width = std::max(key_width, info.key.size());
    default_width = std::max(default_width, info.default_value.size());
  }
  std::ostringstream os;
  os << "Config keys (key = value lines, '#' comments; defaults shown):\n";
  for (const auto& info : config_key_registry()) {
    os << "  " << info.key << std::string(key_width - info.key.size() + 2, ' ')
       << (info.default_value.empty() ? "(empty)" : info.default_value);
    const std::size_t shown =
        info.default_value.empty() ? 7 : info.default_value.size();
    os << std::string(default_width + 2 - std::min(default_width + 2, shown), ' ')
       << info.description << "\n";
  }
  os << "Environment: COLONNET_SEED overrides the config seed.\n";
  return os.str();
}

void ensure_directory(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  COLONNET_CHECK(!ec && fs::is_directory(dir), "cannot create directory: ", dir);
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  COLONNET_CHECK(os.good(), "cannot open file for writing: ", path);
  os << text;
  COLONNET_CHECK(os.good(), "failed writing file: ", path);
}

int cmd_synth(const SynthConfig& config, const std::string& out_dir) {
  const auto samples = generate(config);
  write_dataset(samples, out_dir);
  std::size_t bleeding = 0;
  for (const auto& s : samples) bleeding += s.label == 1 ? 1 : 0;
  std::cout << "wrote " << samples.size() << " samples (" << bleeding
            << " bleeding) to " << out_dir << "\n";
  return 0;
}

int cmd_train(const std::string& config_path) {
  const RunConfig run = load_run_config(config_path);
  if (run.dataset_root.empty()) {
    throw ConfigError("dataset.root", "config key 'dataset.root' is required");
  }

  const auto samples = load_dataset(run.dataset_root);
  COLONNET_CHECK(samples.size() >= 2, "dataset at ", run.dataset_root,
                 " has fewer than 2 samples");
  auto [train_samples, val_samples] =
      split_dataset(samples, run.train_fraction, run.seed);

  ModelBundle model = ModelBundle::build(ModelConfig::from_run_config(run), run.seed);
  Trainer trainer(model, schedule_from_run_config(run));
  const TrainOutcome outcome = trainer.run_full_schedule(train_samples, val_samples);

  ensure_directory(run.output_dir);
  const std::string checkpoint_path =
      (fs::path(run.output_dir) / "checkpoint.bin").string();
  const std::string report_path = (fs::path(run.output_dir) / "report.json").string();
  save_checkpoint(checkpoint_path, model);
  write_text_file(report_path, outcome.to_json().dump(2) + "\n");

  std::cout << outcome.validation.to_table() << "\n"
            << "checkpoint: " << checkpoint_path << "\n"
            << "report:     " << report_path << "\n";
  return 0;
}

int cmd_evaluate(const std::string& checkpoint_path, const std::string& dataset_root,
                 const std::string& json_path, double iou_threshold) {
  ModelBundle model = load_checkpoint(checkpoint_path);
  const auto samples = load_dataset(dataset_root);
  const MetricsReport report =
      evaluate_model(model, samples, 0.5, iou_threshold);
  std::cout << report.to_table() << "\n";
  const std::string json_line = report.to_json().dump() + "\n";
  if (!json_path.empty()) write_text_file(json_path, json_line);
  std::cout << json_line;
  return 0;
}

int cmd_predict(const std::string& checkpoint_path, const std::string& image_path,
                const std::string& out_dir) {
  ModelBundle model = load_checkpoint(checkpoint_path);
  const Tensorf raw = read_image_png(image_path);
  const std::string id = fs::path(image_path).stem().string();
  ensure_directory(out_dir);

  const Eigen::Index s = model.config.backbone.input_size;
  const Tensorf image = bilinear_resize(raw, s, s);
  Tensorf batch = image.reshaped({1, s, s, 3});

  Tensorf features = model.backbone->forward(batch, false);
  Tensorf probs = model.heads->cls_probs(features, false);
  Tensorf boxes = model.heads->det_boxes(features, false);
  Tensorf seg = model.unet->forward(batch, false);

  const double bleed_prob = static_cast<double>(probs(0, 0));
  const int label = bleed_prob >= 0.5 ? 1 : 0;
  const BoundingBox box =
      corner_sorted_box(boxes(0, 0), boxes(0, 1), boxes(0, 2), boxes(0, 3));

  const MaskTensor mask = binarize_mask(seg.reshaped({s, s}), 0.5);
  write_mask_png((fs::path(out_dir) / (id + "_mask.png")).string(), mask);

  // The bbox overlay is suppressed (plain image) for non-bleeding predictions.
  Tensorf bbox_image = label == 1 ? draw_bbox(image, box) : image;
  write_image_png((fs::path(out_dir) / (id + "_bbox.png")).string(), bbox_image);

  const Heatmap heat = compute_cam(*model.backbone, *model.heads, image);
  write_image_png((fs::path(out_dir) / (id + "_cam.png")).string(),
                  overlay(image, heat.upsampled));

  const nlohmann::json line = {
      {"id", id},
      {"bleed_prob", bleed_prob},
      {"label", label},
      {"bbox", {box.x_min, box.y_min, box.x_max, box.y_max}},
  };
  const std::string json_line = line.dump() + "\n";
  write_text_file((fs::path(out_dir) / (id + "_prediction.json")).string(),
                  json_line);
  std::cout << json_line;
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{
      "colonnet: joint bleeding classification, detection, and segmentation"};
  app.require_subcommand(1);
  const std::string footer = config_key_footer();
  app.footer(footer);

  SynthConfig synth_config;
  std::string synth_out = "synth_data";
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  synth->add_option("--n", synth_config.n_samples, "number of samples")
      ->capture_default_str();
  synth->add_option("--size", synth_config.image_size, "square image size in pixels")
      ->capture_default_str();
  synth
      ->add_option("--fraction", synth_config.bleeding_fraction,
                   "fraction of bleeding samples")
      ->capture_default_str();
  synth->add_option("--seed", synth_config.seed, "random seed")
      ->capture_default_str();
  synth->add_option("--out", synth_out, "output dataset directory")
      ->capture_default_str();

  std::string train_config_path;
  auto* train = app.add_subcommand("train", "run the staged training schedule");
  train->add_option("config", train_config_path, "path to the run config file")
      ->required();
  train->footer(footer);

  std::string eval_checkpoint;
  std::string eval_root;
  std::string eval_json;
  double eval_iou_threshold = 0.5;
  auto* evaluate = app.add_subcommand("evaluate", "score a checkpoint on a dataset");
  evaluate->add_option("checkpoint", eval_checkpoint, "checkpoint file")->required();
  evaluate->add_option("dataset", eval_root, "dataset root directory")->required();
  evaluate->add_option("--json", eval_json, "also write the report JSON here");
  evaluate
      ->add_option("--iou-threshold", eval_iou_threshold,
                   "box IoU threshold for average precision")
      ->capture_default_str();

  std::string predict_checkpoint;
  std::string predict_image;
  std::string predict_out = ".";
  auto* predict =
      app.add_subcommand("predict", "write bbox/mask/CAM artifacts for one image");
  predict->add_option("checkpoint", predict_checkpoint, "checkpoint file")
      ->required();
  predict->add_option("image", predict_image, "input PNG image")->required();
  predict->add_option("--out", predict_out, "output directory")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (synth->parsed()) return cmd_synth(synth_config, synth_out);
    if (train->parsed()) return cmd_train(train_config_path);
    if (evaluate->parsed()) {
      return cmd_evaluate(eval_checkpoint, eval_root, eval_json,
                          eval_iou_threshold);
    }
    if (predict->parsed()) {
      return cmd_predict(predict_checkpoint, predict_image, predict_out);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error [" << e.key() << "]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "error: no command given\n";
  return 1;
}

}  // namespace colonnet
