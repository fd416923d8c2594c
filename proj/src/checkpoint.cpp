#include "colonnet/checkpoint.hpp"

#include <fstream>

#include "json.hpp"

namespace colonnet {

namespace {

constexpr char kMagic[8] = {'C', 'O', 'L', 'O', 'N', 'C', 'K', '1'};

nlohmann::json config_to_json(const ModelConfig& config) {
  return {
      {"backbone",
       {{"name", config.backbone.name},
        {"input_size", config.backbone.input_size},
        {"pretrained", config.backbone.pretrained},
        {"weights_path", config.backbone.weights_path}}},
      {"heads",
       {{"cls_widths", config.heads.cls_widths},
        {"det_widths", config.heads.det_widths}}},
      {"unet",
       {{"depth", config.unet.depth},
        {"base_channels", config.unet.base_channels},
        {"input_size", config.unet.input_size}}},
      {"focal_tversky",
       {{"alpha", config.focal_tversky.alpha},
        {"beta", config.focal_tversky.beta},
        {"gamma", config.focal_tversky.gamma}}},
  };
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig config;
  const auto& b = j.at("backbone");
  config.backbone.name = b.at("name").get<std::string>();
  config.backbone.input_size = b.at("input_size").get<Eigen::Index>();
  config.backbone.pretrained = b.at("pretrained").get<bool>();
  config.backbone.weights_path = b.at("weights_path").get<std::string>();
  const auto& h = j.at("heads");
  config.heads.cls_widths = h.at("cls_widths").get<std::vector<Eigen::Index>>();
  config.heads.det_widths = h.at("det_widths").get<std::vector<Eigen::Index>>();
  const auto& u = j.at("unet");
  config.unet.depth = u.at("depth").get<Eigen::Index>();
  config.unet.base_channels = u.at("base_channels").get<Eigen::Index>();
  config.unet.input_size = u.at("input_size").get<Eigen::Index>();
  const auto& f = j.at("focal_tversky");
  config.focal_tversky.alpha = f.at("alpha").get<double>();
  config.focal_tversky.beta = f.at("beta").get<double>();
  config.focal_tversky.gamma = f.at("gamma").get<double>();
  return config;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelBundle& model) {
  std::ofstream os(path, std::ios::binary);
  COLONNET_CHECK(os.good(), "cannot open checkpoint file for writing: ", path);

  const auto params = model.all_params();
  nlohmann::json manifest = nlohmann::json::array();
  for (const auto* p : params) {
    manifest.push_back({{"name", p->name}, {"numel", p->value.size()}});
  }
  const nlohmann::json meta = {
      {"config", config_to_json(model.config)},
      {"seed", model.seed},
      {"trained_stages", model.trained_stages},
      {"params", manifest},
  };
  const std::string meta_text = meta.dump();

  os.write(kMagic, sizeof(kMagic));
  const auto meta_len = static_cast<std::uint64_t>(meta_text.size());
  os.write(reinterpret_cast<const char*>(&meta_len), sizeof(meta_len));
  os.write(meta_text.data(), static_cast<std::streamsize>(meta_text.size()));
  save_weight_blob(os, params);
  COLONNET_CHECK(os.good(), "failed writing checkpoint: ", path);
}

ModelBundle load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  COLONNET_CHECK(is.good(), "cannot open checkpoint file: ", path);

  char magic[sizeof(kMagic)] = {};
  is.read(magic, sizeof(magic));
  COLONNET_CHECK(is.good() && std::equal(std::begin(magic), std::end(magic), kMagic),
                 "not a checkpoint file (bad magic): ", path);

  std::uint64_t meta_len = 0;
  is.read(reinterpret_cast<char*>(&meta_len), sizeof(meta_len));
  COLONNET_CHECK(is.good(), "truncated checkpoint header: ", path);
  std::string meta_text(meta_len, '\0');
  is.read(meta_text.data(), static_cast<std::streamsize>(meta_len));
  COLONNET_CHECK(is.good(), "truncated checkpoint metadata: ", path);

  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_text);
  } catch (const std::exception& e) {
    fail("corrupt checkpoint metadata in ", path, ": ", e.what());
  }

  ModelBundle model;
  try {
    model = ModelBundle::build(config_from_json(meta.at("config")),
                               meta.at("seed").get<std::uint64_t>());
    model.trained_stages =
        meta.at("trained_stages").get<std::vector<std::string>>();
  } catch (const std::exception& e) {
    fail("incompatible checkpoint ", path, ": ", e.what());
  }

  const auto params = model.all_params();
  const auto& manifest = meta.at("params");
  COLONNET_CHECK(manifest.size() == params.size(),
                 "incompatible checkpoint: manifest lists ", manifest.size(),
                 " parameters, model has ", params.size());
  load_weight_blob(is, params);
  return model;
}

}  // namespace colonnet
