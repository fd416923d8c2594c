#pragma once

#include <memory>
#include <string>
#include <vector>

#include "colonnet/backbone.hpp"
#include "colonnet/config.hpp"
#include "colonnet/heads.hpp"
#include "colonnet/losses.hpp"
#include "colonnet/unet.hpp"

namespace colonnet {

/// The four independently freezable parameter groups.
enum class Component { backbone, classification_head, detection_head, unet };

inline const char* component_name(Component c) {
  switch (c) {
    case Component::backbone: return "backbone";
    case Component::classification_head: return "classification_head";
    case Component::detection_head: return "detection_head";
    case Component::unet: return "unet";
  }
  return "?";
}

inline Component component_from_name(const std::string& name) {
  for (Component c : {Component::backbone, Component::classification_head,
                      Component::detection_head, Component::unet}) {
    if (name == component_name(c)) return c;
  }
  fail("unknown model component '" + name + "'");
}

/// Architecture description, extracted from a RunConfig (or built directly
/// in tests).
struct ModelConfig {
  BackboneSpec backbone;
  HeadConfig heads;
  UNetConfig unet;
  FocalTverskyConfig focal_tversky;

  static ModelConfig from_run_config(const RunConfig& run) {
    ModelConfig m;
    m.backbone.name = run.backbone_name;
    m.backbone.input_size = run.input_size;
    m.backbone.pretrained = run.backbone_pretrained;
    m.backbone.weights_path = run.backbone_weights_path;
    m.heads.cls_widths = run.cls_widths;
    m.heads.det_widths = run.det_widths;
    m.unet.depth = run.unet_depth;
    m.unet.base_channels = run.unet_base_channels;
    m.unet.input_size = run.input_size;
    m.focal_tversky.alpha = run.ft_alpha;
    m.focal_tversky.beta = run.ft_beta;
    m.focal_tversky.gamma = run.ft_gamma;
    return m;
  }

  void validate() const {
    backbone.validate();
    heads.validate();
    unet.validate();
    focal_tversky.validate();
    COLONNET_CHECK(backbone.input_size == unet.input_size,
                   "backbone and unet must share one input size, got ",
                   backbone.input_size, " vs ", unet.input_size);
  }
};

/// The three trainable parts plus bookkeeping (seed, which stages have
/// completed). Built once from a seed; checkpointing restores bit-identical
/// parameters.
struct ModelBundle {
  ModelConfig config;
  std::uint64_t seed = 0;
  std::unique_ptr<Backbone<float>> backbone;
  std::unique_ptr<ColonSegHeads<float>> heads;
  std::unique_ptr<UNet<float>> unet;
  std::vector<std::string> trained_stages;

  static ModelBundle build(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    ModelBundle m;
    m.config = config;
    m.seed = seed;
    Rng root(seed);
    Rng backbone_rng = root.derive(1);
    Rng heads_rng = root.derive(2);
    Rng unet_rng = root.derive(3);
    m.backbone = std::make_unique<Backbone<float>>(config.backbone, backbone_rng);
    m.heads = std::make_unique<ColonSegHeads<float>>(
        config.heads, config.backbone.feature_shape(), heads_rng);
    m.unet = std::make_unique<UNet<float>>(config.unet, unet_rng);
    return m;
  }

  nn::ParamRefs<float> params(Component c) const {
    switch (c) {
      case Component::backbone: return backbone->params();
      case Component::classification_head: return heads->cls_params();
      case Component::detection_head: return heads->det_params();
      case Component::unet: return unet->params();
    }
    fail("unknown component");
  }

  nn::ParamRefs<float> all_params() const {
    nn::ParamRefs<float> out;
    for (Component c : {Component::backbone, Component::classification_head,
                        Component::detection_head, Component::unet}) {
      auto part = params(c);
      out.insert(out.end(), part.begin(), part.end());
    }
    return out;
  }

  std::uint64_t checksum(Component c) const { return nn::params_checksum(params(c)); }

  bool stage_trained(const std::string& stage) const {
    for (const auto& s : trained_stages) {
      if (s == stage) return true;
    }
    return false;
  }
};

}  // namespace colonnet
