#pragma once

#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "colonnet/nn/blocks.hpp"
#include "colonnet/nn/layers.hpp"

namespace colonnet {

inline const std::vector<std::string>& backbone_registry() {
  static const std::vector<std::string> names = {"densenet121", "resnet50", "tiny",
                                                 "vgg19"};
  return names;
}

/// Shape contract of a feature extractor. Every registered backbone reduces
/// the spatial grid by a factor of 32.
struct BackboneSpec {
  std::string name = "densenet121";
  Eigen::Index input_size = 224;
  bool pretrained = false;
  std::string weights_path;

  void validate() const {
    bool known = false;
    for (const auto& n : backbone_registry()) known = known || n == name;
    if (!known) {
      std::string listing;
      for (const auto& n : backbone_registry()) {
        if (!listing.empty()) listing += ", ";
        listing += n;
      }
      fail(detail::concat("unknown backbone '", name, "'; registry contains: ",
                          listing));
    }
    COLONNET_CHECK(input_size > 0 && input_size % 32 == 0,
                   "backbone input_size must be a positive multiple of 32, got ",
                   input_size);
  }

  Eigen::Index feature_hw() const { return input_size / 32; }

  Eigen::Index feature_channels() const {
    if (name == "densenet121") return 1024;
    if (name == "vgg19") return 512;
    if (name == "resnet50") return 2048;
    if (name == "tiny") return 64;
    fail("unknown backbone '" + name + "'");
  }

  Shape feature_shape() const {
    return {feature_hw(), feature_hw(), feature_channels()};
  }
};

// --- simple named-parameter weight files -------------------------------------

/// Writes parameters as [u32 count]{ [u32 len][name][u64 numel][f32 data] }.
template <typename T>
void save_weight_blob(std::ostream& os, const nn::ParamRefs<T>& params) {
  auto count = static_cast<std::uint32_t>(params.size());
  os.write(reinterpret_cast<const char*>(&count), sizeof(count));
  for (const auto* p : params) {
    auto len = static_cast<std::uint32_t>(p->name.size());
    os.write(reinterpret_cast<const char*>(&len), sizeof(len));
    os.write(p->name.data(), len);
    auto numel = static_cast<std::uint64_t>(p->value.size());
    os.write(reinterpret_cast<const char*>(&numel), sizeof(numel));
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      auto v = static_cast<float>(p->value[i]);
      os.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
  }
  COLONNET_CHECK(os.good(), "failed writing weight blob");
}

/// Reads back a blob written by save_weight_blob; names and sizes must match
/// the given parameter list exactly, in order.
template <typename T>
void load_weight_blob(std::istream& is, const nn::ParamRefs<T>& params) {
  std::uint32_t count = 0;
  is.read(reinterpret_cast<char*>(&count), sizeof(count));
  COLONNET_CHECK(is.good() && count == params.size(),
                 "weight blob parameter count mismatch: file has ", count,
                 ", model has ", params.size());
  for (auto* p : params) {
    std::uint32_t len = 0;
    is.read(reinterpret_cast<char*>(&len), sizeof(len));
    std::string name(len, '\0');
    is.read(name.data(), len);
    COLONNET_CHECK(is.good() && name == p->name, "weight blob name mismatch: file '",
                   name, "' vs model '", p->name, "'");
    std::uint64_t numel = 0;
    is.read(reinterpret_cast<char*>(&numel), sizeof(numel));
    COLONNET_CHECK(is.good() && numel == static_cast<std::uint64_t>(p->value.size()),
                   "weight blob size mismatch for '", name, "': file ", numel,
                   ", model ", p->value.size());
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      float v = 0;
      is.read(reinterpret_cast<char*>(&v), sizeof(v));
      p->value[i] = static_cast<T>(v);
    }
    COLONNET_CHECK(is.good(), "truncated weight blob at '", name, "'");
  }
}

// --- the extractor -----------------------------------------------------------

/// Convolutional feature extractor with a batch-shape contract on both ends:
/// (B, S, S, 3) -> (B, S/32, S/32, C).
template <typename T>
class Backbone {
 public:
  Backbone(BackboneSpec spec, Rng& rng) : spec_(std::move(spec)) {
    spec_.validate();
    if (spec_.name == "densenet121") {
      build_densenet121(rng);
    } else if (spec_.name == "vgg19") {
      build_vgg19(rng);
    } else if (spec_.name == "resnet50") {
      build_resnet50(rng);
    } else {
      build_tiny(rng);
    }
    if (spec_.pretrained) {
      if (!try_load_weights()) {
        std::cerr << "[colonnet] warning: pretrained weights for '" << spec_.name
                  << "' unavailable"
                  << (spec_.weights_path.empty() ? std::string(" (no weights_path)")
                                                 : " at " + spec_.weights_path)
                  << "; using random initialization\n";
      }
    }
  }

  const BackboneSpec& spec() const { return spec_; }

  /// Inference/training forward pass with full shape validation.
  Tensor<T> forward(const Tensor<T>& batch, bool train) {
    COLONNET_CHECK(batch.rank() == 4 && batch.dim(3) == 3,
                   "backbone expected (B, S, S, 3), got ",
                   shape_string(batch.shape()));
    COLONNET_CHECK(batch.dim(1) == spec_.input_size && batch.dim(2) == spec_.input_size,
                   "backbone '", spec_.name, "' expected spatial size ",
                   spec_.input_size, "x", spec_.input_size, ", got ", batch.dim(1),
                   "x", batch.dim(2));
    Tensor<T> f = net_.forward(batch, train);
    const Eigen::Index hw = spec_.feature_hw();
    COLONNET_CHECK(f.rank() == 4 && f.dim(1) == hw && f.dim(2) == hw &&
                       f.dim(3) == spec_.feature_channels(),
                   "backbone '", spec_.name, "' produced ", shape_string(f.shape()),
                   ", contract is (B, ", hw, ", ", hw, ", ",
                   spec_.feature_channels(), ")");
    return f;
  }

  Tensor<T> backward(const Tensor<T>& grad) { return net_.backward(grad); }

  void collect(const std::string& prefix, nn::ParamRefs<T>& out) {
    net_.collect(prefix, out);
  }

  nn::ParamRefs<T> params() {
    nn::ParamRefs<T> out;
    collect("backbone", out);
    return out;
  }

 private:
  void build_densenet121(Rng& rng) {
    net_.template emplace<nn::Conv2d<T>>("stem_conv", 3, 64, 7, 2, 3, rng);
    net_.template emplace<nn::ReLU<T>>("stem_relu");
    net_.template emplace<nn::MaxPool2d<T>>("stem_pool", 3, 2, 1);
    Eigen::Index c = 64;
    const Eigen::Index steps[4] = {6, 12, 24, 16};
    for (int i = 0; i < 4; ++i) {
      auto& block = net_.template emplace<nn::DenseBlock<T>>(
          "dense" + std::to_string(i + 1), c, steps[i], 32, rng);
      c = block.out_channels();
      if (i < 3) {
        net_.template emplace<nn::ReLU<T>>("trans" + std::to_string(i + 1) + "_relu");
        net_.template emplace<nn::Conv2d<T>>("trans" + std::to_string(i + 1) + "_conv",
                                             c, c / 2, 1, 1, 0, rng);
        net_.template emplace<nn::AvgPool2d<T>>(
            "trans" + std::to_string(i + 1) + "_pool", 2, 2);
        c /= 2;
      }
    }
    net_.template emplace<nn::ReLU<T>>("final_relu");
  }

  void build_vgg19(Rng& rng) {
    const Eigen::Index widths[5] = {64, 128, 256, 512, 512};
    const int convs[5] = {2, 2, 4, 4, 4};
    Eigen::Index c = 3;
    for (int s = 0; s < 5; ++s) {
      for (int i = 0; i < convs[s]; ++i) {
        const std::string tag = std::to_string(s + 1) + "_" + std::to_string(i + 1);
        net_.template emplace<nn::Conv2d<T>>("conv" + tag, c, widths[s], 3, 1, 1, rng);
        net_.template emplace<nn::ReLU<T>>("relu" + tag);
        c = widths[s];
      }
      net_.template emplace<nn::MaxPool2d<T>>("pool" + std::to_string(s + 1), 2, 2);
    }
  }

  void build_resnet50(Rng& rng) {
    net_.template emplace<nn::Conv2d<T>>("stem_conv", 3, 64, 7, 2, 3, rng);
    net_.template emplace<nn::ReLU<T>>("stem_relu");
    net_.template emplace<nn::MaxPool2d<T>>("stem_pool", 3, 2, 1);
    const int counts[4] = {3, 4, 6, 3};
    const Eigen::Index mids[4] = {64, 128, 256, 512};
    Eigen::Index c = 64;
    for (int s = 0; s < 4; ++s) {
      const Eigen::Index out_c = mids[s] * 4;
      for (int i = 0; i < counts[s]; ++i) {
        const Eigen::Index stride = (i == 0 && s > 0) ? 2 : 1;
        net_.template emplace<nn::ResidualBottleneck<T>>(
            "stage" + std::to_string(s + 1) + "_" + std::to_string(i + 1), c, mids[s],
            out_c, stride, rng);
        c = out_c;
      }
    }
  }

  /// Desk-scale extractor built from flip-equivariant pieces only
  /// (stride-1 3x3 convolutions and 2x2 pooling on even grids).
  void build_tiny(Rng& rng) {
    net_.template emplace<nn::Conv2d<T>>("stem_conv", 3, 16, 3, 1, 1, rng);
    net_.template emplace<nn::ReLU<T>>("stem_relu");
    net_.template emplace<nn::MaxPool2d<T>>("stem_pool", 2, 2);
    Eigen::Index c = 16;
    for (int i = 0; i < 4; ++i) {
      auto& block = net_.template emplace<nn::DenseDownBlock<T>>(
          "down" + std::to_string(i + 1), c, 16, rng);
      c = block.out_channels();
    }
    net_.template emplace<nn::Conv2d<T>>("head_conv", c, 64, 1, 1, 0, rng);
    net_.template emplace<nn::ReLU<T>>("head_relu");
  }

  bool try_load_weights() {
    if (spec_.weights_path.empty()) return false;
    std::ifstream is(spec_.weights_path, std::ios::binary);
    if (!is) return false;
    try {
      load_weight_blob(is, params());
    } catch (const std::exception& e) {
      std::cerr << "[colonnet] warning: failed to load weights from "
                << spec_.weights_path << ": " << e.what() << "\n";
      return false;
    }
    return true;
  }

  BackboneSpec spec_;
  nn::Sequential<T> net_;
};

template <typename T = float>
std::unique_ptr<Backbone<T>> build_backbone(const BackboneSpec& spec, Rng& rng) {
  return std::make_unique<Backbone<T>>(spec, rng);
}

}  // namespace colonnet
