#pragma once

#include <memory>
#include <string>
#include <vector>

#include "colonnet/nn/layers.hpp"

namespace colonnet {

/// Canonical doubling schedule: level i of the encoder runs at resolution
/// S/2^i with base_channels*2^i channels; input_size must survive `depth`
/// halvings exactly.
struct UNetConfig {
  Eigen::Index depth = 4;
  Eigen::Index base_channels = 64;
  Eigen::Index input_size = 224;

  void validate() const {
    COLONNET_CHECK(depth >= 1, "unet.depth must be >= 1, got ", depth);
    COLONNET_CHECK(base_channels >= 1, "unet.base_channels must be >= 1, got ",
                   base_channels);
    COLONNET_CHECK(input_size > 0, "unet input_size must be positive, got ",
                   input_size);
    const Eigen::Index div = Eigen::Index(1) << depth;
    COLONNET_CHECK(input_size % div == 0, "unet input_size ", input_size,
                   " is not divisible by 2^depth = ", div);
  }

  Eigen::Index channels_at(Eigen::Index level) const {
    return base_channels << level;
  }

  Eigen::Index bottleneck_size() const {
    return input_size >> depth;
  }
};

/// Encoder-decoder segmenter with skip concatenation. All convolutions are
/// size-preserving (3x3, stride 1, pad 1), so the output mask has exactly
/// the input's spatial extent.
template <typename T>
class UNet {
 public:
  UNet(UNetConfig config, Rng& rng) : config_(config) {
    config.validate();
    for (Eigen::Index i = 0; i < config.depth; ++i) {
      const Eigen::Index in_c = i == 0 ? 3 : config.channels_at(i - 1);
      enc_.push_back(make_double_conv(in_c, config.channels_at(i), rng));
      pools_.push_back(std::make_unique<nn::MaxPool2d<T>>(2, 2));
    }
    bottleneck_ = make_double_conv(config.channels_at(config.depth - 1),
                                   config.channels_at(config.depth), rng);
    for (Eigen::Index i = 0; i < config.depth; ++i) {
      ups_.push_back(std::make_unique<nn::ConvTranspose2d<T>>(
          config.channels_at(i + 1), config.channels_at(i), 2, rng));
      dec_.push_back(make_double_conv(2 * config.channels_at(i),
                                      config.channels_at(i), rng));
    }
    final_ = std::make_unique<nn::Sequential<T>>();
    final_->template emplace<nn::Conv2d<T>>("conv", config.base_channels, 1, 1, 1, 0,
                                            rng);
    final_->template emplace<nn::Sigmoid<T>>("sigmoid");
  }

  const UNetConfig& config() const { return config_; }

  /// Structural accessors used to verify the skip wiring.
  Eigen::Index encoder_out_channels(Eigen::Index level) const {
    return config_.channels_at(level);
  }
  Eigen::Index upsample_out_channels(Eigen::Index level) const {
    return config_.channels_at(level);
  }
  Eigen::Index decoder_in_channels(Eigen::Index level) const {
    return 2 * config_.channels_at(level);
  }

  /// (B, S, S, 3) -> (B, S, S, 1) per-pixel probabilities.
  Tensor<T> forward(const Tensor<T>& batch, bool train) {
    COLONNET_CHECK(batch.rank() == 4 && batch.dim(3) == 3,
                   "unet expected (B, S, S, 3), got ", shape_string(batch.shape()));
    COLONNET_CHECK(batch.dim(1) == config_.input_size &&
                       batch.dim(2) == config_.input_size,
                   "unet expected spatial size ", config_.input_size, "x",
                   config_.input_size, ", got ", batch.dim(1), "x", batch.dim(2));
    std::vector<Tensor<T>> skips;
    Tensor<T> h = batch;
    for (Eigen::Index i = 0; i < config_.depth; ++i) {
      h = enc_[static_cast<std::size_t>(i)]->forward(h, train);
      skips.push_back(h);
      h = pools_[static_cast<std::size_t>(i)]->forward(h, train);
    }
    h = bottleneck_->forward(h, train);
    for (Eigen::Index i = config_.depth - 1; i >= 0; --i) {
      h = ups_[static_cast<std::size_t>(i)]->forward(h, train);
      h = nn::concat_channels(skips[static_cast<std::size_t>(i)], h);
      h = dec_[static_cast<std::size_t>(i)]->forward(h, train);
    }
    return final_->forward(h, train);
  }

  /// Backward through the skip topology: concat gradients split into the
  /// encoder branch (held until the encoder unwinds) and the decoder branch.
  Tensor<T> backward(const Tensor<T>& grad) {
    Tensor<T> h = final_->backward(grad);
    std::vector<Tensor<T>> skip_grads(static_cast<std::size_t>(config_.depth));
    for (Eigen::Index i = 0; i < config_.depth; ++i) {
      h = dec_[static_cast<std::size_t>(i)]->backward(h);
      auto [g_skip, g_up] = nn::split_channels(h, config_.channels_at(i));
      skip_grads[static_cast<std::size_t>(i)] = std::move(g_skip);
      h = ups_[static_cast<std::size_t>(i)]->backward(g_up);
    }
    h = bottleneck_->backward(h);
    for (Eigen::Index i = config_.depth - 1; i >= 0; --i) {
      h = pools_[static_cast<std::size_t>(i)]->backward(h);
      h.array() += skip_grads[static_cast<std::size_t>(i)].array();
      h = enc_[static_cast<std::size_t>(i)]->backward(h);
    }
    return h;
  }

  void collect(const std::string& prefix, nn::ParamRefs<T>& out) {
    for (std::size_t i = 0; i < enc_.size(); ++i) {
      enc_[i]->collect(prefix + ".enc" + std::to_string(i), out);
    }
    bottleneck_->collect(prefix + ".bottleneck", out);
    for (std::size_t i = 0; i < ups_.size(); ++i) {
      ups_[i]->collect(prefix + ".up" + std::to_string(i), out);
      dec_[i]->collect(prefix + ".dec" + std::to_string(i), out);
    }
    final_->collect(prefix + ".final", out);
  }

  nn::ParamRefs<T> params() {
    nn::ParamRefs<T> out;
    collect("unet", out);
    return out;
  }

 private:
  static std::unique_ptr<nn::Sequential<T>> make_double_conv(Eigen::Index in_c,
                                                             Eigen::Index out_c,
                                                             Rng& rng) {
    auto block = std::make_unique<nn::Sequential<T>>();
    block->template emplace<nn::Conv2d<T>>("conv1", in_c, out_c, 3, 1, 1, rng);
    block->template emplace<nn::ReLU<T>>("relu1");
    block->template emplace<nn::Conv2d<T>>("conv2", out_c, out_c, 3, 1, 1, rng);
    block->template emplace<nn::ReLU<T>>("relu2");
    return block;
  }

  UNetConfig config_;
  std::vector<std::unique_ptr<nn::Sequential<T>>> enc_;
  std::vector<std::unique_ptr<nn::MaxPool2d<T>>> pools_;
  std::unique_ptr<nn::Sequential<T>> bottleneck_;
  std::vector<std::unique_ptr<nn::ConvTranspose2d<T>>> ups_;
  std::vector<std::unique_ptr<nn::Sequential<T>>> dec_;
  std::unique_ptr<nn::Sequential<T>> final_;
};

/// Threshold per-pixel probabilities into a {0,1} mask. Accepts (H, W) or
/// (H, W, 1); boundary probability counts as foreground.
template <typename T>
MaskTensor binarize_mask(const Tensor<T>& probs, double threshold = 0.5) {
  COLONNET_CHECK(threshold > 0.0 && threshold < 1.0,
                 "mask threshold must be in (0,1), got ", threshold);
  COLONNET_CHECK(probs.rank() == 2 || (probs.rank() == 3 && probs.dim(2) == 1),
                 "binarize_mask expected (H, W) or (H, W, 1), got ",
                 shape_string(probs.shape()));
  MaskTensor mask({probs.dim(0), probs.dim(1)});
  for (Eigen::Index i = 0; i < probs.size(); ++i) {
    mask[i] = static_cast<double>(probs[i]) >= threshold ? 1 : 0;
  }
  return mask;
}

}  // namespace colonnet
