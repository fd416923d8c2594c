#pragma once

#include <memory>
#include <string>
#include <vector>

#include "colonnet/nn/layers.hpp"

namespace colonnet::nn {

/// Densely connected block: each step produces `growth` channels from the
/// running concatenation of everything before it. Steps use the bottleneck
/// form (1x1 to 4*growth, then 3x3 to growth), both rectified.
template <typename T>
class DenseBlock : public Layer<T> {
 public:
  DenseBlock(Eigen::Index in_c, Eigen::Index num_steps, Eigen::Index growth, Rng& rng)
      : growth_(growth) {
    Eigen::Index c = in_c;
    for (Eigen::Index i = 0; i < num_steps; ++i) {
      auto step = std::make_unique<Sequential<T>>();
      step->template emplace<ReLU<T>>("relu1");
      step->template emplace<Conv2d<T>>("conv1", c, 4 * growth, 1, 1, 0, rng);
      step->template emplace<ReLU<T>>("relu2");
      step->template emplace<Conv2d<T>>("conv2", 4 * growth, growth, 3, 1, 1, rng);
      steps_.push_back(std::move(step));
      step_in_channels_.push_back(c);
      c += growth;
    }
    out_channels_ = c;
  }

  Eigen::Index out_channels() const { return out_channels_; }

  Tensor<T> forward(const Tensor<T>& x, bool train) override {
    Tensor<T> h = x;
    for (auto& step : steps_) {
      Tensor<T> y = step->forward(h, train);
      h = concat_channels(h, y);
    }
    return h;
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    Tensor<T> h = g;
    for (std::size_t i = steps_.size(); i-- > 0;) {
      auto [gx, gy] = split_channels(h, step_in_channels_[i]);
      Tensor<T> gstep = steps_[i]->backward(gy);
      gx.array() += gstep.array();
      h = std::move(gx);
    }
    return h;
  }

  void collect(const std::string& prefix, ParamRefs<T>& out) override {
    for (std::size_t i = 0; i < steps_.size(); ++i) {
      steps_[i]->collect(prefix + ".step" + std::to_string(i), out);
    }
  }

 private:
  Eigen::Index growth_;
  Eigen::Index out_channels_ = 0;
  std::vector<std::unique_ptr<Sequential<T>>> steps_;
  std::vector<Eigen::Index> step_in_channels_;
};

/// Bottleneck residual unit (1x1 down, 3x3, 1x1 up) with an optional
/// strided 1x1 projection on the shortcut.
template <typename T>
class ResidualBottleneck : public Layer<T> {
 public:
  ResidualBottleneck(Eigen::Index in_c, Eigen::Index mid_c, Eigen::Index out_c,
                     Eigen::Index stride, Rng& rng) {
    main_.template emplace<Conv2d<T>>("conv1", in_c, mid_c, 1, stride, 0, rng);
    main_.template emplace<ReLU<T>>("relu1");
    main_.template emplace<Conv2d<T>>("conv2", mid_c, mid_c, 3, 1, 1, rng);
    main_.template emplace<ReLU<T>>("relu2");
    main_.template emplace<Conv2d<T>>("conv3", mid_c, out_c, 1, 1, 0, rng);
    if (stride != 1 || in_c != out_c) {
      proj_ = std::make_unique<Conv2d<T>>(in_c, out_c, 1, stride, 0, rng);
    }
  }

  Tensor<T> forward(const Tensor<T>& x, bool train) override {
    Tensor<T> m = main_.forward(x, train);
    if (proj_) {
      Tensor<T> p = proj_->forward(x, train);
      m.array() += p.array();
    } else {
      m.array() += x.array();
    }
    return out_relu_.forward(m, train);
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    Tensor<T> gs = out_relu_.backward(g);
    Tensor<T> gx = main_.backward(gs);
    if (proj_) {
      Tensor<T> gp = proj_->backward(gs);
      gx.array() += gp.array();
    } else {
      gx.array() += gs.array();
    }
    return gx;
  }

  void collect(const std::string& prefix, ParamRefs<T>& out) override {
    main_.collect(prefix + ".main", out);
    if (proj_) proj_->collect(prefix + ".proj", out);
  }

 private:
  Sequential<T> main_;
  std::unique_ptr<Conv2d<T>> proj_;
  ReLU<T> out_relu_;
};

/// One downsampling step of the tiny backbone: a 3x3 conv grows the map by
/// `growth` channels, the result is concatenated onto its input, then the
/// whole thing is max-pooled by 2.
template <typename T>
class DenseDownBlock : public Layer<T> {
 public:
  DenseDownBlock(Eigen::Index in_c, Eigen::Index growth, Rng& rng)
      : in_c_(in_c), conv_(in_c, growth, 3, 1, 1, rng), pool_(2, 2, 0) {}

  Eigen::Index out_channels() const { return in_c_ + conv_.out_channels(); }

  Tensor<T> forward(const Tensor<T>& x, bool train) override {
    Tensor<T> y = relu_.forward(conv_.forward(x, train), train);
    return pool_.forward(concat_channels(x, y), train);
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    Tensor<T> gz = pool_.backward(g);
    auto [gx, gy] = split_channels(gz, in_c_);
    Tensor<T> gconv = conv_.backward(relu_.backward(gy));
    gx.array() += gconv.array();
    return gx;
  }

  void collect(const std::string& prefix, ParamRefs<T>& out) override {
    conv_.collect(prefix + ".conv", out);
  }

 private:
  Eigen::Index in_c_;
  Conv2d<T> conv_;
  ReLU<T> relu_;
  MaxPool2d<T> pool_;
};

}  // namespace colonnet::nn
