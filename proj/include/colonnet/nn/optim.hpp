#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "colonnet/nn/layers.hpp"

namespace colonnet::nn {

/// Adaptive-moment estimation over a fixed parameter list. The list must
/// stay stable for the lifetime of the optimizer (state is positional).
template <typename T>
class Adam {
 public:
  explicit Adam(const ParamRefs<T>& params, T lr, T beta1 = T(0.9),
                T beta2 = T(0.999), T eps = T(1e-8))
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const auto* p : params) {
      m_.emplace_back(p->value.shape());
      v_.emplace_back(p->value.shape());
    }
  }

  void step(const ParamRefs<T>& params) {
    COLONNET_CHECK(params.size() == m_.size(), "optimizer parameter list changed");
    ++t_;
    const T bc1 = T(1) - std::pow(beta1_, static_cast<T>(t_));
    const T bc2 = T(1) - std::pow(beta2_, static_cast<T>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto g = params[i]->grad.array();
      m_[i].array() = beta1_ * m_[i].array() + (T(1) - beta1_) * g;
      v_[i].array() = beta2_ * v_[i].array() + (T(1) - beta2_) * g.square();
      params[i]->value.array() -=
          lr_ * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + eps_);
    }
  }

 private:
  T lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<Tensor<T>> m_, v_;
};

template <typename T>
class Sgd {
 public:
  explicit Sgd(const ParamRefs<T>&, T lr) : lr_(lr) {}

  void step(const ParamRefs<T>& params) {
    for (auto* p : params) p->value.array() -= lr_ * p->grad.array();
  }

 private:
  T lr_;
};

}  // namespace colonnet::nn
