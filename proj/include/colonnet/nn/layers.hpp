#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "colonnet/tensor.hpp"

namespace colonnet::nn {

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;
};

template <typename T>
using ParamRefs = std::vector<Parameter<T>*>;

template <typename T>
void zero_grads(const ParamRefs<T>& params) {
  for (auto* p : params) p->grad.set_zero();
}

template <typename T>
std::uint64_t params_checksum(const ParamRefs<T>& params) {
  std::uint64_t h = 1469598103934665603ull;
  for (const auto* p : params) h = tensor_checksum(p->value, h);
  return h;
}

/// He-normal fill, the default for layers feeding rectifier activations.
template <typename T>
void he_normal(Tensor<T>& w, Eigen::Index fan_in, Rng& rng) {
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    w[i] = static_cast<T>(stddev * rng.gaussian());
  }
}

/// A layer owns its parameters and, after forward(train=true), enough
/// cached state to run backward once. Inference (train=false) mutates no
/// state, so concurrent readers are safe; training requires exclusive
/// access.
template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor<T> forward(const Tensor<T>& x, bool train) = 0;
  virtual Tensor<T> backward(const Tensor<T>& grad_out) = 0;
  virtual void collect(const std::string& prefix, ParamRefs<T>& out) {}
};

// ---------------------------------------------------------------------------
// Fully connected
// ---------------------------------------------------------------------------

template <typename T>
class Dense : public Layer<T> {
 public:
  Dense(Eigen::Index in, Eigen::Index out, Rng& rng) : in_(in), out_(out) {
    COLONNET_CHECK(in > 0 && out > 0, "dense layer sizes must be positive");
    w_.name = "weight";
    w_.value = Tensor<T>({in, out});
    w_.grad = Tensor<T>({in, out});
    he_normal(w_.value, in, rng);
    b_.name = "bias";
    b_.value = Tensor<T>({out});
    b_.grad = Tensor<T>({out});
  }

  Eigen::Index in_features() const { return in_; }
  Eigen::Index out_features() const { return out_; }

  Tensor<T> forward(const Tensor<T>& x, bool train) override {
    COLONNET_CHECK(x.rank() == 2 && x.dim(1) == in_, "dense expected (B, ", in_,
                   "), got ", shape_string(x.shape()));
    const Eigen::Index batch = x.dim(0);
    Tensor<T> y({batch, out_});
    y.matrix(batch, out_).noalias() = x.matrix(batch, in_) * w_.value.matrix(in_, out_);
    y.matrix(batch, out_).rowwise() += b_.value.matrix(1, out_).row(0);
    if (train) x_cache_ = x;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    const Eigen::Index batch = x_cache_.dim(0);
    COLONNET_CHECK(g.rank() == 2 && g.dim(0) == batch && g.dim(1) == out_,
                   "dense backward shape mismatch");
    w_.grad.matrix(in_, out_).noalias() +=
        x_cache_.matrix(batch, in_).transpose() * g.matrix(batch, out_);
    b_.grad.matrix(1, out_).row(0) += g.matrix(batch, out_).colwise().sum();
    Tensor<T> gx({batch, in_});
    gx.matrix(batch, in_).noalias() =
        g.matrix(batch, out_) * w_.value.matrix(in_, out_).transpose();
    return gx;
  }

  void collect(const std::string& prefix, ParamRefs<T>& out) override {
    w_.name = prefix + ".weight";
    b_.name = prefix + ".bias";
    out.push_back(&w_);
    out.push_back(&b_);
  }

 private:
  Eigen::Index in_, out_;
  Parameter<T> w_, b_;
  Tensor<T> x_cache_;
};

// ---------------------------------------------------------------------------
// Convolution (NHWC, square kernel, symmetric zero padding)
// ---------------------------------------------------------------------------

inline Eigen::Index conv_out_size(Eigen::Index in, Eigen::Index k, Eigen::Index stride,
                                  Eigen::Index pad) {
  return (in + 2 * pad - k) / stride + 1;
}

/// Unrolls KxK patches of an NHWC batch into a (B*OH*OW, K*K*C) matrix.
template <typename T>
Tensor<T> im2col(const Tensor<T>& x, Eigen::Index k, Eigen::Index stride,
                 Eigen::Index pad) {
  const Eigen::Index batch = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  const Eigen::Index oh = conv_out_size(h, k, stride, pad);
  const Eigen::Index ow = conv_out_size(w, k, stride, pad);
  Tensor<T> cols({batch * oh * ow, k * k * c});
  T* dst = cols.data();
  const T* src = x.data();
  for (Eigen::Index b = 0; b < batch; ++b) {
    const T* img = src + b * h * w * c;
    for (Eigen::Index oy = 0; oy < oh; ++oy) {
      for (Eigen::Index ox = 0; ox < ow; ++ox) {
        for (Eigen::Index ky = 0; ky < k; ++ky) {
          const Eigen::Index iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) {
            dst += k * c;
            continue;
          }
          for (Eigen::Index kx = 0; kx < k; ++kx) {
            const Eigen::Index ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= w) {
              dst += c;
              continue;
            }
            std::memcpy(dst, img + (iy * w + ix) * c,
                        static_cast<std::size_t>(c) * sizeof(T));
            dst += c;
          }
        }
      }
    }
  }
  return cols;
}

/// Scatter-add inverse of im2col.
template <typename T>
Tensor<T> col2im(const Tensor<T>& cols, Eigen::Index batch, Eigen::Index h,
                 Eigen::Index w, Eigen::Index c, Eigen::Index k,
                 Eigen::Index stride, Eigen::Index pad) {
  const Eigen::Index oh = conv_out_size(h, k, stride, pad);
  const Eigen::Index ow = conv_out_size(w, k, stride, pad);
  Tensor<T> x({batch, h, w, c});
  const T* src = cols.data();
  T* dst = x.data();
  for (Eigen::Index b = 0; b < batch; ++b) {
    T* img = dst + b * h * w * c;
    for (Eigen::Index oy = 0; oy < oh; ++oy) {
      for (Eigen::Index ox = 0; ox < ow; ++ox) {
        for (Eigen::Index ky = 0; ky < k; ++ky) {
          const Eigen::Index iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= h) {
            src += k * c;
            continue;
          }
          for (Eigen::Index kx = 0; kx < k; ++kx) {
            const Eigen::Index ix = ox * stride - pad + kx;
            if (ix < 0 || ix >= w) {
              src += c;
              continue;
            }
            T* cell = img + (iy * w + ix) * c;
            for (Eigen::Index ch = 0; ch < c; ++ch) cell[ch] += src[ch];
            src += c;
          }
        }
      }
    }
  }
  return x;
}

template <typename T>
class Conv2d : public Layer<T> {
 public:
  Conv2d(Eigen::Index in_c, Eigen::Index out_c, Eigen::Index k, Eigen::Index stride,
         Eigen::Index pad, Rng& rng)
      : in_c_(in_c), out_c_(out_c), k_(k), stride_(stride), pad_(pad) {
    COLONNET_CHECK(in_c > 0 && out_c > 0 && k > 0 && stride > 0 && pad >= 0,
                   "bad conv configuration");
    w_.name = "weight";
    w_.value = Tensor<T>({k, k, in_c, out_c});
    w_.grad = Tensor<T>({k, k, in_c, out_c});
    he_normal(w_.value, k * k * in_c, rng);
    b_.name = "bias";
    b_.value = Tensor<T>({out_c});
    b_.grad = Tensor<T>({out_c});
  }

  Eigen::Index in_channels() const { return in_c_; }
  Eigen::Index out_channels() const { return out_c_; }

  Tensor<T> forward(const Tensor<T>& x, bool train) override {
    COLONNET_CHECK(x.rank() == 4 && x.dim(3) == in_c_, "conv expected NHWC with C=",
                   in_c_, ", got ", shape_string(x.shape()));
    const Eigen::Index batch = x.dim(0), h = x.dim(1), w = x.dim(2);
    const Eigen::Index oh = conv_out_size(h, k_, stride_, pad_);
    const Eigen::Index ow = conv_out_size(w, k_, stride_, pad_);
    COLONNET_CHECK(oh > 0 && ow > 0, "conv output collapsed to zero for input ",
                   shape_string(x.shape()));
    Tensor<T> cols = im2col(x, k_, stride_, pad_);
    const Eigen::Index rows = batch * oh * ow, kk = k_ * k_ * in_c_;
    Tensor<T> y({batch, oh, ow, out_c_});
    y.matrix(rows, out_c_).noalias() =
        cols.matrix(rows, kk) * w_.value.matrix(kk, out_c_);
    y.matrix(rows, out_c_).rowwise() += b_.value.matrix(1, out_c_).row(0);
    if (train) x_cache_ = x;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    const Eigen::Index batch = x_cache_.dim(0), h = x_cache_.dim(1), w = x_cache_.dim(2);
    const Eigen::Index oh = conv_out_size(h, k_, stride_, pad_);
    const Eigen::Index ow = conv_out_size(w, k_, stride_, pad_);
    COLONNET_CHECK(g.rank() == 4 && g.dim(0) == batch && g.dim(1) == oh &&
                       g.dim(2) == ow && g.dim(3) == out_c_,
                   "conv backward shape mismatch");
    const Eigen::Index rows = batch * oh * ow, kk = k_ * k_ * in_c_;
    // The column matrix is rebuilt rather than cached: caching the input
    // keeps training memory proportional to activations, not K^2 patches.
    Tensor<T> cols = im2col(x_cache_, k_, stride_, pad_);
    w_.grad.matrix(kk, out_c_).noalias() +=
        cols.matrix(rows, kk).transpose() * g.matrix(rows, out_c_);
    b_.grad.matrix(1, out_c_).row(0) += g.matrix(rows, out_c_).colwise().sum();
    Tensor<T> gcols({rows, kk});
    gcols.matrix(rows, kk).noalias() =
        g.matrix(rows, out_c_) * w_.value.matrix(kk, out_c_).transpose();
    return col2im(gcols, batch, h, w, in_c_, k_, stride_, pad_);
  }

  void collect(const std::string& prefix, ParamRefs<T>& out) override {
    w_.name = prefix + ".weight";
    b_.name = prefix + ".bias";
    out.push_back(&w_);
    out.push_back(&b_);
  }

  Parameter<T>& weight() { return w_; }

 private:
  Eigen::Index in_c_, out_c_, k_, stride_, pad_;
  Parameter<T> w_, b_;
  Tensor<T> x_cache_;
};

/// Transposed convolution restricted to kernel == stride (non-overlapping
/// upsampling), which is all the decoder path needs. Each input pixel maps
/// to a KxK output block, so forward/backward are a single GEMM plus a
/// reshuffle.
template <typename T>
class ConvTranspose2d : public Layer<T> {
 public:
  ConvTranspose2d(Eigen::Index in_c, Eigen::Index out_c, Eigen::Index k, Rng& rng)
      : in_c_(in_c), out_c_(out_c), k_(k) {
    COLONNET_CHECK(in_c > 0 && out_c > 0 && k > 0, "bad transposed-conv configuration");
    w_.name = "weight";
    w_.value = Tensor<T>({in_c, k, k, out_c});
    w_.grad = Tensor<T>({in_c, k, k, out_c});
    he_normal(w_.value, in_c, rng);
    b_.name = "bias";
    b_.value = Tensor<T>({out_c});
    b_.grad = Tensor<T>({out_c});
  }

  Eigen::Index in_channels() const { return in_c_; }
  Eigen::Index out_channels() const { return out_c_; }

  Tensor<T> forward(const Tensor<T>& x, bool train) override {
    COLONNET_CHECK(x.rank() == 4 && x.dim(3) == in_c_,
                   "transposed conv expected NHWC with C=", in_c_, ", got ",
                   shape_string(x.shape()));
    const Eigen::Index batch = x.dim(0), h = x.dim(1), w = x.dim(2);
    const Eigen::Index rows = batch * h * w, kk = k_ * k_ * out_c_;
    Tensor<T> blocks({rows, kk});
    blocks.matrix(rows, kk).noalias() =
        x.matrix(rows, in_c_) * w_.value.matrix(in_c_, kk);
    Tensor<T> y({batch, h * k_, w * k_, out_c_});
    scatter_blocks(blocks, y, batch, h, w);
    y.matrix(batch * h * k_ * w * k_, out_c_).rowwise() +=
        b_.value.matrix(1, out_c_).row(0);
    if (train) x_cache_ = x;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    const Eigen::Index batch = x_cache_.dim(0), h = x_cache_.dim(1), w = x_cache_.dim(2);
    COLONNET_CHECK(g.rank() == 4 && g.dim(0) == batch && g.dim(1) == h * k_ &&
                       g.dim(2) == w * k_ && g.dim(3) == out_c_,
                   "transposed conv backward shape mismatch");
    const Eigen::Index rows = batch * h * w, kk = k_ * k_ * out_c_;
    Tensor<T> gblocks({rows, kk});
    gather_blocks(g, gblocks, batch, h, w);
    w_.grad.matrix(in_c_, kk).noalias() +=
        x_cache_.matrix(rows, in_c_).transpose() * gblocks.matrix(rows, kk);
    b_.grad.matrix(1, out_c_).row(0) +=
        g.matrix(batch * h * k_ * w * k_, out_c_).colwise().sum();
    Tensor<T> gx({batch, h, w, in_c_});
    gx.matrix(rows, in_c_).noalias() =
        gblocks.matrix(rows, kk) * w_.value.matrix(in_c_, kk).transpose();
    return gx;
  }

  void collect(const std::string& prefix, ParamRefs<T>& out) override {
    w_.name = prefix + ".weight";
    b_.name = prefix + ".bias";
    out.push_back(&w_);
    out.push_back(&b_);
  }

 private:
  void scatter_blocks(const Tensor<T>& blocks, Tensor<T>& y, Eigen::Index batch,
                      Eigen::Index h, Eigen::Index w) const {
    const Eigen::Index ow = w * k_;
    const T* src = blocks.data();
    for (Eigen::Index b = 0; b < batch; ++b) {
      for (Eigen::Index iy = 0; iy < h; ++iy) {
        for (Eigen::Index ix = 0; ix < w; ++ix) {
          for (Eigen::Index ky = 0; ky < k_; ++ky) {
            T* dst = y.data() +
                     (((b * h * k_ + iy * k_ + ky) * ow + ix * k_) * out_c_);
            std::memcpy(dst, src, static_cast<std::size_t>(k_ * out_c_) * sizeof(T));
            src += k_ * out_c_;
          }
        }
      }
    }
  }

  void gather_blocks(const Tensor<T>& g, Tensor<T>& blocks, Eigen::Index batch,
                     Eigen::Index h, Eigen::Index w) const {
    const Eigen::Index ow = w * k_;
    T* dst = blocks.data();
    for (Eigen::Index b = 0; b < batch; ++b) {
      for (Eigen::Index iy = 0; iy < h; ++iy) {
        for (Eigen::Index ix = 0; ix < w; ++ix) {
          for (Eigen::Index ky = 0; ky < k_; ++ky) {
            const T* src = g.data() +
                           (((b * h * k_ + iy * k_ + ky) * ow + ix * k_) * out_c_);
            std::memcpy(dst, src, static_cast<std::size_t>(k_ * out_c_) * sizeof(T));
            dst += k_ * out_c_;
          }
        }
      }
    }
  }

  Eigen::Index in_c_, out_c_, k_;
  Parameter<T> w_, b_;
  Tensor<T> x_cache_;
};

// ---------------------------------------------------------------------------
// Pooling
// ---------------------------------------------------------------------------

template <typename T>
class MaxPool2d : public Layer<T> {
 public:
  MaxPool2d(Eigen::Index k, Eigen::Index stride, Eigen::Index pad = 0)
      : k_(k), stride_(stride), pad_(pad) {}

  Tensor<T> forward(const Tensor<T>& x, bool train) override {
    COLONNET_CHECK(x.rank() == 4, "pool expected NHWC input");
    const Eigen::Index batch = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
    const Eigen::Index oh = conv_out_size(h, k_, stride_, pad_);
    const Eigen::Index ow = conv_out_size(w, k_, stride_, pad_);
    Tensor<T> y({batch, oh, ow, c});
    std::vector<Eigen::Index> argmax;
    if (train) argmax.resize(static_cast<std::size_t>(y.size()));
    Eigen::Index out_i = 0;
    for (Eigen::Index b = 0; b < batch; ++b) {
      for (Eigen::Index oy = 0; oy < oh; ++oy) {
        for (Eigen::Index ox = 0; ox < ow; ++ox) {
          for (Eigen::Index ch = 0; ch < c; ++ch) {
            T best = -std::numeric_limits<T>::infinity();
            Eigen::Index best_i = -1;
            for (Eigen::Index ky = 0; ky < k_; ++ky) {
              const Eigen::Index iy = oy * stride_ - pad_ + ky;
              if (iy < 0 || iy >= h) continue;
              for (Eigen::Index kx = 0; kx < k_; ++kx) {
                const Eigen::Index ix = ox * stride_ - pad_ + kx;
                if (ix < 0 || ix >= w) continue;
                const Eigen::Index flat = ((b * h + iy) * w + ix) * c + ch;
                if (x[flat] > best) {
                  best = x[flat];
                  best_i = flat;
                }
              }
            }
            COLONNET_CHECK(best_i >= 0, "max pool window fully outside input");
            y[out_i] = best;
            if (train) argmax[static_cast<std::size_t>(out_i)] = best_i;
            ++out_i;
          }
        }
      }
    }
    if (train) {
      argmax_ = std::move(argmax);
      in_shape_ = x.shape();
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    COLONNET_CHECK(static_cast<std::size_t>(g.size()) == argmax_.size(),
                   "max pool backward shape mismatch");
    Tensor<T> gx(in_shape_);
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      gx[argmax_[static_cast<std::size_t>(i)]] += g[i];
    }
    return gx;
  }

 private:
  Eigen::Index k_, stride_, pad_;
  std::vector<Eigen::Index> argmax_;
  Shape in_shape_;
};

template <typename T>
class AvgPool2d : public Layer<T> {
 public:
  AvgPool2d(Eigen::Index k, Eigen::Index stride, Eigen::Index pad = 0)
      : k_(k), stride_(stride), pad_(pad) {}

  Tensor<T> forward(const Tensor<T>& x, bool train) override {
    COLONNET_CHECK(x.rank() == 4, "pool expected NHWC input");
    const Eigen::Index batch = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
    const Eigen::Index oh = conv_out_size(h, k_, stride_, pad_);
    const Eigen::Index ow = conv_out_size(w, k_, stride_, pad_);
    Tensor<T> y({batch, oh, ow, c});
    Eigen::Index out_i = 0;
    for (Eigen::Index b = 0; b < batch; ++b) {
      for (Eigen::Index oy = 0; oy < oh; ++oy) {
        for (Eigen::Index ox = 0; ox < ow; ++ox) {
          Eigen::Index valid = 0;
          for (Eigen::Index ch = 0; ch < c; ++ch) y[out_i + ch] = T(0);
          for (Eigen::Index ky = 0; ky < k_; ++ky) {
            const Eigen::Index iy = oy * stride_ - pad_ + ky;
            if (iy < 0 || iy >= h) continue;
            for (Eigen::Index kx = 0; kx < k_; ++kx) {
              const Eigen::Index ix = ox * stride_ - pad_ + kx;
              if (ix < 0 || ix >= w) continue;
              ++valid;
              const T* cell = x.data() + ((b * h + iy) * w + ix) * c;
              for (Eigen::Index ch = 0; ch < c; ++ch) y[out_i + ch] += cell[ch];
            }
          }
          COLONNET_CHECK(valid > 0, "avg pool window fully outside input");
          for (Eigen::Index ch = 0; ch < c; ++ch) {
            y[out_i + ch] /= static_cast<T>(valid);
          }
          out_i += c;
        }
      }
    }
    if (train) in_shape_ = x.shape();
    return y;
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    const Eigen::Index batch = in_shape_[0], h = in_shape_[1], w = in_shape_[2],
                       c = in_shape_[3];
    Tensor<T> gx(in_shape_);
    const Eigen::Index oh = conv_out_size(h, k_, stride_, pad_);
    const Eigen::Index ow = conv_out_size(w, k_, stride_, pad_);
    COLONNET_CHECK(g.rank() == 4 && g.dim(1) == oh && g.dim(2) == ow,
                   "avg pool backward shape mismatch");
    Eigen::Index out_i = 0;
    for (Eigen::Index b = 0; b < batch; ++b) {
      for (Eigen::Index oy = 0; oy < oh; ++oy) {
        for (Eigen::Index ox = 0; ox < ow; ++ox) {
          Eigen::Index valid = 0;
          for (Eigen::Index ky = 0; ky < k_; ++ky) {
            const Eigen::Index iy = oy * stride_ - pad_ + ky;
            if (iy < 0 || iy >= h) continue;
            for (Eigen::Index kx = 0; kx < k_; ++kx) {
              const Eigen::Index ix = ox * stride_ - pad_ + kx;
              if (ix >= 0 && ix < w) ++valid;
            }
          }
          for (Eigen::Index ky = 0; ky < k_; ++ky) {
            const Eigen::Index iy = oy * stride_ - pad_ + ky;
            if (iy < 0 || iy >= h) continue;
            for (Eigen::Index kx = 0; kx < k_; ++kx) {
              const Eigen::Index ix = ox * stride_ - pad_ + kx;
              if (ix < 0 || ix >= w) continue;
              T* cell = gx.data() + ((b * h + iy) * w + ix) * c;
              for (Eigen::Index ch = 0; ch < c; ++ch) {
                cell[ch] += g[out_i + ch] / static_cast<T>(valid);
              }
            }
          }
          out_i += c;
        }
      }
    }
    return gx;
  }

 private:
  Eigen::Index k_, stride_, pad_;
  Shape in_shape_;
};

// ---------------------------------------------------------------------------
// Activations & reshaping
// ---------------------------------------------------------------------------

template <typename T>
class ReLU : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, bool train) override {
    Tensor<T> y(x.shape());
    y.array() = x.array().max(T(0));
    if (train) x_cache_ = x;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    Tensor<T> gx(x_cache_.shape());
    gx.array() = g.array() * (x_cache_.array() > T(0)).template cast<T>();
    return gx;
  }

 private:
  Tensor<T> x_cache_;
};

template <typename T>
class ELU : public Layer<T> {
 public:
  explicit ELU(T alpha = T(1)) : alpha_(alpha) {}

  Tensor<T> forward(const Tensor<T>& x, bool train) override {
    Tensor<T> y(x.shape());
    y.array() = (x.array() > T(0))
                    .select(x.array(), alpha_ * (x.array().exp() - T(1)));
    if (train) {
      x_cache_ = x;
      y_cache_ = y;
    }
    return y;
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    Tensor<T> gx(x_cache_.shape());
    // d/dx = 1 for x > 0, y + alpha otherwise.
    gx.array() = g.array() * (x_cache_.array() > T(0))
                                 .select(Tensor<T>::full(x_cache_.shape(), T(1)).array(),
                                         y_cache_.array() + alpha_);
    return gx;
  }

 private:
  T alpha_;
  Tensor<T> x_cache_, y_cache_;
};

template <typename T>
class Sigmoid : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, bool train) override {
    Tensor<T> y(x.shape());
    // 0.5 * (1 + tanh(x/2)) is the numerically stable sigmoid.
    y.array() = ((x.array() * T(0.5)).tanh() + T(1)) * T(0.5);
    if (train) y_cache_ = y;
    return y;
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    Tensor<T> gx(y_cache_.shape());
    gx.array() = g.array() * y_cache_.array() * (T(1) - y_cache_.array());
    return gx;
  }

 private:
  Tensor<T> y_cache_;
};

template <typename T>
class Flatten : public Layer<T> {
 public:
  Tensor<T> forward(const Tensor<T>& x, bool train) override {
    COLONNET_CHECK(x.rank() >= 2, "flatten expected batched input");
    if (train) in_shape_ = x.shape();
    return x.reshaped({x.dim(0), x.size() / x.dim(0)});
  }

  Tensor<T> backward(const Tensor<T>& g) override { return g.reshaped(in_shape_); }

 private:
  Shape in_shape_;
};

// ---------------------------------------------------------------------------
// Composition helpers
// ---------------------------------------------------------------------------

template <typename T>
class Sequential : public Layer<T> {
 public:
  Sequential() = default;

  template <typename L, typename... Args>
  L& emplace(std::string name, Args&&... args) {
    auto layer = std::make_unique<L>(std::forward<Args>(args)...);
    L& ref = *layer;
    layers_.push_back(std::move(layer));
    names_.push_back(std::move(name));
    return ref;
  }

  std::size_t size() const { return layers_.size(); }
  Layer<T>& layer(std::size_t i) { return *layers_[i]; }
  const std::string& name(std::size_t i) const { return names_[i]; }

  Tensor<T> forward(const Tensor<T>& x, bool train) override {
    Tensor<T> h = x;
    for (auto& l : layers_) h = l->forward(h, train);
    return h;
  }

  Tensor<T> backward(const Tensor<T>& g) override {
    Tensor<T> h = g;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
      h = (*it)->backward(h);
    }
    return h;
  }

  void collect(const std::string& prefix, ParamRefs<T>& out) override {
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      layers_[i]->collect(prefix + "." + names_[i], out);
    }
  }

 private:
  std::vector<std::unique_ptr<Layer<T>>> layers_;
  std::vector<std::string> names_;
};

/// Channel-axis concatenation of two NHWC tensors.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  COLONNET_CHECK(a.rank() == 4 && b.rank() == 4 && a.dim(0) == b.dim(0) &&
                     a.dim(1) == b.dim(1) && a.dim(2) == b.dim(2),
                 "concat expects matching NHW dims, got ", shape_string(a.shape()),
                 " vs ", shape_string(b.shape()));
  const Eigen::Index pixels = a.dim(0) * a.dim(1) * a.dim(2);
  const Eigen::Index ca = a.dim(3), cb = b.dim(3);
  Tensor<T> out({a.dim(0), a.dim(1), a.dim(2), ca + cb});
  for (Eigen::Index p = 0; p < pixels; ++p) {
    std::memcpy(out.data() + p * (ca + cb), a.data() + p * ca,
                static_cast<std::size_t>(ca) * sizeof(T));
    std::memcpy(out.data() + p * (ca + cb) + ca, b.data() + p * cb,
                static_cast<std::size_t>(cb) * sizeof(T));
  }
  return out;
}

/// Splits a channel-concatenated gradient back into its two parts.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_channels(const Tensor<T>& g, Eigen::Index ca) {
  COLONNET_CHECK(g.rank() == 4 && g.dim(3) > ca, "split point outside channel range");
  const Eigen::Index pixels = g.dim(0) * g.dim(1) * g.dim(2);
  const Eigen::Index cb = g.dim(3) - ca;
  Tensor<T> a({g.dim(0), g.dim(1), g.dim(2), ca});
  Tensor<T> b({g.dim(0), g.dim(1), g.dim(2), cb});
  for (Eigen::Index p = 0; p < pixels; ++p) {
    std::memcpy(a.data() + p * ca, g.data() + p * (ca + cb),
                static_cast<std::size_t>(ca) * sizeof(T));
    std::memcpy(b.data() + p * cb, g.data() + p * (ca + cb) + ca,
                static_cast<std::size_t>(cb) * sizeof(T));
  }
  return {std::move(a), std::move(b)};
}

}  // namespace colonnet::nn
