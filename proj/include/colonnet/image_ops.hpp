#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "colonnet/tensor.hpp"

namespace colonnet {

namespace detail {

template <typename T>
Eigen::Index channels_of(const Tensor<T>& t) {
  COLONNET_CHECK(t.rank() == 2 || t.rank() == 3,
                 "expected HW or HWC tensor, got ", shape_string(t.shape()));
  return t.rank() == 3 ? t.dim(2) : 1;
}

}  // namespace detail

/// Mirror along the horizontal axis: column c -> W-1-c.
template <typename T>
Tensor<T> flip_horizontal_image(const Tensor<T>& img) {
  const Eigen::Index c = detail::channels_of(img);
  const Eigen::Index h = img.dim(0), w = img.dim(1);
  Tensor<T> out(img.shape());
  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) {
      const T* src = img.data() + (y * w + x) * c;
      T* dst = out.data() + (y * w + (w - 1 - x)) * c;
      std::copy(src, src + c, dst);
    }
  }
  return out;
}

/// Mirror along the vertical axis: row r -> H-1-r.
template <typename T>
Tensor<T> flip_vertical_image(const Tensor<T>& img) {
  const Eigen::Index c = detail::channels_of(img);
  const Eigen::Index h = img.dim(0), w = img.dim(1);
  Tensor<T> out(img.shape());
  for (Eigen::Index y = 0; y < h; ++y) {
    const T* src = img.data() + y * w * c;
    T* dst = out.data() + (h - 1 - y) * w * c;
    std::copy(src, src + w * c, dst);
  }
  return out;
}

/// k*90 degrees counter-clockwise; requires a square image.
/// One CCW quarter turn maps old (r, c) to new (H-1-c, r).
template <typename T>
Tensor<T> rot90_image(const Tensor<T>& img, int k) {
  const Eigen::Index c = detail::channels_of(img);
  const Eigen::Index h = img.dim(0), w = img.dim(1);
  COLONNET_CHECK(h == w, "rot90 requires a square image, got ",
                 shape_string(img.shape()));
  k = ((k % 4) + 4) % 4;
  if (k == 0) return img;
  Tensor<T> out(img.shape());
  const Eigen::Index n = h;
  for (Eigen::Index y = 0; y < n; ++y) {
    for (Eigen::Index x = 0; x < n; ++x) {
      Eigen::Index ny = y, nx = x;
      for (int i = 0; i < k; ++i) {
        const Eigen::Index ty = n - 1 - nx;
        nx = ny;
        ny = ty;
      }
      const T* src = img.data() + (y * n + x) * c;
      T* dst = out.data() + (ny * n + nx) * c;
      std::copy(src, src + c, dst);
    }
  }
  return out;
}

/// Bilinear resample with half-pixel centers (align_corners = false), so
/// the sampling grid commutes exactly with flips.
template <typename T>
Tensor<T> bilinear_resize(const Tensor<T>& img, Eigen::Index oh, Eigen::Index ow) {
  const Eigen::Index c = detail::channels_of(img);
  const Eigen::Index h = img.dim(0), w = img.dim(1);
  COLONNET_CHECK(oh > 0 && ow > 0, "resize target must be positive");
  Shape out_shape = img.rank() == 3 ? Shape{oh, ow, c} : Shape{oh, ow};
  Tensor<T> out(out_shape);
  const double sy = static_cast<double>(h) / static_cast<double>(oh);
  const double sx = static_cast<double>(w) / static_cast<double>(ow);
  for (Eigen::Index y = 0; y < oh; ++y) {
    double fy = (static_cast<double>(y) + 0.5) * sy - 0.5;
    fy = std::min(std::max(fy, 0.0), static_cast<double>(h - 1));
    const auto y0 = static_cast<Eigen::Index>(std::floor(fy));
    const Eigen::Index y1 = std::min(y0 + 1, h - 1);
    const double wy = fy - static_cast<double>(y0);
    for (Eigen::Index x = 0; x < ow; ++x) {
      double fx = (static_cast<double>(x) + 0.5) * sx - 0.5;
      fx = std::min(std::max(fx, 0.0), static_cast<double>(w - 1));
      const auto x0 = static_cast<Eigen::Index>(std::floor(fx));
      const Eigen::Index x1 = std::min(x0 + 1, w - 1);
      const double wx = fx - static_cast<double>(x0);
      for (Eigen::Index ch = 0; ch < c; ++ch) {
        const double v00 = img.data()[(y0 * w + x0) * c + ch];
        const double v01 = img.data()[(y0 * w + x1) * c + ch];
        const double v10 = img.data()[(y1 * w + x0) * c + ch];
        const double v11 = img.data()[(y1 * w + x1) * c + ch];
        const double top = v00 + (v01 - v00) * wx;
        const double bot = v10 + (v11 - v10) * wx;
        out.data()[(y * ow + x) * c + ch] = static_cast<T>(top + (bot - top) * wy);
      }
    }
  }
  return out;
}

/// Nearest-neighbor resample; preserves binary values exactly.
template <typename T>
Tensor<T> nearest_resize(const Tensor<T>& img, Eigen::Index oh, Eigen::Index ow) {
  const Eigen::Index c = detail::channels_of(img);
  const Eigen::Index h = img.dim(0), w = img.dim(1);
  COLONNET_CHECK(oh > 0 && ow > 0, "resize target must be positive");
  Shape out_shape = img.rank() == 3 ? Shape{oh, ow, c} : Shape{oh, ow};
  Tensor<T> out(out_shape);
  const double sy = static_cast<double>(h) / static_cast<double>(oh);
  const double sx = static_cast<double>(w) / static_cast<double>(ow);
  for (Eigen::Index y = 0; y < oh; ++y) {
    auto iy = static_cast<Eigen::Index>((static_cast<double>(y) + 0.5) * sy);
    iy = std::min(iy, h - 1);
    for (Eigen::Index x = 0; x < ow; ++x) {
      auto ix = static_cast<Eigen::Index>((static_cast<double>(x) + 0.5) * sx);
      ix = std::min(ix, w - 1);
      const T* src = img.data() + (iy * w + ix) * c;
      T* dst = out.data() + (y * ow + x) * c;
      std::copy(src, src + c, dst);
    }
  }
  return out;
}

namespace detail {

template <typename T, typename Op>
Tensor<T> morph3x3(const Tensor<T>& img, Op op) {
  const Eigen::Index c = channels_of(img);
  const Eigen::Index h = img.dim(0), w = img.dim(1);
  Tensor<T> out(img.shape());
  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) {
      for (Eigen::Index ch = 0; ch < c; ++ch) {
        T acc = img.data()[(y * w + x) * c + ch];
        // window clipped at the borders (valid neighbors only)
        for (Eigen::Index dy = -1; dy <= 1; ++dy) {
          const Eigen::Index iy = y + dy;
          if (iy < 0 || iy >= h) continue;
          for (Eigen::Index dx = -1; dx <= 1; ++dx) {
            const Eigen::Index ix = x + dx;
            if (ix < 0 || ix >= w) continue;
            acc = op(acc, img.data()[(iy * w + ix) * c + ch]);
          }
        }
        out.data()[(y * w + x) * c + ch] = acc;
      }
    }
  }
  return out;
}

}  // namespace detail

/// 3x3 morphological erosion (minimum filter).
template <typename T>
Tensor<T> erode3x3(const Tensor<T>& img) {
  return detail::morph3x3(img, [](T a, T b) { return std::min(a, b); });
}

/// 3x3 morphological dilation (maximum filter).
template <typename T>
Tensor<T> dilate3x3(const Tensor<T>& img) {
  return detail::morph3x3(img, [](T a, T b) { return std::max(a, b); });
}

/// Tile-based local histogram equalization with a clip limit, blended
/// bilinearly between tile mappings. Each tile's mapping is rescaled into
/// the tile's own value range, so constant regions pass through unchanged.
template <typename T>
Tensor<T> local_contrast_enhance(const Tensor<T>& img, Eigen::Index tiles = 4,
                                 double clip_limit = 2.0) {
  constexpr int kBins = 256;
  const Eigen::Index c = detail::channels_of(img);
  const Eigen::Index h = img.dim(0), w = img.dim(1);
  COLONNET_CHECK(tiles > 0, "tile count must be positive");
  tiles = std::min({tiles, h, w});
  const Eigen::Index th = (h + tiles - 1) / tiles;
  const Eigen::Index tw = (w + tiles - 1) / tiles;

  // Per-tile, per-channel lookup tables.
  std::vector<std::array<double, kBins>> luts(
      static_cast<std::size_t>(tiles * tiles * c));
  for (Eigen::Index ty = 0; ty < tiles; ++ty) {
    for (Eigen::Index tx = 0; tx < tiles; ++tx) {
      const Eigen::Index y0 = ty * th, y1 = std::min(y0 + th, h);
      const Eigen::Index x0 = tx * tw, x1 = std::min(x0 + tw, w);
      for (Eigen::Index ch = 0; ch < c; ++ch) {
        std::array<double, kBins> hist{};
        double lo = 1.0, hi = 0.0;
        for (Eigen::Index y = y0; y < y1; ++y) {
          for (Eigen::Index x = x0; x < x1; ++x) {
            const double v =
                std::clamp<double>(img.data()[(y * w + x) * c + ch], 0.0, 1.0);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
            ++hist[static_cast<std::size_t>(
                std::min<int>(kBins - 1, static_cast<int>(v * kBins)))];
          }
        }
        auto& lut = luts[static_cast<std::size_t>((ty * tiles + tx) * c + ch)];
        const double count = static_cast<double>((y1 - y0) * (x1 - x0));
        if (hi <= lo) {
          // Constant tile: a near-identity ramp serves queries blended in
          // from neighboring tiles, with an exact knot at the tile's own
          // value so constant regions pass through unchanged.
          for (int i = 0; i < kBins; ++i) {
            lut[static_cast<std::size_t>(i)] = (i + 0.5) / kBins;
          }
          lut[static_cast<std::size_t>(
              std::min<int>(kBins - 1, static_cast<int>(lo * kBins)))] = lo;
          continue;
        }
        // Clip the histogram and spread the excess uniformly.
        const double cap = clip_limit * count / kBins;
        double excess = 0.0;
        for (auto& b : hist) {
          if (b > cap) {
            excess += b - cap;
            b = cap;
          }
        }
        for (auto& b : hist) b += excess / kBins;
        double cdf = 0.0;
        for (int i = 0; i < kBins; ++i) {
          cdf += hist[static_cast<std::size_t>(i)];
          lut[static_cast<std::size_t>(i)] = lo + (hi - lo) * (cdf / count);
        }
      }
    }
  }

  auto lut_value = [&](Eigen::Index ty, Eigen::Index tx, Eigen::Index ch, double v) {
    ty = std::clamp<Eigen::Index>(ty, 0, tiles - 1);
    tx = std::clamp<Eigen::Index>(tx, 0, tiles - 1);
    const auto bin = static_cast<std::size_t>(
        std::min<int>(kBins - 1, static_cast<int>(std::clamp(v, 0.0, 1.0) * kBins)));
    return luts[static_cast<std::size_t>((ty * tiles + tx) * c + ch)][bin];
  };

  Tensor<T> out(img.shape());
  for (Eigen::Index y = 0; y < h; ++y) {
    const double gy = (static_cast<double>(y) + 0.5) / static_cast<double>(th) - 0.5;
    const auto ty0 = static_cast<Eigen::Index>(std::floor(gy));
    const double wy = gy - static_cast<double>(ty0);
    for (Eigen::Index x = 0; x < w; ++x) {
      const double gx = (static_cast<double>(x) + 0.5) / static_cast<double>(tw) - 0.5;
      const auto tx0 = static_cast<Eigen::Index>(std::floor(gx));
      const double wx = gx - static_cast<double>(tx0);
      for (Eigen::Index ch = 0; ch < c; ++ch) {
        const double v = img.data()[(y * w + x) * c + ch];
        const double top = lut_value(ty0, tx0, ch, v) * (1.0 - wx) +
                           lut_value(ty0, tx0 + 1, ch, v) * wx;
        const double bot = lut_value(ty0 + 1, tx0, ch, v) * (1.0 - wx) +
                           lut_value(ty0 + 1, tx0 + 1, ch, v) * wx;
        out.data()[(y * w + x) * c + ch] =
            static_cast<T>(std::clamp(top * (1.0 - wy) + bot * wy, 0.0, 1.0));
      }
    }
  }
  return out;
}

}  // namespace colonnet
