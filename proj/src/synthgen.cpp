#include "colonnet/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "colonnet/png_io.hpp"

namespace colonnet {

namespace fs = std::filesystem;

namespace {

std::string sample_id(Eigen::Index index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "synth_%05lld", static_cast<long long>(index));
  return buf;
}

/// Dim, mildly noisy tissue-like background; returns the red base level.
double paint_background(Tensorf& img, Rng& rng) {
  const double red = rng.uniform(0.30, 0.50);
  const double green = rng.uniform(0.18, 0.32);
  const double blue = rng.uniform(0.15, 0.28);
  const Eigen::Index h = img.dim(0), w = img.dim(1);
  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) {
      // gentle diagonal shading plus per-pixel speckle
      const double shade =
          0.06 * (static_cast<double>(y + x) / static_cast<double>(h + w) - 0.5);
      img(y, x, 0) = static_cast<float>(
          std::clamp(red + shade + rng.uniform(-0.04, 0.04), 0.0, 1.0));
      img(y, x, 1) = static_cast<float>(
          std::clamp(green + shade + rng.uniform(-0.04, 0.04), 0.0, 1.0));
      img(y, x, 2) = static_cast<float>(
          std::clamp(blue + shade + rng.uniform(-0.04, 0.04), 0.0, 1.0));
    }
  }
  return red;
}

struct Ellipse {
  double cx, cy, rx, ry, cos_t, sin_t;

  bool contains(double px, double py) const {
    const double dx = px - cx, dy = py - cy;
    const double u = (dx * cos_t + dy * sin_t) / rx;
    const double v = (-dx * sin_t + dy * cos_t) / ry;
    return u * u + v * v <= 1.0;
  }
};

/// Rasterizes the ellipse at pixel centers; returns the mask and the count.
Eigen::Index rasterize(const Ellipse& e, MaskTensor& mask) {
  Eigen::Index count = 0;
  for (Eigen::Index y = 0; y < mask.dim(0); ++y) {
    for (Eigen::Index x = 0; x < mask.dim(1); ++x) {
      const bool inside = e.contains(static_cast<double>(x) + 0.5,
                                     static_cast<double>(y) + 0.5);
      mask(y, x) = inside ? 1 : 0;
      count += inside;
    }
  }
  return count;
}

/// Tight normalized box around the mask's set pixels.
BoundingBox tight_box(const MaskTensor& mask) {
  const Eigen::Index h = mask.dim(0), w = mask.dim(1);
  Eigen::Index r0 = h, r1 = -1, c0 = w, c1 = -1;
  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) {
      if (!mask(y, x)) continue;
      r0 = std::min(r0, y);
      r1 = std::max(r1, y);
      c0 = std::min(c0, x);
      c1 = std::max(c1, x);
    }
  }
  COLONNET_CHECK(r1 >= r0 && c1 >= c0, "tight_box on an empty mask");
  return {static_cast<double>(c0) / static_cast<double>(w),
          static_cast<double>(r0) / static_cast<double>(h),
          static_cast<double>(c1 + 1) / static_cast<double>(w),
          static_cast<double>(r1 + 1) / static_cast<double>(h)};
}

ImageSample make_sample(const SynthConfig& cfg, Eigen::Index index, bool bleeding,
                        Rng rng) {
  const Eigen::Index s = cfg.image_size;
  ImageSample sample;
  sample.id = sample_id(index);
  sample.image = Tensorf({s, s, 3});
  const double bg_red = paint_background(sample.image, rng);
  MaskTensor mask({s, s});

  if (bleeding) {
    const double side = static_cast<double>(s);
    Ellipse e{};
    Eigen::Index area = 0;
    // Redraw until the rasterized blob is non-empty and fully inside.
    for (int attempt = 0; attempt < 64 && area == 0; ++attempt) {
      const double rx =
          std::max(1.5, rng.uniform(cfg.blob_radius_min, cfg.blob_radius_max) * side);
      const double ry =
          std::max(1.5, rng.uniform(cfg.blob_radius_min, cfg.blob_radius_max) * side);
      const double reach = std::max(rx, ry) + 1.0;
      if (2.0 * reach >= side) continue;
      const double theta = rng.uniform(0.0, 3.14159265358979323846);
      e = Ellipse{rng.uniform(reach, side - reach), rng.uniform(reach, side - reach),
                  rx, ry, std::cos(theta), std::sin(theta)};
      area = rasterize(e, mask);
    }
    COLONNET_CHECK(area > 0, "failed to place a blob for sample ", sample.id);

    // Blob coloring: red channel sits a configured margin above the
    // background mean, the other channels drop low.
    const double blob_red =
        std::min(0.97, bg_red + cfg.red_margin + rng.uniform(0.08, 0.20));
    for (Eigen::Index y = 0; y < s; ++y) {
      for (Eigen::Index x = 0; x < s; ++x) {
        if (!mask(y, x)) continue;
        sample.image(y, x, 0) = static_cast<float>(
            std::clamp(blob_red + rng.uniform(-0.02, 0.02), 0.0, 1.0));
        sample.image(y, x, 1) = static_cast<float>(
            std::clamp(0.10 + rng.uniform(0.0, 0.08), 0.0, 1.0));
        sample.image(y, x, 2) = static_cast<float>(
            std::clamp(0.08 + rng.uniform(0.0, 0.08), 0.0, 1.0));
      }
    }
    sample.label = 1;
    sample.bbox = tight_box(mask);
  }
  sample.mask = std::move(mask);
  sample.validate();
  return sample;
}

}  // namespace

std::vector<ImageSample> generate(const SynthConfig& config) {
  config.validate();
  const auto n_bleeding = static_cast<Eigen::Index>(
      std::llround(config.bleeding_fraction * static_cast<double>(config.n_samples)));
  Rng root(config.seed);
  std::vector<ImageSample> samples;
  samples.reserve(static_cast<std::size_t>(config.n_samples));
  for (Eigen::Index i = 0; i < config.n_samples; ++i) {
    samples.push_back(make_sample(config, i, i < n_bleeding,
                                  root.derive(static_cast<std::uint64_t>(i) + 1)));
  }
  return samples;
}

void write_dataset(const std::vector<ImageSample>& samples,
                   const std::string& root_path) {
  const fs::path root(root_path);
  std::error_code ec;
  fs::create_directories(root / "images", ec);
  fs::create_directories(root / "masks", ec);
  COLONNET_CHECK(fs::is_directory(root / "images") && fs::is_directory(root / "masks"),
                 "cannot create dataset directories under ", root_path);

  std::vector<const ImageSample*> ordered;
  ordered.reserve(samples.size());
  for (const auto& s : samples) ordered.push_back(&s);
  std::sort(ordered.begin(), ordered.end(),
            [](const ImageSample* a, const ImageSample* b) { return a->id < b->id; });

  std::ofstream csv(root / "annotations.csv");
  COLONNET_CHECK(csv.good(), "cannot write annotations.csv under ", root_path);
  csv << "id,label,x_min,y_min,x_max,y_max\n";
  char line[256];
  for (const ImageSample* s : ordered) {
    s->validate();
    write_image_png((root / "images" / (s->id + ".png")).string(), s->image);
    if (s->mask) {
      write_mask_png((root / "masks" / (s->id + ".png")).string(), *s->mask);
    }
    if (s->bbox) {
      std::snprintf(line, sizeof(line), "%s,%d,%.6f,%.6f,%.6f,%.6f", s->id.c_str(),
                    s->label, s->bbox->x_min, s->bbox->y_min, s->bbox->x_max,
                    s->bbox->y_max);
    } else {
      std::snprintf(line, sizeof(line), "%s,%d,,,,", s->id.c_str(), s->label);
    }
    csv << line << "\n";
  }
  COLONNET_CHECK(csv.good(), "failed writing annotations.csv under ", root_path);
}

}  // namespace colonnet
