#pragma once

#include <string>
#include <vector>

#include "colonnet/dataset.hpp"

namespace colonnet {

/// Synthetic-dataset recipe: red elliptical blobs on a textured background,
/// with exact rasterized masks and tight normalized boxes.
struct SynthConfig {
  Eigen::Index n_samples = 100;
  Eigen::Index image_size = 64;
  double bleeding_fraction = 0.5;
  double blob_radius_min = 0.05;  // fractions of the image side
  double blob_radius_max = 0.3;
  double red_margin = 0.25;  // minimum mean-red gap between blob and background
  std::uint64_t seed = 0;

  void validate() const {
    COLONNET_CHECK(n_samples >= 2, "synth n_samples must be >= 2, got ", n_samples);
    COLONNET_CHECK(image_size >= 8, "synth image_size must be >= 8, got ", image_size);
    COLONNET_CHECK(bleeding_fraction > 0.0 && bleeding_fraction < 1.0,
                   "synth bleeding_fraction must be in (0,1), got ",
                   bleeding_fraction);
    COLONNET_CHECK(blob_radius_min > 0.0 && blob_radius_min <= blob_radius_max &&
                       blob_radius_max < 0.5,
                   "synth blob radius range must satisfy 0 < min <= max < 0.5, got ",
                   blob_radius_min, "..", blob_radius_max);
    COLONNET_CHECK(red_margin > 0.0 && red_margin < 1.0,
                   "synth red_margin must be in (0,1), got ", red_margin);
  }
};

/// Deterministically generates round(n * fraction) bleeding samples (one
/// ellipse each, exact mask, tight box) and the rest non-bleeding.
std::vector<ImageSample> generate(const SynthConfig& config);

/// Writes samples in the on-disk dataset layout (images/, masks/,
/// annotations.csv) that load_dataset reads back.
void write_dataset(const std::vector<ImageSample>& samples,
                   const std::string& root_path);

}  // namespace colonnet
