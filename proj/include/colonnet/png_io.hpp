#pragma once

#include <string>

#include "colonnet/tensor.hpp"

namespace colonnet {

/// Reads an RGB(A) PNG into an HxWx3 float tensor scaled to [0,1]
/// (alpha, if present, is dropped; grayscale is broadcast).
Tensorf read_image_png(const std::string& path);

/// Reads an 8-bit PNG as a binary HxW mask: pixels >= 128 become 1.
MaskTensor read_mask_png(const std::string& path);

/// Writes an HxWx3 float tensor (clamped to [0,1]) as an 8-bit RGB PNG.
void write_image_png(const std::string& path, const Tensorf& image);

/// Writes a binary HxW mask as an 8-bit grayscale PNG with values {0, 255}.
void write_mask_png(const std::string& path, const MaskTensor& mask);

}  // namespace colonnet
