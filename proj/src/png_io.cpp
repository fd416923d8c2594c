#include "colonnet/png_io.hpp"

#include <png.h>

#include <algorithm>
#include <cstdio>
#include <vector>

namespace colonnet {

namespace {

struct FileHandle {
  explicit FileHandle(const std::string& path, const char* mode)
      : fp(std::fopen(path.c_str(), mode)) {}
  ~FileHandle() {
    if (fp) std::fclose(fp);
  }
  FileHandle(const FileHandle&) = delete;
  FileHandle& operator=(const FileHandle&) = delete;
  FILE* fp;
};

/// Decodes any PNG into packed 8-bit rows; returns (height, width, channels).
void read_png_rows(const std::string& path, std::vector<unsigned char>& pixels,
                   png_uint_32& height, png_uint_32& width, int& channels) {
  FileHandle file(path, "rb");
  COLONNET_CHECK(file.fp, "cannot open PNG for reading: ", path);

  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  COLONNET_CHECK(png, "libpng read-struct allocation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    fail("libpng info-struct allocation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    fail("failed to decode PNG: " + path);
  }
  png_init_io(png, file.fp);
  // Normalize to 8-bit depth with palette/gray expansion applied.
  png_read_png(png, info,
               PNG_TRANSFORM_STRIP_16 | PNG_TRANSFORM_PACKING | PNG_TRANSFORM_EXPAND,
               nullptr);
  height = png_get_image_height(png, info);
  width = png_get_image_width(png, info);
  channels = static_cast<int>(png_get_channels(png, info));
  png_bytepp rows = png_get_rows(png, info);
  pixels.resize(static_cast<std::size_t>(height) * width *
                static_cast<std::size_t>(channels));
  const std::size_t row_bytes =
      static_cast<std::size_t>(width) * static_cast<std::size_t>(channels);
  for (png_uint_32 y = 0; y < height; ++y) {
    std::copy(rows[y], rows[y] + row_bytes, pixels.begin() + y * row_bytes);
  }
  png_destroy_read_struct(&png, &info, nullptr);
}

void write_png_rows(const std::string& path, const std::vector<unsigned char>& pixels,
                    png_uint_32 height, png_uint_32 width, int color_type,
                    int channels) {
  FileHandle file(path, "wb");
  COLONNET_CHECK(file.fp, "cannot open PNG for writing: ", path);

  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  COLONNET_CHECK(png, "libpng write-struct allocation failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    fail("libpng info-struct allocation failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    fail("failed to encode PNG: " + path);
  }
  png_init_io(png, file.fp);
  png_set_IHDR(png, info, width, height, 8, color_type, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  const std::size_t row_bytes =
      static_cast<std::size_t>(width) * static_cast<std::size_t>(channels);
  for (png_uint_32 y = 0; y < height; ++y) {
    png_write_row(png, const_cast<png_bytep>(pixels.data() + y * row_bytes));
  }
  png_write_end(png, info);
  png_destroy_write_struct(&png, &info);
}

}  // namespace

Tensorf read_image_png(const std::string& path) {
  std::vector<unsigned char> pixels;
  png_uint_32 h = 0, w = 0;
  int channels = 0;
  read_png_rows(path, pixels, h, w, channels);
  COLONNET_CHECK(channels >= 1 && channels <= 4, "unsupported PNG channel count ",
                 channels, " in ", path);
  Tensorf img({static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(w), 3});
  const float scale = 1.0f / 255.0f;
  for (Eigen::Index y = 0; y < img.dim(0); ++y) {
    for (Eigen::Index x = 0; x < img.dim(1); ++x) {
      const unsigned char* px =
          pixels.data() + (static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)) *
                              static_cast<std::size_t>(channels);
      if (channels >= 3) {
        img(y, x, 0) = static_cast<float>(px[0]) * scale;
        img(y, x, 1) = static_cast<float>(px[1]) * scale;
        img(y, x, 2) = static_cast<float>(px[2]) * scale;
      } else {
        const float v = static_cast<float>(px[0]) * scale;
        img(y, x, 0) = img(y, x, 1) = img(y, x, 2) = v;
      }
    }
  }
  return img;
}

MaskTensor read_mask_png(const std::string& path) {
  std::vector<unsigned char> pixels;
  png_uint_32 h = 0, w = 0;
  int channels = 0;
  read_png_rows(path, pixels, h, w, channels);
  COLONNET_CHECK(channels >= 1 && channels <= 4, "unsupported PNG channel count ",
                 channels, " in ", path);
  MaskTensor mask({static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(w)});
  for (Eigen::Index y = 0; y < mask.dim(0); ++y) {
    for (Eigen::Index x = 0; x < mask.dim(1); ++x) {
      const unsigned char v =
          pixels[(static_cast<std::size_t>(y) * w + static_cast<std::size_t>(x)) *
                 static_cast<std::size_t>(channels)];
      mask(y, x) = v >= 128 ? 1 : 0;
    }
  }
  return mask;
}

void write_image_png(const std::string& path, const Tensorf& image) {
  COLONNET_CHECK(image.rank() == 3 && image.dim(2) == 3,
                 "write_image_png expects HxWx3, got ", shape_string(image.shape()));
  const auto h = static_cast<png_uint_32>(image.dim(0));
  const auto w = static_cast<png_uint_32>(image.dim(1));
  std::vector<unsigned char> pixels(static_cast<std::size_t>(h) * w * 3);
  for (Eigen::Index i = 0; i < image.size(); ++i) {
    const float v = std::clamp(image[i], 0.0f, 1.0f);
    pixels[static_cast<std::size_t>(i)] =
        static_cast<unsigned char>(std::lround(v * 255.0f));
  }
  write_png_rows(path, pixels, h, w, PNG_COLOR_TYPE_RGB, 3);
}

void write_mask_png(const std::string& path, const MaskTensor& mask) {
  COLONNET_CHECK(mask.rank() == 2, "write_mask_png expects HxW, got ",
                 shape_string(mask.shape()));
  const auto h = static_cast<png_uint_32>(mask.dim(0));
  const auto w = static_cast<png_uint_32>(mask.dim(1));
  std::vector<unsigned char> pixels(static_cast<std::size_t>(h) * w);
  for (Eigen::Index i = 0; i < mask.size(); ++i) {
    pixels[static_cast<std::size_t>(i)] = mask[i] ? 255 : 0;
  }
  write_png_rows(path, pixels, h, w, PNG_COLOR_TYPE_GRAY, 1);
}

}  // namespace colonnet
