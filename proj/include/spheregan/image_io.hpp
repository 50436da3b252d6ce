#pragma once

#include <png.h>

#include <cstdint>
#include <cstdio>
#include <memory>
#include <string>
#include <vector>

#include "spheregan/common.hpp"
#include "spheregan/tensor.hpp"

namespace sgan {

struct Image8 {
  int width = 0;
  int height = 0;
  int channels = 0;  // 1 = gray, 3 = rgb
  std::vector<uint8_t> pixels;  // row-major, interleaved
};

namespace detail {
struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;
}  // namespace detail

inline Image8 read_png(const std::string& path) {
  detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("corrupt PNG: " + path);
  }
  png_init_io(png, fp.get());
  png_read_info(png, info);

  png_uint_32 w = png_get_image_width(png, info);
  png_uint_32 h = png_get_image_height(png, info);
  int bit_depth = png_get_bit_depth(png, info);
  int color = png_get_color_type(png, info);

  if (bit_depth == 16) png_set_strip_16(png);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  png_read_update_info(png, info);

  int channels = png_get_channels(png, info);
  if (channels != 1 && channels != 3) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw DataError("unsupported PNG channel count in " + path);
  }

  Image8 img;
  img.width = static_cast<int>(w);
  img.height = static_cast<int>(h);
  img.channels = channels;
  img.pixels.resize(static_cast<size_t>(w) * h * channels);
  std::vector<png_bytep> rows(static_cast<size_t>(h));
  for (png_uint_32 r = 0; r < h; ++r)
    rows[r] = img.pixels.data() + static_cast<size_t>(r) * w * channels;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return img;
}

inline void write_png(const std::string& path, const Image8& img) {
  if (img.channels != 1 && img.channels != 3)
    throw DataError("write_png: channels must be 1 or 3");
  detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot write " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("png_create_info_struct failed");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG write failed for " + path);
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
               static_cast<png_uint_32>(img.height), 8,
               img.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  std::vector<png_bytep> rows(static_cast<size_t>(img.height));
  for (int r = 0; r < img.height; ++r)
    rows[static_cast<size_t>(r)] = const_cast<png_bytep>(
        img.pixels.data() + static_cast<size_t>(r) * img.width * img.channels);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

inline uint8_t quantize8(float v) {
  float c = v < 0.f ? 0.f : (v > 1.f ? 1.f : v);
  return static_cast<uint8_t>(c * 255.0f + 0.5f);
}

// H x W map in [0,1] -> 8-bit gray PNG.
inline void write_png_gray(const std::string& path, const Tensor<float>& map) {
  if (map.rank() != 2) throw DataError("write_png_gray: expected H x W map");
  Image8 img;
  img.height = static_cast<int>(map.extent(0));
  img.width = static_cast<int>(map.extent(1));
  img.channels = 1;
  img.pixels.resize(static_cast<size_t>(map.size()));
  for (int64_t i = 0; i < map.size(); ++i) img.pixels[static_cast<size_t>(i)] = quantize8(map[i]);
  write_png(path, img);
}

// 3 x H x W tensor in [0,1] -> 8-bit RGB PNG.
inline void write_png_rgb(const std::string& path, const Tensor<float>& rgb) {
  if (rgb.rank() != 3 || rgb.extent(0) != 3) throw DataError("write_png_rgb: expected 3 x H x W");
  Image8 img;
  img.height = static_cast<int>(rgb.extent(1));
  img.width = static_cast<int>(rgb.extent(2));
  img.channels = 3;
  img.pixels.resize(static_cast<size_t>(rgb.size()));
  int64_t hw = rgb.extent(1) * rgb.extent(2);
  for (int64_t p = 0; p < hw; ++p)
    for (int c = 0; c < 3; ++c)
      img.pixels[static_cast<size_t>(p * 3 + c)] = quantize8(rgb[c * hw + p]);
  write_png(path, img);
}

inline Tensor<float> gray_to_tensor(const Image8& img) {
  if (img.channels != 1) throw DataError("expected grayscale image");
  Tensor<float> t({img.height, img.width});
  for (int64_t i = 0; i < t.size(); ++i)
    t[i] = static_cast<float>(img.pixels[static_cast<size_t>(i)]) / 255.0f;
  return t;
}

inline Tensor<float> rgb_to_tensor(const Image8& img) {
  if (img.channels != 3) throw DataError("expected RGB image");
  Tensor<float> t({3, img.height, img.width});
  int64_t hw = static_cast<int64_t>(img.height) * img.width;
  for (int64_t p = 0; p < hw; ++p)
    for (int c = 0; c < 3; ++c) t[c * hw + p] = static_cast<float>(img.pixels[static_cast<size_t>(p * 3 + c)]) / 255.0f;
  return t;
}

}  // namespace sgan
