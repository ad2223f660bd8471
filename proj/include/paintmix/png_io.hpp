#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "paintmix/errors.hpp"
#include "paintmix/image.hpp"

namespace paintmix {

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

// Round-half-up quantisation of a [0,1] value to a byte.
inline std::uint8_t quantize_byte(double v) {
  const double scaled = std::floor(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5);
  return static_cast<std::uint8_t>(scaled);
}

}  // namespace detail

// Decodes an 8-bit grey, grey+alpha, RGB or RGBA PNG into a 3-channel buffer.
inline ImageBuffer load_png(const std::filesystem::path& path) {
  const std::string p = path.string();
  detail::FilePtr fp(std::fopen(p.c_str(), "rb"));
  if (!fp) throw IoError("cannot open PNG '" + p + "'");

  png_byte sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw IoError("decode error: '" + p + "' is not a PNG file");
  }

  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("decode error: libpng init failed for '" + p + "'");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw IoError("decode error: libpng init failed for '" + p + "'");
  }

  std::vector<std::uint8_t> pixels;
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  volatile int channels = 0;  // assigned after setjmp
  std::string failure;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw IoError("decode error: corrupt PNG '" + p + "'");
  }

  png_init_io(png, fp.get());
  png_set_sig_bytes(png, 8);
  png_read_info(png, info);

  width = png_get_image_width(png, info);
  height = png_get_image_height(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  const int color_type = png_get_color_type(png, info);

  if (bit_depth != 8) {
    failure = "decode error: unsupported bit depth " + std::to_string(bit_depth) + " in '" + p + "'";
  } else if (color_type == PNG_COLOR_TYPE_PALETTE) {
    png_set_palette_to_rgb(png);
    channels = 3;
  } else if (color_type == PNG_COLOR_TYPE_GRAY) {
    channels = 1;
  } else if (color_type == PNG_COLOR_TYPE_GRAY_ALPHA) {
    channels = 2;
  } else if (color_type == PNG_COLOR_TYPE_RGB) {
    channels = 3;
  } else if (color_type == PNG_COLOR_TYPE_RGB_ALPHA) {
    channels = 4;
  } else {
    failure = "decode error: unsupported colour type in '" + p + "'";
  }

  if (failure.empty()) {
    if (color_type == PNG_COLOR_TYPE_PALETTE && png_get_valid(png, info, PNG_INFO_tRNS)) {
      png_set_tRNS_to_alpha(png);
      channels = 4;
    }
    png_read_update_info(png, info);
    channels = png_get_channels(png, info);
    const std::size_t row_bytes = png_get_rowbytes(png, info);
    pixels.resize(row_bytes * height);
    std::vector<png_bytep> rows(height);
    for (png_uint_32 y = 0; y < height; ++y) rows[y] = pixels.data() + y * row_bytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
  }
  png_destroy_read_struct(&png, &info, nullptr);
  if (!failure.empty()) throw IoError(failure);

  ImageBuffer img(static_cast<int>(width), static_cast<int>(height), 3);
  const bool grey = channels <= 2;
  for (std::size_t i = 0; i < img.pixels(); ++i) {
    const std::uint8_t* px = pixels.data() + i * channels;
    for (int c = 0; c < 3; ++c) img[i * 3 + c] = (grey ? px[0] : px[c]) / 255.0;
  }
  return img;
}

// Writes an 8-bit RGB PNG. Values are clamped to [0,1] and rounded half-up.
inline void save_png(const ImageBuffer& img, const std::filesystem::path& path) {
  const std::string p = path.string();
  if (img.channels() != 3 && img.channels() != 1) {
    throw DimensionError("save_png expects 1 or 3 channels, got " + std::to_string(img.channels()));
  }
  detail::FilePtr fp(std::fopen(p.c_str(), "wb"));
  if (!fp) throw IoError("cannot write PNG '" + p + "'");

  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) throw IoError("encode error: libpng init failed for '" + p + "'");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("encode error: libpng init failed for '" + p + "'");
  }

  const int w = img.width();
  const int h = img.height();
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(w) * h * 3);
  for (std::size_t i = 0; i < img.pixels(); ++i) {
    for (int c = 0; c < 3; ++c) {
      const int src = img.channels() == 3 ? c : 0;
      bytes[i * 3 + c] = detail::quantize_byte(img[i * img.channels() + src]);
    }
  }
  std::vector<png_bytep> rows(h);
  for (int y = 0; y < h; ++y) rows[y] = bytes.data() + static_cast<std::size_t>(y) * w * 3;

  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("encode error while writing '" + p + "'");
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, w, h, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  // No timestamps or text chunks, so identical pixels give identical files.
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

inline Mask load_mask(const std::filesystem::path& path) { return threshold_mask(load_png(path)); }

inline void save_mask(const Mask& m, const std::filesystem::path& path) { save_png(mask_to_image(m), path); }

}  // namespace paintmix
