#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "paintmix/errors.hpp"

namespace paintmix {

// Dense H x W x C field stored row-major with interleaved channels.
// The tag only separates image space from latent space at the type level.
template <typename Tag>
class Field {
 public:
  Field() = default;
  Field(int width, int height, int channels, double fill = 0.0)
      : width_(width), height_(height), channels_(channels) {
    if (width < 1 || height < 1 || channels < 1) {
      throw DimensionError("field dimensions must be positive, got " + std::to_string(width) + "x" +
                           std::to_string(height) + "x" + std::to_string(channels));
    }
    data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t pixels() const noexcept { return static_cast<std::size_t>(width_) * height_; }

  double& at(int y, int x, int c) { return data_[index(y, x, c)]; }
  double at(int y, int x, int c) const { return data_[index(y, x, c)]; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  bool same_shape(const Field& o) const noexcept {
    return width_ == o.width_ && height_ == o.height_ && channels_ == o.channels_;
  }

  template <typename OtherTag>
  bool same_shape(const Field<OtherTag>& o) const noexcept {
    return width_ == o.width() && height_ == o.height() && channels_ == o.channels();
  }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
  }

  std::string shape_string() const {
    return std::to_string(width_) + "x" + std::to_string(height_) + "x" + std::to_string(channels_);
  }

  friend bool operator==(const Field&, const Field&) = default;

 private:
  std::size_t index(int y, int x, int c) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

struct ImageTag {};
struct LatentTag {};

// Pixel-space image, values in [0,1] after any decode or clamp.
using ImageBuffer = Field<ImageTag>;
// Unbounded latent values.
using LatentGrid = Field<LatentTag>;

// Binary H x W selector. Values are exactly 0 or 1.
class Mask {
 public:
  Mask() = default;
  Mask(int width, int height, std::uint8_t fill = 0) : width_(width), height_(height) {
    if (width < 1 || height < 1) {
      throw DimensionError("mask dimensions must be positive, got " + std::to_string(width) + "x" +
                           std::to_string(height));
    }
    data_.assign(static_cast<std::size_t>(width) * height, fill ? 1 : 0);
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }

  bool at(int y, int x) const { return data_[static_cast<std::size_t>(y) * width_ + x] != 0; }
  void set(int y, int x, bool v) { data_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0; }
  bool operator[](std::size_t i) const { return data_[i] != 0; }
  void set(std::size_t i, bool v) { data_[i] = v ? 1 : 0; }

  std::size_t count() const noexcept {
    return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), std::uint8_t{1}));
  }
  bool empty() const noexcept { return count() == 0; }

  template <typename Tag>
  bool matches(const Field<Tag>& f) const noexcept {
    return width_ == f.width() && height_ == f.height();
  }
  bool matches(const Mask& m) const noexcept { return width_ == m.width_ && height_ == m.height_; }

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

inline std::string dims_string(int w, int h) { return std::to_string(w) + "x" + std::to_string(h); }

// Identity latent codec: the latent is the image itself (f = 1, 3 channels).
inline LatentGrid encode_latent(const ImageBuffer& img) {
  LatentGrid z(img.width(), img.height(), img.channels());
  std::copy(img.values().begin(), img.values().end(), z.values().begin());
  return z;
}

inline ImageBuffer decode_latent(const LatentGrid& z) {
  ImageBuffer img(z.width(), z.height(), z.channels());
  auto src = z.values();
  auto dst = img.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = std::clamp(src[i], 0.0, 1.0);
  return img;
}

// Renders a mask as a black/white RGB image.
inline ImageBuffer mask_to_image(const Mask& m) {
  ImageBuffer img(m.width(), m.height(), 3);
  for (std::size_t i = 0; i < m.size(); ++i) {
    for (int c = 0; c < 3; ++c) img[i * 3 + c] = m[i] ? 1.0 : 0.0;
  }
  return img;
}

// pixel = 1 iff channel mean >= 128/255.
inline Mask threshold_mask(const ImageBuffer& img) {
  Mask m(img.width(), img.height());
  const int ch = img.channels();
  for (std::size_t p = 0; p < img.pixels(); ++p) {
    double sum = 0.0;
    for (int c = 0; c < ch; ++c) sum += img[p * ch + c];
    // Compare in byte units to stay exact at the boundary.
    m.set(p, sum * 255.0 >= 128.0 * ch - 1e-9);
  }
  return m;
}

inline double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

template <typename Tag>
double relative_l2(const Field<Tag>& a, const Field<Tag>& reference) {
  if (!a.same_shape(reference)) throw DimensionError("relative_l2: shape mismatch");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - reference[i];
    num += d * d;
    den += reference[i] * reference[i];
  }
  return std::sqrt(num) / std::sqrt(den);
}

template <typename Tag>
double max_abs_diff(const Field<Tag>& a, const Field<Tag>& b) {
  if (!a.same_shape(b)) throw DimensionError("max_abs_diff: shape mismatch");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace paintmix
