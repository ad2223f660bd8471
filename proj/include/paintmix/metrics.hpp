#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "paintmix/errors.hpp"
#include "paintmix/image.hpp"
#include "paintmix/palette.hpp"
#include "paintmix/rng.hpp"

namespace paintmix {

inline constexpr double kPsnrCap = 99.0;

inline double mse(const ImageBuffer& a, const ImageBuffer& b) {
  if (!a.same_shape(b)) throw DimensionError("metrics: image shapes differ (" + a.shape_string() + " vs " + b.shape_string() + ")");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

// 10 log10(1 / MSE) for [0,1] data, capped at 99 dB.
inline double psnr(const ImageBuffer& a, const ImageBuffer& b) {
  const double m = mse(a, b);
  if (m <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / m));
}

// Mean SSIM over all 8x8 windows (stride 1, uniform weights), averaged over
// channels. C1 = (0.01)^2, C2 = (0.03)^2 for unit dynamic range. Images
// smaller than the window use a single window covering the whole image.
inline double ssim(const ImageBuffer& a, const ImageBuffer& b, int window = 8) {
  if (!a.same_shape(b)) throw DimensionError("metrics: image shapes differ (" + a.shape_string() + " vs " + b.shape_string() + ")");
  constexpr double c1 = 0.01 * 0.01;
  constexpr double c2 = 0.03 * 0.03;
  const int wy = std::min(window, a.height());
  const int wx = std::min(window, a.width());
  const double n = static_cast<double>(wx) * wy;
  double total = 0.0;
  std::size_t count = 0;
  for (int c = 0; c < a.channels(); ++c) {
    for (int y0 = 0; y0 + wy <= a.height(); ++y0) {
      for (int x0 = 0; x0 + wx <= a.width(); ++x0) {
        double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
        for (int y = y0; y < y0 + wy; ++y) {
          for (int x = x0; x < x0 + wx; ++x) {
            const double va = a.at(y, x, c);
            const double vb = b.at(y, x, c);
            sa += va;
            sb += vb;
            saa += va * va;
            sbb += vb * vb;
            sab += va * vb;
          }
        }
        const double ma = sa / n;
        const double mb = sb / n;
        const double va = saa / n - ma * ma;
        const double vb = sbb / n - mb * mb;
        const double cov = sab / n - ma * mb;
        const double num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
        const double den = (ma * ma + mb * mb + c1) * (va + vb + c2);
        total += num / den;
        ++count;
      }
    }
  }
  return total / static_cast<double>(count);
}

// Colour-fidelity stand-in: K-Means (K = 4) centroids of the (masked) image,
// mean Euclidean distance in byte units from each centroid to its nearest
// palette colour. Not comparable to DCCW.
inline double palette_distance(const ImageBuffer& img, const Palette& palette, const Mask* mask = nullptr,
                               std::size_t k = 4, std::uint64_t seed = 0) {
  palette.validate();
  const auto pts = image_points(img, mask);
  if (pts.empty()) throw DimensionError("palette_distance: no pixels selected");
  Rng rng(seed);
  const auto res = kmeans(pts, std::min(k, pts.size()), rng);
  double total = 0.0;
  for (const auto& ct : res.centroids) {
    double best = std::numeric_limits<double>::infinity();
    for (Rgb p : palette.colours) best = std::min(best, squared_distance(ct, Point3{double(p.r), double(p.g), double(p.b)}));
    total += std::sqrt(best);
  }
  return total / static_cast<double>(res.centroids.size());
}

struct MetricReport {
  double psnr = 0.0;
  double ssim = 0.0;
  double palette_distance = 0.0;
};

}  // namespace paintmix
