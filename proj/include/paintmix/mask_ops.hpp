#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "paintmix/errors.hpp"
#include "paintmix/image.hpp"
#include "paintmix/rng.hpp"

namespace paintmix {

namespace detail {

template <typename A, typename B>
void require_same_dims(const A& a, const B& b, const char* op) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw DimensionError(std::string(op) + ": dimension mismatch " + dims_string(a.width(), a.height()) + " vs " +
                         dims_string(b.width(), b.height()));
  }
}

}  // namespace detail

// Hadamard product with a binary mask: pixels outside the mask become 0.
inline ImageBuffer region_isolate(const ImageBuffer& img, const Mask& mask) {
  detail::require_same_dims(img, mask, "region_isolate");
  ImageBuffer out(img.width(), img.height(), img.channels());
  const int ch = img.channels();
  for (std::size_t p = 0; p < img.pixels(); ++p) {
    if (!mask[p]) continue;
    for (int c = 0; c < ch; ++c) out[p * ch + c] = img[p * ch + c];
  }
  return out;
}

// Pixelwise maximum (union). An empty list yields an all-zero mask of the given size.
inline Mask total_mask(const std::vector<Mask>& masks, int width, int height) {
  Mask out(width, height);
  for (const auto& m : masks) {
    detail::require_same_dims(out, m, "total_mask");
    for (std::size_t p = 0; p < m.size(); ++p) {
      if (m[p]) out.set(p, true);
    }
  }
  return out;
}

inline Mask total_mask(const std::vector<Mask>& masks) {
  if (masks.empty()) throw DimensionError("total_mask: empty list needs explicit dimensions");
  return total_mask(masks, masks.front().width(), masks.front().height());
}

struct CompositeRegion {
  ImageBuffer image;
  Mask mask;
};

struct CompositePlan {
  ImageBuffer background;
  std::vector<CompositeRegion> regions;
};

// background * (1 - M_tot) + sum_i image_i * M_i. Masks must be disjoint.
inline ImageBuffer compose(const CompositePlan& plan) {
  const auto& bg = plan.background;
  std::vector<Mask> masks;
  for (std::size_t i = 0; i < plan.regions.size(); ++i) {
    const auto& r = plan.regions[i];
    if (!r.image.same_shape(bg)) {
      throw DimensionError("compose: region " + std::to_string(i + 1) + " image is " + r.image.shape_string() +
                           ", background is " + bg.shape_string());
    }
    detail::require_same_dims(bg, r.mask, "compose");
    masks.push_back(r.mask);
  }

  std::vector<int> owner(bg.pixels(), -1);
  for (std::size_t i = 0; i < masks.size(); ++i) {
    for (std::size_t p = 0; p < owner.size(); ++p) {
      if (!masks[i][p]) continue;
      if (owner[p] >= 0) {
        const auto y = p / static_cast<std::size_t>(bg.width());
        const auto x = p % static_cast<std::size_t>(bg.width());
        throw CompositionError("compose: masks " + std::to_string(owner[p] + 1) + " and " + std::to_string(i + 1) +
                               " overlap at pixel (row " + std::to_string(y) + ", col " + std::to_string(x) + ")");
      }
      owner[p] = static_cast<int>(i);
    }
  }

  const Mask tot = total_mask(masks, bg.width(), bg.height());
  ImageBuffer out = region_isolate(bg, [&] {
    Mask inv(bg.width(), bg.height());
    for (std::size_t p = 0; p < inv.size(); ++p) inv.set(p, !tot[p]);
    return inv;
  }());
  const int ch = bg.channels();
  for (std::size_t i = 0; i < plan.regions.size(); ++i) {
    const ImageBuffer iso = region_isolate(plan.regions[i].image, masks[i]);
    // Masks are disjoint, so the sum copies each region's pixels verbatim.
    for (std::size_t p = 0; p < out.pixels(); ++p) {
      if (owner[p] != static_cast<int>(i)) continue;
      for (int c = 0; c < ch; ++c) out[p * ch + c] = iso[p * ch + c];
    }
  }
  return out;
}

struct Rect {
  int min_row = 0;
  int max_row = 0;
  int min_col = 0;
  int max_col = 0;
};

inline Rect bounding_box(const Mask& mask) {
  Rect r{mask.height(), -1, mask.width(), -1};
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.at(y, x)) continue;
      r.min_row = std::min(r.min_row, y);
      r.max_row = std::max(r.max_row, y);
      r.min_col = std::min(r.min_col, x);
      r.max_col = std::max(r.max_col, x);
    }
  }
  if (r.max_row < 0) throw DimensionError("bounding_rect: mask is empty");
  return r;
}

// Filled axis-aligned bounding rectangle of the set pixels.
inline Mask bounding_rect(const Mask& mask) {
  const Rect r = bounding_box(mask);
  Mask out(mask.width(), mask.height());
  for (int y = r.min_row; y <= r.max_row; ++y) {
    for (int x = r.min_col; x <= r.max_col; ++x) out.set(y, x, true);
  }
  return out;
}

// Union over masks of (rect_i XOR mask_i), clamped to {0,1}.
inline Mask transitional_mask(const std::vector<Mask>& masks, int width, int height) {
  Mask out(width, height);
  for (const auto& m : masks) {
    detail::require_same_dims(out, m, "transitional_mask");
    const Mask rect = bounding_rect(m);
    for (std::size_t p = 0; p < m.size(); ++p) {
      if (rect[p] != m[p]) out.set(p, true);
    }
  }
  return out;
}

inline Mask transitional_mask(const std::vector<Mask>& masks) {
  if (masks.empty()) throw DimensionError("transitional_mask: empty list needs explicit dimensions");
  return transitional_mask(masks, masks.front().width(), masks.front().height());
}

// z * (1 - tran) + z_plus * tran with z_plus ~ N(0, noise_std^2). Draws are
// taken row-major over the set pixels, channels innermost.
inline LatentGrid incorporate_noise(const LatentGrid& z, const Mask& tran, Rng& rng, double noise_std = 1.0) {
  detail::require_same_dims(z, tran, "incorporate_noise");
  LatentGrid out = z;
  const int ch = z.channels();
  for (std::size_t p = 0; p < tran.size(); ++p) {
    if (!tran[p]) continue;
    for (int c = 0; c < ch; ++c) out[p * ch + c] = noise_std * rng.normal();
  }
  return out;
}

}  // namespace paintmix
