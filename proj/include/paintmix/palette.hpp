#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <set>
#include <vector>

#include "paintmix/colour.hpp"
#include "paintmix/errors.hpp"
#include "paintmix/image.hpp"
#include "paintmix/rng.hpp"

namespace paintmix {

inline constexpr std::size_t kMaxPaletteSize = 8;

struct Palette {
  std::vector<Rgb> colours;
  std::vector<std::string> hexcodes;  // empty unless parsed from user input

  static Palette from_hex(const std::vector<std::string>& codes) {
    Palette p;
    for (const auto& h : codes) {
      p.colours.push_back(parse_hex(h));
      p.hexcodes.push_back(h);
    }
    p.validate();
    return p;
  }

  void validate() const {
    if (colours.empty() || colours.size() > kMaxPaletteSize) {
      throw ParseError("palette must hold 1 to 8 colours, got " + std::to_string(colours.size()));
    }
  }

  std::size_t size() const noexcept { return colours.size(); }
};

inline std::vector<std::string> colour_names(const KdTree3& tree, const Palette& p) {
  std::vector<std::string> names;
  names.reserve(p.size());
  for (Rgb c : p.colours) names.push_back(nearest_name(tree, c).name);
  return names;
}

using Point3 = std::array<double, 3>;

inline double squared_distance(const Point3& a, const Point3& b) {
  const double d0 = a[0] - b[0];
  const double d1 = a[1] - b[1];
  const double d2 = a[2] - b[2];
  return d0 * d0 + d1 * d1 + d2 * d2;
}

struct KMeansResult {
  std::vector<Point3> centroids;      // in byte units, unrounded
  std::vector<std::size_t> sizes;     // members per centroid
  std::vector<double> objective;      // sum of squared distances after each assignment
  int iterations = 0;
};

// Lloyd iterations from a farthest-point initialisation seeded at a random
// sample. Stops at an assignment fixed point or after max_iter assignments.
inline KMeansResult kmeans(const std::vector<Point3>& points, std::size_t k, Rng& rng, int max_iter = 100) {
  if (k == 0 || points.size() < k) throw DimensionError("kmeans: need at least k points");
  KMeansResult res;
  const std::size_t n = points.size();

  res.centroids.push_back(points[rng.below(n)]);
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  while (res.centroids.size() < k) {
    std::size_t far = 0;
    double far_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], squared_distance(points[i], res.centroids.back()));
      if (nearest[i] > far_d) {
        far_d = nearest[i];
        far = i;
      }
    }
    res.centroids.push_back(points[far]);
  }

  std::vector<std::size_t> assign(n, k);
  for (int it = 0; it < max_iter; ++it) {
    bool changed = false;
    double obj = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = squared_distance(points[i], res.centroids[0]);
      for (std::size_t c = 1; c < k; ++c) {
        const double d = squared_distance(points[i], res.centroids[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (assign[i] != best) changed = true;
      assign[i] = best;
      obj += best_d;
    }
    res.objective.push_back(obj);
    res.iterations = it + 1;
    if (!changed) break;

    std::vector<Point3> sums(k, Point3{0, 0, 0});
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      for (int a = 0; a < 3; ++a) sums[assign[i]][a] += points[i][a];
      ++counts[assign[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      // An emptied cluster keeps its previous centroid.
      if (counts[c] == 0) continue;
      for (int a = 0; a < 3; ++a) res.centroids[c][a] = sums[c][a] / static_cast<double>(counts[c]);
    }
  }
  res.sizes.assign(k, 0);
  for (std::size_t i = 0; i < n; ++i) ++res.sizes[assign[i]];
  return res;
}

inline std::vector<Point3> image_points(const ImageBuffer& img, const Mask* mask) {
  if (img.channels() != 3) throw DimensionError("expected an RGB image");
  if (mask && !mask->matches(img)) {
    throw DimensionError("mask " + dims_string(mask->width(), mask->height()) + " does not match image " +
                         dims_string(img.width(), img.height()));
  }
  std::vector<Point3> pts;
  pts.reserve(img.pixels());
  for (std::size_t p = 0; p < img.pixels(); ++p) {
    if (mask && !(*mask)[p]) continue;
    pts.push_back({img[p * 3] * 255.0, img[p * 3 + 1] * 255.0, img[p * 3 + 2] * 255.0});
  }
  return pts;
}

inline std::uint8_t round_byte(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
}

struct PaletteExtraction {
  Palette palette;
  bool padded = false;  // fewer than k distinct colours were available
  KMeansResult clustering;
};

// Dominant colours of the (masked) pixels by K-Means, ordered by descending
// cluster size then by RGB.
inline PaletteExtraction extract_palette(const ImageBuffer& img, const Mask* mask, std::size_t k, Rng& rng) {
  if (k == 0 || k > kMaxPaletteSize) throw ParseError("extract_palette: k must be in [1,8]");
  const auto pts = image_points(img, mask);
  if (pts.size() < k) {
    throw DimensionError("extract_palette: " + std::to_string(pts.size()) + " pixels selected, need at least " +
                         std::to_string(k));
  }

  PaletteExtraction out;
  std::set<Rgb> distinct;
  for (const auto& p : pts) {
    distinct.insert({round_byte(p[0]), round_byte(p[1]), round_byte(p[2])});
    if (distinct.size() >= k) break;
  }
  if (distinct.size() < k) {
    out.padded = true;
    std::vector<Rgb> cols(distinct.begin(), distinct.end());
    for (std::size_t i = 0; out.palette.colours.size() < k; ++i) out.palette.colours.push_back(cols[i % cols.size()]);
    return out;
  }

  out.clustering = kmeans(pts, k, rng);
  std::vector<std::pair<std::size_t, Rgb>> ranked;
  for (std::size_t c = 0; c < k; ++c) {
    const auto& ct = out.clustering.centroids[c];
    ranked.push_back({out.clustering.sizes[c], Rgb{round_byte(ct[0]), round_byte(ct[1]), round_byte(ct[2])}});
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (const auto& r : ranked) out.palette.colours.push_back(r.second);
  return out;
}

}  // namespace paintmix
