#pragma once

#include <array>
#include <future>
#include <sstream>
#include <string>
#include <vector>

#include "paintmix/metrics.hpp"
#include "paintmix/pipeline.hpp"

namespace paintmix {

// Mean masked palette distance over the user regions.
inline double region_palette_distance(const ImageBuffer& img, const std::vector<Mask>& masks,
                                      const std::vector<Palette>& palettes) {
  if (masks.empty()) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < masks.size(); ++i) total += palette_distance(img, palettes[i], &masks[i]);
  return total / static_cast<double>(masks.size());
}

struct TauRow {
  double tau = 0.0;
  std::size_t injected_steps = 0;
  double psnr = 0.0;
  double ssim = 0.0;
  double palette_distance = 0.0;
  ImageBuffer image;
};

// Final injected sampling at each tau, sharing one prepared local stage.
// Sweep points run concurrently; rows come back in input order.
inline std::vector<TauRow> tau_sweep(const Pipeline& p, const LocalPrepared& prep,
                                     const std::string& class_label, const std::vector<double>& taus,
                                     const std::vector<Mask>& masks, const std::vector<Palette>& palettes) {
  const StepGrid grid = StepGrid::generation(prep.denoiser->schedule(), p.config().steps);
  std::vector<std::future<TauRow>> jobs;
  for (double tau : taus) {
    jobs.push_back(std::async(std::launch::async, [&, tau] {
      TauRow r;
      r.tau = tau;
      r.injected_steps = injection_step_set(grid, tau).size();
      r.image = p.finish_local(prep, class_label, tau);
      r.psnr = psnr(r.image, prep.composite);
      r.ssim = ssim(r.image, prep.composite);
      r.palette_distance = region_palette_distance(r.image, masks, palettes);
      return r;
    }));
  }
  std::vector<TauRow> rows;
  for (auto& j : jobs) rows.push_back(j.get());
  return rows;
}

inline std::string tau_table(const std::vector<TauRow>& rows) {
  std::ostringstream os;
  os << "tau\tinjected_steps\tpsnr_vs_composite\tssim_vs_composite\tpalette_distance\n";
  for (const auto& r : rows) {
    os << format_double(r.tau) << '\t' << r.injected_steps << '\t' << format_double(r.psnr) << '\t'
       << format_double(r.ssim) << '\t' << format_double(r.palette_distance) << '\n';
  }
  return os.str();
}

// A seeded draw from component k of a mixture: mu_k + sigma0 * noise.
inline LatentGrid gmm_draw(const GmmDenoiser& d, std::size_t k, Rng& rng) {
  LatentGrid x = d.components().at(k).mean;
  for (std::size_t i = 0; i < x.size(); ++i) x[i] += d.data_std() * rng.normal();
  return x;
}

struct InversionRow {
  int case_index = 0;
  int steps = 0;
  double except_error = 0.0;
  double null_error = 0.0;
};

// Relative L2 error of invert (with `inv`) followed by reconstruction with
// the exceptional embedding, both unguided, N steps each way.
inline double roundtrip_error(const Denoiser& d, const LatentGrid& x0, const PromptEmbedding& inv,
                              const PromptEmbedding& except, int steps) {
  SamplerConfig c;
  c.steps = steps;
  c.guidance = Guidance::raw(inv);
  const LatentGrid z = invert(d, x0, c);
  c.guidance = Guidance::raw(except);
  return relative_l2(sample(d, z, c).latent, x0);
}

inline std::vector<InversionRow> inversion_ablation(const Pipeline& p, const SketchSpec& sketch,
                                                    const std::vector<Palette>& palettes, int cases,
                                                    const std::vector<int>& steps) {
  const PromptEmbedding except = p.encoder().exceptional();
  const PromptEmbedding null = p.encoder().null_embedding();
  std::vector<std::future<std::vector<InversionRow>>> jobs;
  for (int c = 0; c < cases; ++c) {
    jobs.push_back(std::async(std::launch::async, [&, c] {
      const GmmDenoiser d = p.palette_denoiser(sketch, palettes[static_cast<std::size_t>(c) % palettes.size()]);
      Rng rng(derive_seed(p.config().seed, 3000 + static_cast<std::uint64_t>(c)));
      const LatentGrid x0 = gmm_draw(d, static_cast<std::size_t>(c) % d.components().size(), rng);
      std::vector<InversionRow> rows;
      for (int n : steps) {
        rows.push_back({c, n, roundtrip_error(d, x0, except, except, n), roundtrip_error(d, x0, null, except, n)});
      }
      return rows;
    }));
  }
  std::vector<InversionRow> out;
  for (auto& j : jobs) {
    for (auto& r : j.get()) out.push_back(r);
  }
  return out;
}

inline std::string inversion_table(const std::vector<InversionRow>& rows) {
  std::ostringstream os;
  os << "case\tsteps\texcept_error\tnull_error\n";
  for (const auto& r : rows) {
    os << r.case_index << '\t' << r.steps << '\t' << format_double(r.except_error) << '\t'
       << format_double(r.null_error) << '\n';
  }
  return os.str();
}

inline constexpr std::uint64_t kReferenceStream = 4001;

// Seeded stand-in for a ground-truth colour image: each sketch region holds a
// horizontal blend between two random colours.
inline ImageBuffer synthetic_reference(const SketchSpec& sketch, std::uint64_t seed) {
  Rng rng(derive_seed(seed, kReferenceStream));
  std::vector<std::array<double, 6>> ends(static_cast<std::size_t>(sketch.regions));
  for (auto& e : ends) {
    for (auto& v : e) v = rng.uniform();
  }
  ImageBuffer img(sketch.width, sketch.height, 3);
  const double span = sketch.width > 1 ? sketch.width - 1.0 : 1.0;
  for (int y = 0; y < sketch.height; ++y) {
    for (int x = 0; x < sketch.width; ++x) {
      const auto& e = ends[static_cast<std::size_t>(sketch.label(y, x))];
      const double f = x / span;
      for (int c = 0; c < 3; ++c) img.at(y, x, c) = e[static_cast<std::size_t>(c)] + f * (e[static_cast<std::size_t>(c) + 3] - e[static_cast<std::size_t>(c)]);
    }
  }
  return img;
}

struct PaletteSizeRow {
  std::size_t size = 0;
  Palette palette;
  bool padded = false;
  double psnr = 0.0;
  double ssim = 0.0;
  double palette_distance = 0.0;
  ImageBuffer image;
};

// Palettes of each size are K-Means extractions of the reference; each drives
// one global generation at the same seed. Colour fidelity is measured against
// the reference's largest extracted palette.
inline std::vector<PaletteSizeRow> palette_size_sweep(const Pipeline& p, const SketchSpec& sketch,
                                                      const ImageBuffer& reference, const std::vector<int>& sizes) {
  int largest = 0;
  for (int n : sizes) {
    if (n < 1 || n > static_cast<int>(kMaxPaletteSize)) throw ParseError("palette sizes must be in [1,8]");
    largest = std::max(largest, n);
  }
  const std::uint64_t seed = p.config().seed;
  Rng ref_rng(seed);
  const Palette target = extract_palette(reference, nullptr, static_cast<std::size_t>(largest), ref_rng).palette;
  std::vector<std::future<PaletteSizeRow>> jobs;
  for (int n : sizes) {
    jobs.push_back(std::async(std::launch::async, [&, n] {
      PaletteSizeRow r;
      r.size = static_cast<std::size_t>(n);
      Rng rng(seed);
      auto ex = extract_palette(reference, nullptr, r.size, rng);
      r.palette = std::move(ex.palette);
      r.padded = ex.padded;
      r.image = p.regenerate(sketch, r.palette, palette_seed(seed, 0));
      r.psnr = psnr(r.image, reference);
      r.ssim = ssim(r.image, reference);
      r.palette_distance = palette_distance(r.image, target);
      return r;
    }));
  }
  std::vector<PaletteSizeRow> rows;
  for (auto& j : jobs) rows.push_back(j.get());
  return rows;
}

inline std::string palette_size_table(const std::vector<PaletteSizeRow>& rows) {
  std::ostringstream os;
  os << "size\tpalette\tpsnr_vs_reference\tssim_vs_reference\tpalette_distance\n";
  for (const auto& r : rows) {
    os << r.size << '\t';
    for (std::size_t i = 0; i < r.palette.size(); ++i) os << (i ? "," : "") << to_hex(r.palette.colours[i]);
    os << '\t' << format_double(r.psnr) << '\t' << format_double(r.ssim) << '\t' << format_double(r.palette_distance)
       << '\n';
  }
  return os.str();
}

struct SdeditRow {
  std::string method;
  double strength = 0.0;
  double psnr = 0.0;
  double ssim = 0.0;
  double palette_distance = 0.0;
  ImageBuffer image;
};

// The local result next to SDEdit runs on the same composite, denoiser and
// final prompt. SDEdit noise comes from its own seeded stream.
inline std::vector<SdeditRow> sdedit_comparison(const Pipeline& p, const LocalPrepared& prep,
                                                const ImageBuffer& local, const std::string& class_label,
                                                const std::vector<double>& strengths, const std::vector<Mask>& masks,
                                                const std::vector<Palette>& palettes) {
  auto row = [&](std::string method, double strength, ImageBuffer img) {
    SdeditRow r{std::move(method), strength, psnr(img, prep.composite), ssim(img, prep.composite),
                region_palette_distance(img, masks, palettes), std::move(img)};
    return r;
  };
  std::vector<SdeditRow> rows;
  rows.push_back(row("local", p.config().tau, local));
  for (double s : strengths) {
    Rng rng(derive_seed(p.config().seed, kSdeditStream));
    const LatentGrid out = sdedit_sample(*prep.denoiser, encode_latent(prep.composite), s, p.final_sampler(class_label), rng);
    rows.push_back(row("sdedit", s, decode_latent(out)));
  }
  return rows;
}

inline std::string sdedit_table(const std::vector<SdeditRow>& rows) {
  std::ostringstream os;
  os << "method\tparameter\tpsnr_vs_composite\tssim_vs_composite\tpalette_distance\n";
  for (const auto& r : rows) {
    os << r.method << '\t' << format_double(r.strength) << '\t' << format_double(r.psnr) << '\t'
       << format_double(r.ssim) << '\t' << format_double(r.palette_distance) << '\n';
  }
  return os.str();
}

}  // namespace paintmix
