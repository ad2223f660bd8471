#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "paintmix/attention_control.hpp"
#include "paintmix/colour.hpp"
#include "paintmix/config.hpp"
#include "paintmix/gmm_denoiser.hpp"
#include "paintmix/image.hpp"
#include "paintmix/mask_ops.hpp"
#include "paintmix/metrics.hpp"
#include "paintmix/ode_solver.hpp"
#include "paintmix/palette.hpp"
#include "paintmix/png_io.hpp"
#include "paintmix/prompt.hpp"
#include "paintmix/text_encoder.hpp"
#include "paintmix/tiny_attention.hpp"

namespace paintmix {

// Integer label map standing in for the input sketch, plus an optional class.
struct SketchSpec {
  int width = 0;
  int height = 0;
  std::vector<int> labels;  // row-major, ids 0..regions-1
  int regions = 0;
  std::optional<std::string> class_label;

  int label(int y, int x) const { return labels[static_cast<std::size_t>(y) * width + x]; }

  static SketchSpec from_labels(int width, int height, std::vector<int> labels,
                                std::optional<std::string> class_label = std::nullopt) {
    if (width < 1 || height < 1 || labels.size() != static_cast<std::size_t>(width) * height) {
      throw DimensionError("sketch: label count does not match " + dims_string(width, height));
    }
    const int mx = *std::max_element(labels.begin(), labels.end());
    std::vector<bool> seen(static_cast<std::size_t>(std::max(mx, 0)) + 1, false);
    for (int l : labels) {
      if (l < 0) throw ParseError("sketch: negative region id");
      seen[static_cast<std::size_t>(l)] = true;
    }
    if (!std::all_of(seen.begin(), seen.end(), [](bool b) { return b; })) {
      throw ParseError("sketch: region ids must be contiguous 0..R-1");
    }
    return {width, height, std::move(labels), mx + 1, std::move(class_label)};
  }

  Mask region_mask(int id) const {
    Mask m(width, height);
    for (std::size_t p = 0; p < labels.size(); ++p) m.set(p, labels[p] == id);
    return m;
  }
};

// Label maps come either as text ("W H" then H rows of W integers) or as a
// PNG whose distinct colours become regions in order of first appearance.
inline SketchSpec load_label_map(const std::filesystem::path& path, std::optional<std::string> class_label) {
  if (path.extension() == ".txt") {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open label map '" + path.string() + "'");
    int w = 0, h = 0;
    if (!(in >> w >> h) || w < 1 || h < 1) throw ParseError("label map '" + path.string() + "': bad header");
    std::vector<int> labels(static_cast<std::size_t>(w) * h);
    for (auto& l : labels) {
      if (!(in >> l)) throw ParseError("label map '" + path.string() + "': expected " + std::to_string(labels.size()) + " labels");
    }
    return SketchSpec::from_labels(w, h, std::move(labels), std::move(class_label));
  }
  const ImageBuffer img = load_png(path);
  std::map<std::array<int, 3>, int> ids;
  std::vector<int> labels(img.pixels());
  for (std::size_t p = 0; p < img.pixels(); ++p) {
    const std::array<int, 3> key{int(std::lround(img[p * 3] * 255)), int(std::lround(img[p * 3 + 1] * 255)),
                                 int(std::lround(img[p * 3 + 2] * 255))};
    auto [it, inserted] = ids.emplace(key, static_cast<int>(ids.size()));
    labels[p] = it->second;
  }
  return SketchSpec::from_labels(img.width(), img.height(), std::move(labels), std::move(class_label));
}

// Stand-in for visual question answering on the sketch: the sidecar label.
inline std::string class_semantics(const SketchSpec& sketch) { return sketch.class_label.value_or("object"); }

struct Generation {
  ImageBuffer image;
  std::uint64_t seed = 0;
  PromptPair prompt;
};

struct GlobalResult {
  std::vector<Generation> palettes;  // one per input palette
  Generation auxiliary;              // colour-free background image

  std::size_t count() const noexcept { return palettes.size() + 1; }
};

struct LocalRegion {
  ImageBuffer image;
  Mask mask;
};

// Everything the local stage computes before the final injected sampling.
struct LocalPrepared {
  std::vector<ImageBuffer> isolated;
  ImageBuffer composite;
  Mask total;
  Mask transitional;
  LatentGrid z0;
  LatentGrid z_star;
  LatentGrid z_final_start;
  LatentGrid reconstruction;
  AttentionTape tape;
  std::shared_ptr<const Denoiser> denoiser;  // model shared by capture and final sampling
};

struct LocalResult {
  LocalPrepared prepared;
  ImageBuffer image;
};

// Receives named intermediates in pipeline order.
using StageSink = std::function<void(std::string_view stage, const ImageBuffer& image)>;

// Embedding used to invert the composite. The exceptional prompt is the
// default; the null prompt exists for the inversion ablation.
enum class InversionPrompt { exceptional, null };

inline InversionPrompt parse_inversion_prompt(std::string_view s) {
  if (s == "except" || s == "exceptional") return InversionPrompt::exceptional;
  if (s == "null") return InversionPrompt::null;
  throw ParseError("inversion prompt must be 'except' or 'null', got '" + std::string(s) + "'");
}

inline constexpr std::uint64_t kAuxiliaryStream = 0;
inline constexpr std::uint64_t kNoiseStream = 1001;
inline constexpr std::uint64_t kSdeditStream = 2001;

inline std::uint64_t palette_seed(std::uint64_t base, std::size_t index) { return derive_seed(base, index + 1); }

class Pipeline {
 public:
  explicit Pipeline(Config cfg)
      : cfg_((cfg.validate(), cfg)),
        encoder_(TextEncoderConfig{cfg_.text_tokens, cfg_.embed_dim, cfg_.text_seed}),
        tree_(css3_tree()) {}

  const Config& config() const noexcept { return cfg_; }
  const ToyTextEncoder& encoder() const noexcept { return encoder_; }
  NoiseSchedule schedule() const { return cfg_.schedule(); }

  void check_sketch(const SketchSpec& s) const {
    if (s.width != cfg_.width || s.height != cfg_.height) {
      throw DimensionError("sketch is " + dims_string(s.width, s.height) + ", working resolution is " +
                           dims_string(cfg_.width, cfg_.height));
    }
  }

  // One component per cyclic assignment of palette colours to sketch regions.
  // Keys mix the assigned colour-name embeddings (area-weighted) with a
  // seeded per-component jitter; coordinate 0 is kept at zero.
  GmmDenoiser palette_denoiser(const SketchSpec& sketch, const Palette& palette) const {
    check_sketch(sketch);
    palette.validate();
    const auto names = colour_names(tree_, palette);
    const std::size_t n = palette.size();
    std::vector<double> area(static_cast<std::size_t>(sketch.regions), 0.0);
    for (int l : sketch.labels) area[static_cast<std::size_t>(l)] += 1.0 / static_cast<double>(sketch.labels.size());

    std::vector<GmmComponent> comps;
    for (std::size_t k = 0; k < n; ++k) {
      GmmComponent c{LatentGrid(sketch.width, sketch.height, 3), 1.0, std::vector<double>(static_cast<std::size_t>(cfg_.embed_dim), 0.0)};
      for (int y = 0; y < sketch.height; ++y) {
        for (int x = 0; x < sketch.width; ++x) {
          const Rgb col = palette.colours[(static_cast<std::size_t>(sketch.label(y, x)) + k) % n];
          c.mean.at(y, x, 0) = col.r / 255.0;
          c.mean.at(y, x, 1) = col.g / 255.0;
          c.mean.at(y, x, 2) = col.b / 255.0;
        }
      }
      for (int r = 0; r < sketch.regions; ++r) {
        const auto emb = encoder_.token_embedding(encoder_.token_id(names[(static_cast<std::size_t>(r) + k) % n]));
        for (std::size_t j = 0; j < c.key.size(); ++j) c.key[j] += area[static_cast<std::size_t>(r)] * emb[j];
      }
      Rng jitter(derive_seed(cfg_.seed ^ 0xC0FFEEULL, k));
      for (auto& v : c.key) v += cfg_.key_jitter * jitter.normal();
      c.key[0] = 0.0;
      comps.push_back(std::move(c));
    }
    return GmmDenoiser(std::move(comps), schedule(), cfg_.data_std);
  }

  // Single grey-shaded component used for the colour-free auxiliary image.
  GmmDenoiser neutral_denoiser(const SketchSpec& sketch) const {
    check_sketch(sketch);
    GmmComponent c{LatentGrid(sketch.width, sketch.height, 3), 1.0, std::vector<double>(static_cast<std::size_t>(cfg_.embed_dim), 0.0)};
    const double span = sketch.regions > 1 ? 0.4 / (sketch.regions - 1) : 0.0;
    for (int y = 0; y < sketch.height; ++y) {
      for (int x = 0; x < sketch.width; ++x) {
        const double g = sketch.regions > 1 ? 0.3 + span * sketch.label(y, x) : 0.5;
        for (int ch = 0; ch < 3; ++ch) c.mean.at(y, x, ch) = g;
      }
    }
    return GmmDenoiser({std::move(c)}, schedule(), cfg_.data_std);
  }

  SamplerConfig sampler(Guidance g, int steps) const {
    SamplerConfig s;
    s.steps = steps;
    s.guidance = std::move(g);
    return s;
  }

  Guidance prompt_guidance(const PromptPair& p) const {
    return Guidance::cfg(encoder_.encode(p.positive), encoder_.encode(p.negative), cfg_.cfg_scale);
  }

  LatentGrid initial_noise(std::uint64_t seed) const {
    Rng rng(seed);
    return standard_normal_like(LatentGrid(cfg_.width, cfg_.height, 3), rng);
  }

  // Global colourisation for a single palette at a given seed.
  Generation colourise_one(const SketchSpec& sketch, const Palette& palette, std::uint64_t seed) const {
    const PromptPair prompt = assemble_prompt(class_semantics(sketch), colour_names(tree_, palette));
    const GmmDenoiser d = palette_denoiser(sketch, palette);
    const auto out = sample(d, initial_noise(seed), sampler(prompt_guidance(prompt), cfg_.steps));
    return {decode_latent(out.latent), seed, prompt};
  }

  Generation auxiliary(const SketchSpec& sketch, std::uint64_t seed) const {
    const PromptPair prompt = assemble_prompt(class_semantics(sketch), {});
    const GmmDenoiser d = neutral_denoiser(sketch);
    const auto out = sample(d, initial_noise(seed), sampler(prompt_guidance(prompt), cfg_.steps));
    return {decode_latent(out.latent), seed, prompt};
  }

  // n palette images plus the auxiliary image. Palette generations are
  // independent and run concurrently; results are merged in input order.
  GlobalResult global_colourise(const SketchSpec& sketch, const std::vector<Palette>& palettes,
                                std::uint64_t base_seed) const {
    if (palettes.empty()) throw ParseError("global_colourise: no palettes");
    std::vector<std::future<Generation>> jobs;
    for (std::size_t i = 0; i < palettes.size(); ++i) {
      jobs.push_back(std::async(std::launch::async, [&, i] {
        return colourise_one(sketch, palettes[i], palette_seed(base_seed, i));
      }));
    }
    GlobalResult res;
    res.auxiliary = auxiliary(sketch, derive_seed(base_seed, kAuxiliaryStream));
    for (auto& j : jobs) res.palettes.push_back(j.get());
    return res;
  }

  // User refinement: the same palette at a fresh seed.
  ImageBuffer regenerate(const SketchSpec& sketch, const Palette& palette, std::uint64_t new_seed) const {
    return colourise_one(sketch, palette, new_seed).image;
  }

  // Colours the local prior knows: every palette colour plus the grey level
  // of each sketch region in the auxiliary model.
  std::vector<std::vector<double>> local_colours(const SketchSpec& sketch, const std::vector<Palette>& palettes) const {
    std::vector<std::vector<double>> colours;
    for (const auto& p : palettes) {
      for (Rgb c : p.colours) colours.push_back({c.r / 255.0, c.g / 255.0, c.b / 255.0});
    }
    const GmmDenoiser neutral = neutral_denoiser(sketch);
    const auto& mu = neutral.components().front().mean;
    std::vector<bool> seen(static_cast<std::size_t>(sketch.regions), false);
    for (std::size_t p = 0; p < sketch.labels.size(); ++p) {
      const auto r = static_cast<std::size_t>(sketch.labels[p]);
      if (seen[r]) continue;
      seen[r] = true;
      colours.push_back({mu[p * 3], mu[p * 3 + 1], mu[p * 3 + 2]});
    }
    std::sort(colours.begin(), colours.end());
    colours.erase(std::unique(colours.begin(), colours.end()), colours.end());
    return colours;
  }

  // Local-stage model: a per-pixel colour mixture whose weights at pixel p
  // follow the nearest-colour counts of the composite in a square window
  // around p (plus a floor), and the attention network on top.
  HybridDenoiser local_denoiser(const SketchSpec& sketch, const std::vector<Palette>& palettes,
                                const ImageBuffer& composite) const {
    check_sketch(sketch);
    if (composite.width() != sketch.width || composite.height() != sketch.height) {
      throw DimensionError("local_denoiser: composite is " + composite.shape_string());
    }
    auto colours = local_colours(sketch, palettes);
    const std::size_t K = colours.size();
    const int w = composite.width();
    const int h = composite.height();
    std::vector<std::size_t> nearest(composite.pixels());
    for (std::size_t p = 0; p < composite.pixels(); ++p) {
      double best = INFINITY;
      for (std::size_t k = 0; k < K; ++k) {
        double sq = 0.0;
        for (int c = 0; c < 3; ++c) sq += (composite[p * 3 + c] - colours[k][static_cast<std::size_t>(c)]) * (composite[p * 3 + c] - colours[k][static_cast<std::size_t>(c)]);
        if (sq < best) {
          best = sq;
          nearest[p] = k;
        }
      }
    }
    const int r = cfg_.local_prior_radius;
    std::vector<double> weights(composite.pixels() * K);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double* wp = &weights[(static_cast<std::size_t>(y) * w + x) * K];
        int n = 0;
        for (int yy = std::max(0, y - r); yy <= std::min(h - 1, y + r); ++yy) {
          for (int xx = std::max(0, x - r); xx <= std::min(w - 1, x + r); ++xx) {
            wp[nearest[static_cast<std::size_t>(yy) * w + xx]] += 1.0;
            ++n;
          }
        }
        for (std::size_t k = 0; k < K; ++k) wp[k] = cfg_.local_prior_floor + wp[k] / n;
      }
    }
    TinyAttentionConfig tc{cfg_.patch, cfg_.attention_dim, cfg_.attention_layers, 3, cfg_.embed_dim, cfg_.attention_seed};
    return HybridDenoiser(PixelMixtureDenoiser(std::move(colours), std::move(weights), schedule(), cfg_.data_std),
                          TinyAttentionDenoiser(tc, schedule()), cfg_.attention_strength);
  }

  static CompositePlan composite_plan(const ImageBuffer& background, const std::vector<LocalRegion>& regions) {
    CompositePlan plan{background, {}};
    for (std::size_t i = 0; i < regions.size(); ++i) {
      if (regions[i].mask.empty()) throw CompositionError("region " + std::to_string(i + 1) + " has an empty mask");
      plan.regions.push_back({regions[i].image, regions[i].mask});
    }
    return plan;
  }

  // Composite -> inversion -> transitional noise -> reconstruction pass that
  // records the attention tape, all with the given denoiser.
  LocalPrepared prepare_local(std::shared_ptr<const Denoiser> d, const ImageBuffer& background,
                              const std::vector<LocalRegion>& regions, std::uint64_t seed, const StageSink& sink = {},
                              InversionPrompt inversion = InversionPrompt::exceptional) const {
    LocalPrepared p;
    p.denoiser = std::move(d);
    const Denoiser& den = *p.denoiser;
    const CompositePlan plan = composite_plan(background, regions);
    std::vector<Mask> masks;
    for (std::size_t i = 0; i < regions.size(); ++i) {
      p.isolated.push_back(region_isolate(regions[i].image, regions[i].mask));
      if (sink) sink("isolated_" + std::to_string(i + 1), p.isolated.back());
      masks.push_back(regions[i].mask);
    }
    p.composite = compose(plan);
    if (sink) sink("composite", p.composite);
    p.total = total_mask(masks, background.width(), background.height());

    p.z0 = encode_latent(p.composite);
    const PromptEmbedding except = encoder_.exceptional();
    const PromptEmbedding inv = inversion == InversionPrompt::null ? encoder_.null_embedding() : except;
    p.z_star = invert(den, p.z0, sampler(Guidance::raw(inv), cfg_.inversion_steps));
    if (sink) sink("inverted", decode_latent(p.z_star));

    p.transitional = transitional_mask(masks, background.width(), background.height());
    if (sink) sink("transitional_mask", mask_to_image(p.transitional));
    Rng noise(derive_seed(seed, kNoiseStream));
    p.z_final_start = incorporate_noise(p.z_star, p.transitional, noise, den.schedule().sigma(den.schedule().t_max));
    if (sink) sink("noised", decode_latent(p.z_final_start));

    auto cap = capture_run(den, p.z_star, sampler(Guidance::cfg(except, except, cfg_.cfg_scale), cfg_.steps));
    p.reconstruction = std::move(cap.reconstruction);
    p.tape = std::move(cap.tape);
    if (sink) sink("reconstruction", decode_latent(p.reconstruction));
    return p;
  }

  // As above with the standard local model built from the composite.
  LocalPrepared prepare_local(const SketchSpec& sketch, const std::vector<Palette>& palettes,
                              const ImageBuffer& background, const std::vector<LocalRegion>& regions,
                              std::uint64_t seed, const StageSink& sink = {},
                              InversionPrompt inversion = InversionPrompt::exceptional) const {
    const ImageBuffer composite = compose(composite_plan(background, regions));
    auto d = std::make_shared<const HybridDenoiser>(local_denoiser(sketch, palettes, composite));
    return prepare_local(std::move(d), background, regions, seed, sink, inversion);
  }

  SamplerConfig final_sampler(const std::string& class_label) const {
    return sampler(Guidance::cfg(encoder_.encode(local_prompt(class_label)), encoder_.null_embedding(), cfg_.cfg_scale),
                   cfg_.steps);
  }

  ImageBuffer finish_local(const LocalPrepared& p, const std::string& class_label, double tau,
                           const StageSink& sink = {}, Trajectory* trajectory = nullptr) const {
    auto out = injected_sample(*p.denoiser, p.z_final_start, p.tape, tau, final_sampler(class_label));
    if (trajectory) *trajectory = std::move(out.trajectory);
    ImageBuffer img = decode_latent(out.latent);
    if (sink) sink("local", img);
    return img;
  }

  LocalResult local_colourise(const SketchSpec& sketch, const std::vector<Palette>& palettes,
                              const ImageBuffer& background, const std::vector<LocalRegion>& regions,
                              const std::string& class_label, double tau, std::uint64_t seed,
                              const StageSink& sink = {},
                              InversionPrompt inversion = InversionPrompt::exceptional) const {
    LocalResult r;
    r.prepared = prepare_local(sketch, palettes, background, regions, seed, sink, inversion);
    r.image = finish_local(r.prepared, class_label, tau, sink);
    return r;
  }

 private:
  Config cfg_;
  ToyTextEncoder encoder_;
  const KdTree3& tree_;
};

}  // namespace paintmix
