#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "paintmix/errors.hpp"
#include "paintmix/image.hpp"
#include "paintmix/schedule.hpp"
#include "paintmix/text_encoder.hpp"

namespace paintmix {

// Observer/override point for self-attention outputs. `weights` is the
// row-stochastic tokens x tokens matrix, `output` the tokens x dim result of
// weights * V, which the hook may overwrite.
class AttentionHook {
 public:
  virtual ~AttentionHook() = default;
  virtual void on_attention(int layer, std::span<const double> weights, std::vector<double>& output) = 0;
};

// Noise predictor eps(x, t, e). Implementations are immutable after
// construction and evaluate() is reentrant.
class Denoiser {
 public:
  virtual ~Denoiser() = default;

  virtual LatentGrid evaluate(const LatentGrid& x, double t, const PromptEmbedding& e,
                              AttentionHook* hook = nullptr) const = 0;

  virtual const NoiseSchedule& schedule() const = 0;

  // Identifies the attention weights an AttentionTape was recorded against.
  // Empty for denoisers without attention.
  virtual std::string fingerprint() const { return {}; }
  virtual int attention_layers() const { return 0; }
  virtual int attention_dim() const { return 0; }
};

// s * eps_cond + (1 - s) * eps_uncond
inline LatentGrid cfg_combine(const LatentGrid& eps_cond, const LatentGrid& eps_uncond, double scale) {
  if (!eps_cond.same_shape(eps_uncond)) throw DimensionError("cfg_combine: shape mismatch");
  LatentGrid out(eps_cond.width(), eps_cond.height(), eps_cond.channels());
  const double w = 1.0 - scale;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = scale * eps_cond[i] + w * eps_uncond[i];
  return out;
}

// Conditioning for one ODE evaluation: a conditional embedding and, when
// guidance is on, an unconditional one combined at `scale`.
struct Guidance {
  PromptEmbedding cond;
  std::optional<PromptEmbedding> uncond;
  double scale = 1.0;

  static Guidance raw(PromptEmbedding e) { return {std::move(e), std::nullopt, 1.0}; }
  static Guidance cfg(PromptEmbedding c, PromptEmbedding u, double s) { return {std::move(c), std::move(u), s}; }
};

// Guided noise prediction. The same hook sees both branches.
inline LatentGrid guided_epsilon(const Denoiser& d, const LatentGrid& x, double t, const Guidance& g,
                                 AttentionHook* hook = nullptr) {
  LatentGrid c = d.evaluate(x, t, g.cond, hook);
  if (!g.uncond) return c;
  LatentGrid u = d.evaluate(x, t, *g.uncond, hook);
  return cfg_combine(c, u, g.scale);
}

// Probability-flow ODE right-hand side: f(t) x + g^2(t) / (2 sigma_t) * eps_hat.
inline LatentGrid ode_rhs(const Denoiser& d, const LatentGrid& x, double t, const Guidance& g) {
  const auto& s = d.schedule();
  s.check_time(t, "ode_rhs");
  const LatentGrid eps = guided_epsilon(d, x, t, g);
  const double f = s.drift(t);
  const double k = s.diffusion_sq(t) / (2.0 * s.sigma(t));
  LatentGrid out(x.width(), x.height(), x.channels());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f * x[i] + k * eps[i];
  return out;
}

}  // namespace paintmix
