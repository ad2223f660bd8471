#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <vector>

#include "paintmix/denoiser.hpp"
#include "paintmix/gmm_denoiser.hpp"
#include "paintmix/rng.hpp"

namespace paintmix {

struct TinyAttentionConfig {
  int patch = 8;
  int dim = 32;
  int layers = 2;
  int channels = 3;
  int embed_dim = 16;
  std::uint64_t seed = 1234;
};

// Patch-token transformer with random (seeded) weights.
//
//   h0      = W_in [patch ; sin(pi t / 2)]
//   u_l     = h_l + W_e pool(e)
//   A_l     = softmax(Q K^T / sqrt(d)) V,  Q,K,V = u_l W_{Q,K,V}
//   h_{l+1} = h_l + A_l W_O
//   eps     = W_head h_L   (per token, reshaped back to the patch)
//
// The prompt reaches the output only through A_l, so an evaluation whose
// attention outputs are all overridden does not depend on the prompt.
class TinyAttentionDenoiser final : public Denoiser {
 public:
  explicit TinyAttentionDenoiser(TinyAttentionConfig cfg = {}, NoiseSchedule schedule = {})
      : cfg_(cfg), schedule_(schedule) {
    if (cfg_.patch < 1 || cfg_.dim < 1 || cfg_.layers < 1) throw DimensionError("TinyAttentionDenoiser: bad config");
    const int pd = patch_dim();
    Rng rng(cfg_.seed);
    auto fill = [&](std::vector<double>& w, std::size_t n, double scale) {
      w.resize(n);
      for (auto& v : w) v = scale * rng.normal();
    };
    fill(w_in_, static_cast<std::size_t>(cfg_.dim) * (pd + 1), 1.0 / std::sqrt(pd + 1.0));
    fill(w_embed_, static_cast<std::size_t>(cfg_.dim) * cfg_.embed_dim, 1.0 / std::sqrt(double(cfg_.embed_dim)));
    layers_.resize(static_cast<std::size_t>(cfg_.layers));
    const auto dd = static_cast<std::size_t>(cfg_.dim) * cfg_.dim;
    const double s = 1.0 / std::sqrt(double(cfg_.dim));
    for (auto& l : layers_) {
      fill(l.q, dd, s);
      fill(l.k, dd, s);
      fill(l.v, dd, s);
      fill(l.o, dd, s);
    }
    fill(w_head_, static_cast<std::size_t>(pd) * cfg_.dim, s);
  }

  const TinyAttentionConfig& config() const noexcept { return cfg_; }
  const NoiseSchedule& schedule() const override { return schedule_; }
  int attention_layers() const override { return cfg_.layers; }
  int attention_dim() const override { return cfg_.dim; }
  int patch_dim() const noexcept { return cfg_.patch * cfg_.patch * cfg_.channels; }

  std::string fingerprint() const override {
    return "tiny-attention seed=" + std::to_string(cfg_.seed) + " patch=" + std::to_string(cfg_.patch) +
           " dim=" + std::to_string(cfg_.dim) + " layers=" + std::to_string(cfg_.layers) +
           " channels=" + std::to_string(cfg_.channels) + " embed=" + std::to_string(cfg_.embed_dim);
  }

  int token_count(const LatentGrid& x) const {
    check(x);
    return (x.width() / cfg_.patch) * (x.height() / cfg_.patch);
  }

  LatentGrid evaluate(const LatentGrid& x, double t, const PromptEmbedding& e,
                      AttentionHook* hook = nullptr) const override {
    check(x);
    if (e.dim != cfg_.embed_dim) throw DimensionError("TinyAttentionDenoiser: embedding dim mismatch");
    const int d = cfg_.dim;
    const int pd = patch_dim();
    const int pw = x.width() / cfg_.patch;
    const int n = token_count(x);

    // Patch extraction + input projection.
    const double time_feature = std::sin(0.5 * std::numbers::pi * t);
    std::vector<double> h(static_cast<std::size_t>(n) * d, 0.0);
    std::vector<double> patch(static_cast<std::size_t>(pd) + 1);
    for (int tok = 0; tok < n; ++tok) {
      gather_patch(x, tok % pw, tok / pw, patch);
      patch[static_cast<std::size_t>(pd)] = time_feature;
      for (int r = 0; r < d; ++r) {
        double acc = 0.0;
        const double* wr = &w_in_[static_cast<std::size_t>(r) * (pd + 1)];
        for (int c = 0; c <= pd; ++c) acc += wr[c] * patch[static_cast<std::size_t>(c)];
        h[static_cast<std::size_t>(tok) * d + r] = acc;
      }
    }

    std::vector<double> bias(static_cast<std::size_t>(d), 0.0);
    const auto pooled = e.mean_pooled();
    for (int r = 0; r < d; ++r) {
      for (int c = 0; c < cfg_.embed_dim; ++c) {
        bias[static_cast<std::size_t>(r)] += w_embed_[static_cast<std::size_t>(r) * cfg_.embed_dim + c] * pooled[static_cast<std::size_t>(c)];
      }
    }

    std::vector<double> u(h.size()), q(h.size()), k(h.size()), v(h.size());
    std::vector<double> weights(static_cast<std::size_t>(n) * n);
    std::vector<double> attn(h.size());
    const double inv_sqrt_d = 1.0 / std::sqrt(double(d));
    for (int l = 0; l < cfg_.layers; ++l) {
      const auto& L = layers_[static_cast<std::size_t>(l)];
      for (int tok = 0; tok < n; ++tok) {
        for (int r = 0; r < d; ++r) u[idx(tok, r)] = h[idx(tok, r)] + bias[static_cast<std::size_t>(r)];
      }
      matmul_rows(u, L.q, q, n);
      matmul_rows(u, L.k, k, n);
      matmul_rows(u, L.v, v, n);

      for (int i = 0; i < n; ++i) {
        double* row = &weights[static_cast<std::size_t>(i) * n];
        double mx = -INFINITY;
        for (int j = 0; j < n; ++j) {
          double dot = 0.0;
          for (int r = 0; r < d; ++r) dot += q[idx(i, r)] * k[idx(j, r)];
          row[j] = dot * inv_sqrt_d;
          mx = std::max(mx, row[j]);
        }
        double sum = 0.0;
        for (int j = 0; j < n; ++j) {
          row[j] = std::exp(row[j] - mx);
          sum += row[j];
        }
        for (int j = 0; j < n; ++j) row[j] /= sum;
        for (int r = 0; r < d; ++r) {
          double acc = 0.0;
          for (int j = 0; j < n; ++j) acc += row[j] * v[idx(j, r)];
          attn[idx(i, r)] = acc;
        }
      }

      if (hook) {
        hook->on_attention(l, weights, attn);
        if (attn.size() != h.size()) throw TapeError("attention hook changed the output shape");
      }

      // Residual update with the output projection.
      std::vector<double> proj(h.size());
      matmul_rows(attn, L.o, proj, n);
      for (std::size_t i = 0; i < h.size(); ++i) h[i] += proj[i];
    }

    LatentGrid out(x.width(), x.height(), x.channels());
    std::vector<double> head(static_cast<std::size_t>(pd));
    for (int tok = 0; tok < n; ++tok) {
      for (int r = 0; r < pd; ++r) {
        double acc = 0.0;
        const double* wr = &w_head_[static_cast<std::size_t>(r) * d];
        for (int c = 0; c < d; ++c) acc += wr[c] * h[idx(tok, c)];
        head[static_cast<std::size_t>(r)] = acc;
      }
      scatter_patch(out, tok % pw, tok / pw, head);
    }
    return out;
  }

 private:
  struct Layer {
    std::vector<double> q, k, v, o;  // d x d, applied as row * W
  };

  std::size_t idx(int tok, int r) const { return static_cast<std::size_t>(tok) * cfg_.dim + r; }

  void check(const LatentGrid& x) const {
    if (x.channels() != cfg_.channels || x.width() % cfg_.patch != 0 || x.height() % cfg_.patch != 0) {
      throw DimensionError("TinyAttentionDenoiser: input " + x.shape_string() + " is not divisible into " +
                           std::to_string(cfg_.patch) + "x" + std::to_string(cfg_.patch) + "x" +
                           std::to_string(cfg_.channels) + " patches");
    }
  }

  void matmul_rows(const std::vector<double>& in, const std::vector<double>& w, std::vector<double>& out, int n) const {
    const int d = cfg_.dim;
    for (int i = 0; i < n; ++i) {
      for (int c = 0; c < d; ++c) {
        double acc = 0.0;
        for (int r = 0; r < d; ++r) acc += in[idx(i, r)] * w[static_cast<std::size_t>(r) * d + c];
        out[idx(i, c)] = acc;
      }
    }
  }

  void gather_patch(const LatentGrid& x, int px, int py, std::vector<double>& patch) const {
    std::size_t j = 0;
    for (int y = 0; y < cfg_.patch; ++y) {
      for (int xx = 0; xx < cfg_.patch; ++xx) {
        for (int c = 0; c < cfg_.channels; ++c) patch[j++] = x.at(py * cfg_.patch + y, px * cfg_.patch + xx, c);
      }
    }
  }

  void scatter_patch(LatentGrid& x, int px, int py, const std::vector<double>& patch) const {
    std::size_t j = 0;
    for (int y = 0; y < cfg_.patch; ++y) {
      for (int xx = 0; xx < cfg_.patch; ++xx) {
        for (int c = 0; c < cfg_.channels; ++c) x.at(py * cfg_.patch + y, px * cfg_.patch + xx, c) = patch[j++];
      }
    }
  }

  TinyAttentionConfig cfg_;
  NoiseSchedule schedule_;
  std::vector<double> w_in_;
  std::vector<double> w_embed_;
  std::vector<Layer> layers_;
  std::vector<double> w_head_;
};

// Local-stage denoiser: a prompt-free prior plus an attention-driven
// correction of the data prediction,
//   x0_hat = x0_prior(x, t) + strength * sigma * tanh(tiny(x, t, e)),
//   eps    = (x - alpha x0_hat) / sigma.
// The prompt acts through the attention path only.
class HybridDenoiser final : public Denoiser {
 public:
  HybridDenoiser(PixelMixtureDenoiser prior, TinyAttentionDenoiser attention, double strength)
      : prior_(std::move(prior)), attention_(std::move(attention)), strength_(strength) {}

  const NoiseSchedule& schedule() const override { return prior_.schedule(); }
  std::string fingerprint() const override { return attention_.fingerprint(); }
  int attention_layers() const override { return attention_.attention_layers(); }
  int attention_dim() const override { return attention_.attention_dim(); }

  const PixelMixtureDenoiser& prior() const noexcept { return prior_; }
  const TinyAttentionDenoiser& attention() const noexcept { return attention_; }
  double strength() const noexcept { return strength_; }

  LatentGrid evaluate(const LatentGrid& x, double t, const PromptEmbedding& e,
                      AttentionHook* hook = nullptr) const override {
    // The prior ignores the prompt; only the attention path sees it.
    LatentGrid eps = prior_.evaluate(x, t, e);
    const LatentGrid corr = attention_.evaluate(x, t, e, hook);
    // x0_hat shifts by strength * sigma * tanh(corr): bounded, and gone at t -> 0.
    const double k = strength_ * schedule().alpha(t);
    for (std::size_t i = 0; i < eps.size(); ++i) eps[i] -= k * std::tanh(corr[i]);
    return eps;
  }

 private:
  PixelMixtureDenoiser prior_;
  TinyAttentionDenoiser attention_;
  double strength_;
};

}  // namespace paintmix
