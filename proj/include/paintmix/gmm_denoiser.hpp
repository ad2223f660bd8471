#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "paintmix/denoiser.hpp"

namespace paintmix {

struct GmmComponent {
  LatentGrid mean;
  double weight = 1.0;       // prior weight, normalised by the denoiser
  std::vector<double> key;   // conditioning key, length = embedding dim
};

// Exact noise predictor for data distributed as sum_k w_k N(mu_k, sigma0^2 I).
// The prompt reweights components through softmax(log w_k + <pool(e), key_k> / sqrt(d_e)).
class GmmDenoiser final : public Denoiser {
 public:
  GmmDenoiser(std::vector<GmmComponent> components, NoiseSchedule schedule = {}, double data_std = 0.05)
      : components_(std::move(components)), schedule_(schedule), data_std_(data_std) {
    if (components_.empty()) throw DimensionError("GmmDenoiser: needs at least one component");
    double total = 0.0;
    for (const auto& c : components_) {
      if (!(c.weight > 0.0)) throw DimensionError("GmmDenoiser: component weights must be positive");
      if (!c.mean.same_shape(components_.front().mean)) throw DimensionError("GmmDenoiser: component shapes differ");
      if (c.key.size() != components_.front().key.size()) throw DimensionError("GmmDenoiser: key sizes differ");
      total += c.weight;
    }
    for (auto& c : components_) c.weight /= total;
  }

  const NoiseSchedule& schedule() const override { return schedule_; }
  const std::vector<GmmComponent>& components() const noexcept { return components_; }
  double data_std() const noexcept { return data_std_; }

  // Conditional mixture weights w_k(e).
  std::vector<double> weights(const PromptEmbedding& e) const {
    std::vector<double> logits = prior_logits();
    const std::size_t kd = components_.front().key.size();
    if (kd > 0) {
      if (static_cast<std::size_t>(e.dim) != kd) throw DimensionError("GmmDenoiser: embedding dim does not match keys");
      const auto pooled = e.mean_pooled();
      const double inv = 1.0 / std::sqrt(static_cast<double>(kd));
      for (std::size_t k = 0; k < components_.size(); ++k) {
        double dot = 0.0;
        for (std::size_t j = 0; j < kd; ++j) dot += pooled[j] * components_[k].key[j];
        logits[k] += dot * inv;
      }
    }
    return softmax(logits);
  }

  std::vector<double> prior_weights() const { return softmax(prior_logits()); }

  // Posterior responsibilities r_k(x) of each component for x at time t.
  std::vector<double> responsibilities(const LatentGrid& x, double t, const std::vector<double>& w) const {
    const double a = schedule_.alpha(t);
    const double v = marginal_variance(t);
    std::vector<double> logits(components_.size());
    for (std::size_t k = 0; k < components_.size(); ++k) {
      const auto& mu = components_[k].mean;
      double sq = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - a * mu[i];
        sq += d * d;
      }
      logits[k] = std::log(w[k]) - sq / (2.0 * v);
    }
    return softmax(logits);
  }

  // abar sigma0^2 + 1 - abar
  double marginal_variance(double t) const {
    const double ab = schedule_.alpha_bar(t);
    return ab * data_std_ * data_std_ - std::expm1(schedule_.log_alpha_bar(t));
  }

  LatentGrid evaluate(const LatentGrid& x, double t, const PromptEmbedding& e,
                      AttentionHook* /*hook*/ = nullptr) const override {
    return epsilon_with_weights(x, t, weights(e));
  }

  // Prediction with the prior weights only (no prompt).
  LatentGrid unconditional(const LatentGrid& x, double t) const { return epsilon_with_weights(x, t, prior_weights()); }

  LatentGrid epsilon_with_weights(const LatentGrid& x, double t, const std::vector<double>& w) const {
    check_shape(x);
    const auto r = responsibilities(x, t, w);
    const double a = schedule_.alpha(t);
    const double sg = schedule_.sigma(t);
    const double v = marginal_variance(t);
    LatentGrid out(x.width(), x.height(), x.channels());
    for (std::size_t i = 0; i < x.size(); ++i) {
      double m = 0.0;
      for (std::size_t k = 0; k < components_.size(); ++k) m += r[k] * components_[k].mean[i];
      out[i] = (x[i] - a * m) * sg / v;
    }
    return out;
  }

  // log p_t(x | e) including the Gaussian normalisers.
  double log_density(const LatentGrid& x, double t, const PromptEmbedding& e) const {
    check_shape(x);
    const auto w = weights(e);
    const double a = schedule_.alpha(t);
    const double v = marginal_variance(t);
    std::vector<double> terms(components_.size());
    for (std::size_t k = 0; k < components_.size(); ++k) {
      double sq = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x[i] - a * components_[k].mean[i];
        sq += d * d;
      }
      terms[k] = std::log(w[k]) - sq / (2.0 * v);
    }
    const double mx = *std::max_element(terms.begin(), terms.end());
    double s = 0.0;
    for (double tk : terms) s += std::exp(tk - mx);
    return mx + std::log(s) - 0.5 * static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi * v);
  }

 private:
  std::vector<double> prior_logits() const {
    std::vector<double> l(components_.size());
    for (std::size_t k = 0; k < components_.size(); ++k) l[k] = std::log(components_[k].weight);
    return l;
  }

  static std::vector<double> softmax(std::vector<double> v) {
    const double mx = *std::max_element(v.begin(), v.end());
    double s = 0.0;
    for (auto& x : v) {
      x = std::exp(x - mx);
      s += x;
    }
    for (auto& x : v) x /= s;
    return v;
  }

  void check_shape(const LatentGrid& x) const {
    if (!x.same_shape(components_.front().mean)) {
      throw DimensionError("GmmDenoiser: input " + x.shape_string() + " does not match component shape " +
                           components_.front().mean.shape_string());
    }
  }

  std::vector<GmmComponent> components_;
  NoiseSchedule schedule_;
  double data_std_;
};

// Factorised prior: every pixel p independently follows
// sum_k w_k(p) N(c_k, sigma0^2 I_C) over a shared set of colours. Weights are
// either shared by all pixels (K values) or given per pixel (pixels x K,
// row-major), which lets a prior favour the colours seen near each pixel.
class PixelMixtureDenoiser final : public Denoiser {
 public:
  PixelMixtureDenoiser(std::vector<std::vector<double>> colours, std::vector<double> weights, NoiseSchedule schedule = {},
                       double data_std = 0.05)
      : colours_(std::move(colours)), schedule_(schedule), data_std_(data_std) {
    const std::size_t K = colours_.size();
    if (K == 0 || weights.empty() || weights.size() % K != 0) {
      throw DimensionError("PixelMixtureDenoiser: weights must hold K or pixels x K values");
    }
    for (const auto& c : colours_) {
      if (c.size() != colours_.front().size()) throw DimensionError("PixelMixtureDenoiser: colour sizes differ");
    }
    pixels_ = weights.size() / K;
    log_weights_.resize(weights.size());
    for (std::size_t p = 0; p < pixels_; ++p) {
      double total = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        const double w = weights[p * K + k];
        if (!(w > 0.0)) throw DimensionError("PixelMixtureDenoiser: weights must be positive");
        total += w;
      }
      for (std::size_t k = 0; k < K; ++k) log_weights_[p * K + k] = std::log(weights[p * K + k] / total);
    }
  }

  const NoiseSchedule& schedule() const override { return schedule_; }
  const std::vector<std::vector<double>>& colours() const noexcept { return colours_; }
  bool per_pixel() const noexcept { return pixels_ > 1; }

  LatentGrid evaluate(const LatentGrid& x, double t, const PromptEmbedding& /*e*/,
                      AttentionHook* /*hook*/ = nullptr) const override {
    const int ch = x.channels();
    if (static_cast<std::size_t>(ch) != colours_.front().size()) {
      throw DimensionError("PixelMixtureDenoiser: input has " + std::to_string(ch) + " channels");
    }
    if (pixels_ > 1 && x.pixels() != pixels_) {
      throw DimensionError("PixelMixtureDenoiser: weights cover " + std::to_string(pixels_) + " pixels, input has " +
                           std::to_string(x.pixels()));
    }
    const double a = schedule_.alpha(t);
    const double sg = schedule_.sigma(t);
    const double v = schedule_.alpha_bar(t) * data_std_ * data_std_ - std::expm1(schedule_.log_alpha_bar(t));
    const std::size_t K = colours_.size();
    std::vector<double> logit(K);
    LatentGrid out(x.width(), x.height(), ch);
    for (std::size_t p = 0; p < x.pixels(); ++p) {
      const double* lw = &log_weights_[pixels_ > 1 ? p * K : 0];
      double mx = -INFINITY;
      for (std::size_t k = 0; k < K; ++k) {
        double sq = 0.0;
        for (int c = 0; c < ch; ++c) {
          const double d = x[p * ch + c] - a * colours_[k][static_cast<std::size_t>(c)];
          sq += d * d;
        }
        logit[k] = lw[k] - sq / (2.0 * v);
        mx = std::max(mx, logit[k]);
      }
      double z = 0.0;
      for (auto& l : logit) {
        l = std::exp(l - mx);
        z += l;
      }
      for (int c = 0; c < ch; ++c) {
        double m = 0.0;
        for (std::size_t k = 0; k < K; ++k) m += logit[k] * colours_[k][static_cast<std::size_t>(c)];
        out[p * ch + c] = (x[p * ch + c] - a * m / z) * sg / v;
      }
    }
    return out;
  }

  // log p_t(x) under the factorised mixture; used by the score tests.
  double log_density(const LatentGrid& x, double t) const {
    const int ch = x.channels();
    const double a = schedule_.alpha(t);
    const double v = schedule_.alpha_bar(t) * data_std_ * data_std_ - std::expm1(schedule_.log_alpha_bar(t));
    const std::size_t K = colours_.size();
    double total = 0.0;
    for (std::size_t p = 0; p < x.pixels(); ++p) {
      const double* lw = &log_weights_[pixels_ > 1 ? p * K : 0];
      std::vector<double> l(K);
      double mx = -INFINITY;
      for (std::size_t k = 0; k < K; ++k) {
        double sq = 0.0;
        for (int c = 0; c < ch; ++c) {
          const double d = x[p * ch + c] - a * colours_[k][static_cast<std::size_t>(c)];
          sq += d * d;
        }
        l[k] = lw[k] - sq / (2.0 * v);
        mx = std::max(mx, l[k]);
      }
      double z = 0.0;
      for (double li : l) z += std::exp(li - mx);
      total += mx + std::log(z) - 0.5 * ch * std::log(2.0 * std::numbers::pi * v);
    }
    return total;
  }

 private:
  std::vector<std::vector<double>> colours_;
  std::vector<double> log_weights_;
  std::size_t pixels_ = 0;
  NoiseSchedule schedule_;
  double data_std_;
};

}  // namespace paintmix
