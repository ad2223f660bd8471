#pragma once

#include <cmath>
#include <string>

#include "paintmix/errors.hpp"
#include "paintmix/image.hpp"

namespace paintmix {

// Continuous variance-preserving schedule with linear beta(t) on [t_min, 1].
struct NoiseSchedule {
  double beta_min = 0.1;
  double beta_max = 20.0;
  double t_min = 1e-3;
  double t_max = 1.0;

  double beta(double t) const { return beta_min + t * (beta_max - beta_min); }

  double log_alpha_bar(double t) const { return -0.5 * t * t * (beta_max - beta_min) - t * beta_min; }
  double alpha_bar(double t) const { return std::exp(log_alpha_bar(t)); }
  double alpha(double t) const { return std::exp(0.5 * log_alpha_bar(t)); }
  double sigma(double t) const { return std::sqrt(-std::expm1(log_alpha_bar(t))); }

  // log(alpha / sigma)
  double lambda(double t) const {
    const double la = log_alpha_bar(t);
    return 0.5 * la - 0.5 * std::log(-std::expm1(la));
  }

  // Inverse of lambda: solves 0.5 (beta_max - beta_min) t^2 + beta_min t = log(1 + e^{-2 lambda}).
  double t_of_lambda(double lam) const {
    const double rhs = std::log1p(std::exp(-2.0 * lam));
    const double a = 0.5 * (beta_max - beta_min);
    const double b = beta_min;
    return 2.0 * rhs / (b + std::sqrt(b * b + 4.0 * a * rhs));
  }

  double drift(double t) const { return -0.5 * beta(t); }
  double diffusion_sq(double t) const { return beta(t); }

  void check_time(double t, const char* where) const {
    if (!(t >= t_min - 1e-15 && t <= t_max + 1e-15)) {
      throw DimensionError(std::string(where) + ": time " + std::to_string(t) + " outside [t_min, 1]");
    }
  }
};

// x_t = alpha(t) x0 + sigma(t) eps
inline LatentGrid forward_diffuse(const NoiseSchedule& s, const LatentGrid& x0, double t, const LatentGrid& eps) {
  s.check_time(t, "forward_diffuse");
  if (!x0.same_shape(eps)) throw DimensionError("forward_diffuse: x0 and eps shapes differ");
  const double a = s.alpha(t);
  const double sg = s.sigma(t);
  LatentGrid out(x0.width(), x0.height(), x0.channels());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * x0[i] + sg * eps[i];
  return out;
}

}  // namespace paintmix
