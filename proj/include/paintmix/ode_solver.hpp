#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "paintmix/denoiser.hpp"
#include "paintmix/errors.hpp"
#include "paintmix/image.hpp"
#include "paintmix/rng.hpp"
#include "paintmix/schedule.hpp"

namespace paintmix {

// Timepoints uniformly spaced in log-SNR between t_start and t_end.
class StepGrid {
 public:
  StepGrid(const NoiseSchedule& s, int steps, double t_start, double t_end) {
    if (steps < 2 || steps > 1000) throw ParseError("step count must be in [2, 1000], got " + std::to_string(steps));
    const double l0 = s.lambda(t_start);
    const double l1 = s.lambda(t_end);
    times_.resize(static_cast<std::size_t>(steps) + 1);
    times_.front() = t_start;
    times_.back() = t_end;
    for (int i = 1; i < steps; ++i) times_[static_cast<std::size_t>(i)] = s.t_of_lambda(l0 + (l1 - l0) * i / steps);
  }

  // Generation grid from t = 1 down to t_min.
  static StepGrid generation(const NoiseSchedule& s, int steps) { return StepGrid(s, steps, s.t_max, s.t_min); }

  int steps() const noexcept { return static_cast<int>(times_.size()) - 1; }
  double operator[](std::size_t i) const { return times_[i]; }
  const std::vector<double>& times() const noexcept { return times_; }

  StepGrid reversed() const {
    StepGrid g = *this;
    std::reverse(g.times_.begin(), g.times_.end());
    return g;
  }

 private:
  std::vector<double> times_;
};

enum class Direction { generate, invert };
enum class SolverOrder { first = 1, second = 2 };

struct SamplerConfig {
  int steps = 20;
  Guidance guidance;
  Direction direction = Direction::generate;
  SolverOrder order = SolverOrder::second;
  // Generation starts here (SDEdit starts part-way down the trajectory).
  std::optional<double> t_start;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<LatentGrid> latents;  // latents[i] lives at times[i]
};

struct SampleResult {
  LatentGrid latent;
  Trajectory trajectory;
};

// Returns the hook for the denoiser evaluation at a step, or nullptr.
using HookProvider = std::function<AttentionHook*(int step)>;

// Integrates along `times` (either direction) with the multistep exponential
// integrator in data-prediction form. One guided evaluation per step, at the
// start point of the step; the first step (and every step in first-order
// mode) uses the latest data prediction only.
inline SampleResult integrate(const Denoiser& d, const LatentGrid& x_start, const std::vector<double>& times,
                              const Guidance& guidance, SolverOrder order, const HookProvider& hooks = {}) {
  const auto& s = d.schedule();
  if (times.size() < 2) throw ParseError("integrate: need at least one step");
  for (double t : times) s.check_time(t, "integrate");

  SampleResult res;
  res.trajectory.times = times;
  res.trajectory.latents.reserve(times.size());
  res.trajectory.latents.push_back(x_start);

  LatentGrid x = x_start;
  LatentGrid prev_data;
  double prev_h = 0.0;
  const std::size_t n = x.size();

  for (std::size_t i = 1; i < times.size(); ++i) {
    const int step = static_cast<int>(i) - 1;
    const double t0 = times[i - 1];
    const double t1 = times[i];
    AttentionHook* hook = hooks ? hooks(step) : nullptr;
    const LatentGrid eps = guided_epsilon(d, x, t0, guidance, hook);

    const double a0 = s.alpha(t0);
    const double s0 = s.sigma(t0);
    LatentGrid data(x.width(), x.height(), x.channels());
    for (std::size_t j = 0; j < n; ++j) data[j] = (x[j] - s0 * eps[j]) / a0;

    const double a1 = s.alpha(t1);
    const double s1 = s.sigma(t1);
    const double h = s.lambda(t1) - s.lambda(t0);
    const double phi = -std::expm1(-h);  // 1 - e^{-h}
    const double ratio = s1 / s0;

    if (order == SolverOrder::second && i > 1) {
      const double r = prev_h / h;
      const double c0 = 1.0 + 1.0 / (2.0 * r);
      const double c1 = 1.0 / (2.0 * r);
      for (std::size_t j = 0; j < n; ++j) x[j] = ratio * x[j] + a1 * phi * (c0 * data[j] - c1 * prev_data[j]);
    } else {
      for (std::size_t j = 0; j < n; ++j) x[j] = ratio * x[j] + a1 * phi * data[j];
    }

    if (!x.all_finite()) {
      throw DivergenceError("solver diverged: non-finite latent after step " + std::to_string(i) + " (t=" +
                                std::to_string(t1) + ")",
                            static_cast<int>(i));
    }
    prev_data = std::move(data);
    prev_h = h;
    res.trajectory.latents.push_back(x);
  }
  res.latent = std::move(x);
  return res;
}

inline std::vector<double> solver_times(const NoiseSchedule& s, const SamplerConfig& cfg) {
  if (cfg.direction == Direction::invert) return StepGrid::generation(s, cfg.steps).reversed().times();
  const double t0 = cfg.t_start.value_or(s.t_max);
  return StepGrid(s, cfg.steps, t0, s.t_min).times();
}

// Generation (T -> 0) or inversion (0 -> T) depending on cfg.direction.
inline SampleResult sample(const Denoiser& d, const LatentGrid& x_start, const SamplerConfig& cfg,
                           const HookProvider& hooks = {}) {
  if (cfg.guidance.scale < 0.0) throw ParseError("guidance scale must be >= 0");
  return integrate(d, x_start, solver_times(d.schedule(), cfg), cfg.guidance, cfg.order, hooks);
}

// Image latent -> noise latent along the reversed generation grid.
inline LatentGrid invert(const Denoiser& d, const LatentGrid& x0, SamplerConfig cfg) {
  cfg.direction = Direction::invert;
  cfg.t_start.reset();
  return sample(d, x0, cfg).latent;
}

// Classical RK4 on dx/dlambda = (dx/dt)(dt/dlambda) over a uniform lambda grid,
// with dx/dt from ode_rhs. Reference integrator for convergence tests.
inline LatentGrid oracle_integrate(const Denoiser& d, const LatentGrid& x_start, double t_from, double t_to,
                                   const Guidance& g, int fine_steps = 4096) {
  const auto& s = d.schedule();
  const double l0 = s.lambda(t_from);
  const double l1 = s.lambda(t_to);
  const double dl = (l1 - l0) / fine_steps;
  auto f = [&](const LatentGrid& x, double lam) {
    // Clamp guards against t_of_lambda rounding just outside [t_min, 1].
    const double t = std::clamp(s.t_of_lambda(lam), s.t_min, s.t_max);
    LatentGrid dxdt = ode_rhs(d, x, t, g);
    const double sg = s.sigma(t);
    const double dtdl = -2.0 * sg * sg / s.beta(t);
    for (std::size_t j = 0; j < dxdt.size(); ++j) dxdt[j] *= dtdl;
    return dxdt;
  };
  auto axpy = [](const LatentGrid& x, const LatentGrid& k, double h) {
    LatentGrid out = x;
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += h * k[j];
    return out;
  };

  LatentGrid x = x_start;
  for (int i = 0; i < fine_steps; ++i) {
    const double lam = l0 + dl * i;
    const LatentGrid k1 = f(x, lam);
    const LatentGrid k2 = f(axpy(x, k1, 0.5 * dl), lam + 0.5 * dl);
    const LatentGrid k3 = f(axpy(x, k2, 0.5 * dl), lam + 0.5 * dl);
    const LatentGrid k4 = f(axpy(x, k3, dl), lam + dl);
    for (std::size_t j = 0; j < x.size(); ++j) x[j] += dl / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    if (!x.all_finite()) throw DivergenceError("oracle integrator diverged at step " + std::to_string(i + 1), i + 1);
  }
  return x;
}

inline LatentGrid standard_normal_like(const LatentGrid& shape, Rng& rng) {
  LatentGrid z(shape.width(), shape.height(), shape.channels());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = rng.normal();
  return z;
}

// Noise the image to t = strength, then integrate back to t_min (no inversion).
// strength 0 returns the clamped input; strength 1 starts from pure noise.
inline LatentGrid sdedit_sample(const Denoiser& d, const LatentGrid& x0, double strength, SamplerConfig cfg, Rng& rng) {
  if (!(strength >= 0.0 && strength <= 1.0)) throw ParseError("sdedit strength must be in [0,1]");
  if (strength == 0.0) return encode_latent(decode_latent(x0));
  const auto& s = d.schedule();
  const LatentGrid eps = standard_normal_like(x0, rng);
  cfg.direction = Direction::generate;
  if (strength == 1.0) {
    cfg.t_start = s.t_max;
    return sample(d, eps, cfg).latent;
  }
  const double t = std::max(strength, s.t_min);
  if (t <= s.t_min) return encode_latent(decode_latent(x0));
  cfg.t_start = t;
  return sample(d, forward_diffuse(s, x0, t, eps), cfg).latent;
}

}  // namespace paintmix
