#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "paintmix/denoiser.hpp"
#include "paintmix/errors.hpp"
#include "paintmix/ode_solver.hpp"

namespace paintmix {

// Self-attention outputs recorded per (layer, step) during a reference run.
class AttentionTape {
 public:
  struct Entry {
    int tokens = 0;
    int dim = 0;
    std::vector<double> values;  // tokens x dim
  };
  using Key = std::pair<int, int>;  // (layer, step)

  AttentionTape() = default;
  AttentionTape(std::string fingerprint, int layers, int steps)
      : fingerprint_(std::move(fingerprint)), layers_(layers), steps_(steps) {}

  const std::string& fingerprint() const noexcept { return fingerprint_; }
  int layers() const noexcept { return layers_; }
  int steps() const noexcept { return steps_; }
  std::size_t size() const noexcept { return entries_.size(); }

  bool contains(int layer, int step) const { return entries_.count({layer, step}) != 0; }

  const Entry& at(int layer, int step) const {
    auto it = entries_.find({layer, step});
    if (it == entries_.end()) {
      throw TapeError("attention tape has no entry for layer " + std::to_string(layer) + ", step " +
                      std::to_string(step));
    }
    return it->second;
  }

  void record(int layer, int step, Entry e) { entries_[{layer, step}] = std::move(e); }

  const std::map<Key, Entry>& entries() const noexcept { return entries_; }

  // Layout (little-endian): magic "PMTAPE1\0", u32 fingerprint length,
  // fingerprint bytes, u32 layers, u32 steps, u32 entry count, then per entry
  // u32 layer, u32 step, u32 tokens, u32 dim, tokens*dim float32 row-major.
  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write attention tape '" + path.string() + "'");
    out.write(kMagic, 8);
    put_u32(out, static_cast<std::uint32_t>(fingerprint_.size()));
    out.write(fingerprint_.data(), static_cast<std::streamsize>(fingerprint_.size()));
    put_u32(out, static_cast<std::uint32_t>(layers_));
    put_u32(out, static_cast<std::uint32_t>(steps_));
    put_u32(out, static_cast<std::uint32_t>(entries_.size()));
    for (const auto& [key, e] : entries_) {
      put_u32(out, static_cast<std::uint32_t>(key.first));
      put_u32(out, static_cast<std::uint32_t>(key.second));
      put_u32(out, static_cast<std::uint32_t>(e.tokens));
      put_u32(out, static_cast<std::uint32_t>(e.dim));
      for (double v : e.values) {
        const float f = static_cast<float>(v);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        put_u32(out, bits);
      }
    }
    if (!out) throw IoError("short write to attention tape '" + path.string() + "'");
  }

  static AttentionTape load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open attention tape '" + path.string() + "'");
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kMagic, 8) != 0) throw IoError("'" + path.string() + "' is not an attention tape");
    std::string fp(get_u32(in, path), '\0');
    in.read(fp.data(), static_cast<std::streamsize>(fp.size()));
    const int layers = static_cast<int>(get_u32(in, path));
    const int steps = static_cast<int>(get_u32(in, path));
    AttentionTape tape(fp, layers, steps);
    const std::uint32_t count = get_u32(in, path);
    for (std::uint32_t i = 0; i < count; ++i) {
      const int layer = static_cast<int>(get_u32(in, path));
      const int step = static_cast<int>(get_u32(in, path));
      Entry e;
      e.tokens = static_cast<int>(get_u32(in, path));
      e.dim = static_cast<int>(get_u32(in, path));
      e.values.resize(static_cast<std::size_t>(e.tokens) * e.dim);
      for (auto& v : e.values) {
        const std::uint32_t bits = get_u32(in, path);
        float f;
        std::memcpy(&f, &bits, 4);
        v = f;
      }
      tape.record(layer, step, std::move(e));
    }
    return tape;
  }

 private:
  static constexpr char kMagic[8] = {'P', 'M', 'T', 'A', 'P', 'E', '1', '\0'};

  static void put_u32(std::ofstream& out, std::uint32_t v) {
    const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                                static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
  }

  static std::uint32_t get_u32(std::ifstream& in, const std::filesystem::path& path) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw IoError("truncated attention tape '" + path.string() + "'");
    return std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) | (std::uint32_t{b[2]} << 16) | (std::uint32_t{b[3]} << 24);
  }

  std::string fingerprint_;
  int layers_ = 0;
  int steps_ = 0;
  std::map<Key, Entry> entries_;
};

namespace detail {

class RecordingHook final : public AttentionHook {
 public:
  RecordingHook(AttentionTape& tape, int step, int dim) : tape_(tape), step_(step), dim_(dim) {}
  void on_attention(int layer, std::span<const double> /*weights*/, std::vector<double>& output) override {
    // Both guidance branches pass through here; the first one recorded wins.
    if (tape_.contains(layer, step_)) return;
    tape_.record(layer, step_, {static_cast<int>(output.size()) / dim_, dim_, output});
  }

 private:
  AttentionTape& tape_;
  int step_;
  int dim_;
};

class InjectingHook final : public AttentionHook {
 public:
  InjectingHook(const AttentionTape& tape, int step) : tape_(tape), step_(step) {}
  void on_attention(int layer, std::span<const double> /*weights*/, std::vector<double>& output) override {
    const auto& e = tape_.at(layer, step_);
    if (e.values.size() != output.size()) {
      throw TapeError("attention tape entry (layer " + std::to_string(layer) + ", step " + std::to_string(step_) +
                      ") has " + std::to_string(e.values.size()) + " values, denoiser produced " +
                      std::to_string(output.size()));
    }
    output = e.values;
  }

 private:
  const AttentionTape& tape_;
  int step_;
};

}  // namespace detail

// Generation steps whose start time satisfies t_i >= (1 - tau) t_0.
inline std::set<int> injection_step_set(const StepGrid& grid, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw ParseError("tau must be in [0,1], got " + std::to_string(tau));
  std::set<int> out;
  if (tau == 0.0) return out;
  const double threshold = (1.0 - tau) * grid[0];
  for (int i = 0; i < grid.steps(); ++i) {
    if (grid[static_cast<std::size_t>(i)] >= threshold) out.insert(i);
  }
  return out;
}

struct CaptureResult {
  LatentGrid reconstruction;
  AttentionTape tape;
};

// Reconstructs from the inverted latent and records every layer's attention
// output at every step.
inline CaptureResult capture_run(const Denoiser& d, const LatentGrid& z_star, const SamplerConfig& cfg) {
  if (d.attention_layers() == 0) throw TapeError("capture_run: denoiser has no attention layers");
  AttentionTape tape(d.fingerprint(), d.attention_layers(), cfg.steps);
  std::vector<std::unique_ptr<detail::RecordingHook>> hooks;
  HookProvider provider = [&](int step) -> AttentionHook* {
    hooks.push_back(std::make_unique<detail::RecordingHook>(tape, step, d.attention_dim()));
    return hooks.back().get();
  };
  SamplerConfig c = cfg;
  c.direction = Direction::generate;
  c.t_start.reset();
  LatentGrid recon = sample(d, z_star, c, provider).latent;
  return {std::move(recon), std::move(tape)};
}

// Guided sampling where, for the first tau fraction of the trajectory, every
// self-attention output on both guidance branches is replaced from the tape.
inline SampleResult injected_sample(const Denoiser& d, const LatentGrid& z_start, const AttentionTape& tape, double tau,
                                    const SamplerConfig& cfg) {
  if (tape.fingerprint() != d.fingerprint()) {
    throw TapeError("attention tape fingerprint '" + tape.fingerprint() + "' does not match denoiser '" +
                    d.fingerprint() + "'");
  }
  SamplerConfig c = cfg;
  c.direction = Direction::generate;
  c.t_start.reset();
  const StepGrid grid = StepGrid::generation(d.schedule(), c.steps);
  const std::set<int> injected = injection_step_set(grid, tau);
  if (!injected.empty() && tape.steps() != c.steps) {
    throw TapeError("attention tape holds " + std::to_string(tape.steps()) + " steps, sampler uses " +
                    std::to_string(c.steps));
  }
  for (int step : injected) {
    for (int l = 0; l < d.attention_layers(); ++l) (void)tape.at(l, step);
  }

  std::vector<std::unique_ptr<detail::InjectingHook>> hooks;
  HookProvider provider = [&](int step) -> AttentionHook* {
    if (!injected.count(step)) return nullptr;
    hooks.push_back(std::make_unique<detail::InjectingHook>(tape, step));
    return hooks.back().get();
  };
  return sample(d, z_start, c, provider);
}

}  // namespace paintmix
