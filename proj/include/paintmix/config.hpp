#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "paintmix/errors.hpp"
#include "paintmix/prompt.hpp"
#include "paintmix/schedule.hpp"

namespace paintmix {

// Every tunable of the pipeline. Defaults here mirror config/default.json.
struct Config {
  int width = 64;
  int height = 64;

  double beta_min = 0.1;
  double beta_max = 20.0;
  double t_min = 1e-3;

  int steps = 20;
  int inversion_steps = 20;
  double cfg_scale = 2.5;
  double tau = 0.4;
  std::uint64_t seed = 42;

  double data_std = 0.05;
  double key_jitter = 0.5;
  int palette_k = 4;

  int text_tokens = 32;
  int embed_dim = 16;
  std::uint64_t text_seed = 7;

  int patch = 8;
  int attention_dim = 32;
  int attention_layers = 2;
  std::uint64_t attention_seed = 1234;
  double attention_strength = 0.3;

  int local_prior_radius = 2;
  double local_prior_floor = 0.05;

  NoiseSchedule schedule() const { return {beta_min, beta_max, t_min, 1.0}; }

  void validate() const {
    auto bad = [](const std::string& what) { return ParseError("config: " + what); };
    if (width < 1 || height < 1) throw bad("width/height must be positive");
    if (!(beta_min > 0 && beta_max > beta_min)) throw bad("need 0 < beta_min < beta_max");
    if (!(t_min > 0 && t_min < 1)) throw bad("t_min must be in (0,1)");
    if (steps < 2 || steps > 1000) throw bad("steps must be in [2,1000]");
    if (inversion_steps < 2 || inversion_steps > 1000) throw bad("inversion_steps must be in [2,1000]");
    if (!(cfg_scale >= 0)) throw bad("cfg_scale must be >= 0");
    if (!(tau >= 0 && tau <= 1)) throw bad("tau must be in [0,1]");
    if (!(data_std > 0)) throw bad("data_std must be positive");
    if (palette_k < 1 || palette_k > 8) throw bad("palette_k must be in [1,8]");
    if (text_tokens < 2 || embed_dim < 2) throw bad("text_tokens and embed_dim must be >= 2");
    if (patch < 1 || attention_dim < 1 || attention_layers < 1) throw bad("attention dims must be positive");
    if (local_prior_radius < 0) throw bad("local_prior_radius must be >= 0");
    if (!(local_prior_floor > 0)) throw bad("local_prior_floor must be positive");
    if (width % patch != 0 || height % patch != 0) throw bad("width and height must be multiples of patch");
  }
};

// Applies recognised keys from a JSON object; unknown keys are rejected.
inline void apply_json(Config& c, const nlohmann::json& j, bool ignore_unknown = false) {
  if (!j.is_object()) throw ParseError("config: expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "width") c.width = value.get<int>();
      else if (key == "height") c.height = value.get<int>();
      else if (key == "beta_min") c.beta_min = value.get<double>();
      else if (key == "beta_max") c.beta_max = value.get<double>();
      else if (key == "t_min") c.t_min = value.get<double>();
      else if (key == "steps") c.steps = value.get<int>();
      else if (key == "inversion_steps") c.inversion_steps = value.get<int>();
      else if (key == "cfg_scale") c.cfg_scale = value.get<double>();
      else if (key == "tau") c.tau = value.get<double>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "data_std") c.data_std = value.get<double>();
      else if (key == "key_jitter") c.key_jitter = value.get<double>();
      else if (key == "palette_k") c.palette_k = value.get<int>();
      else if (key == "text_tokens") c.text_tokens = value.get<int>();
      else if (key == "embed_dim") c.embed_dim = value.get<int>();
      else if (key == "text_seed") c.text_seed = value.get<std::uint64_t>();
      else if (key == "patch") c.patch = value.get<int>();
      else if (key == "attention_dim") c.attention_dim = value.get<int>();
      else if (key == "attention_layers") c.attention_layers = value.get<int>();
      else if (key == "attention_seed") c.attention_seed = value.get<std::uint64_t>();
      else if (key == "attention_strength") c.attention_strength = value.get<double>();
      else if (key == "local_prior_radius") c.local_prior_radius = value.get<int>();
      else if (key == "local_prior_floor") c.local_prior_floor = value.get<double>();
      else if (!ignore_unknown) throw ParseError("config: unknown key '" + key + "'");
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("config: bad value for '" + key + "': " + e.what());
    }
  }
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("'" + path.string() + "': " + e.what());
  }
}

inline Config load_config(const std::filesystem::path& path) {
  Config c;
  apply_json(c, read_json_file(path));
  c.validate();
  return c;
}

// Shortest text that reads back to the same double.
inline std::string format_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// Stable key=value rendering used by `config-print`.
inline std::string print_config(const Config& c) {
  std::ostringstream os;
  os << "# paintmix resolved configuration\n";
  os << "width=" << c.width << "\n";
  os << "height=" << c.height << "\n";
  os << "beta_min=" << format_double(c.beta_min) << "\n";
  os << "beta_max=" << format_double(c.beta_max) << "\n";
  os << "t_min=" << format_double(c.t_min) << "\n";
  os << "steps=" << c.steps << "\n";
  os << "inversion_steps=" << c.inversion_steps << "\n";
  os << "cfg_scale=" << format_double(c.cfg_scale) << "\n";
  os << "tau=" << format_double(c.tau) << "\n";
  os << "seed=" << c.seed << "\n";
  os << "data_std=" << format_double(c.data_std) << "\n";
  os << "key_jitter=" << format_double(c.key_jitter) << "\n";
  os << "palette_k=" << c.palette_k << "\n";
  os << "text_tokens=" << c.text_tokens << "\n";
  os << "embed_dim=" << c.embed_dim << "\n";
  os << "text_seed=" << c.text_seed << "\n";
  os << "patch=" << c.patch << "\n";
  os << "attention_dim=" << c.attention_dim << "\n";
  os << "attention_layers=" << c.attention_layers << "\n";
  os << "attention_seed=" << c.attention_seed << "\n";
  os << "attention_strength=" << format_double(c.attention_strength) << "\n";
  os << "local_prior_radius=" << c.local_prior_radius << "\n";
  os << "local_prior_floor=" << format_double(c.local_prior_floor) << "\n";
  os << "prompt.positive=[class]" << kPositiveSuffix << kPaletteClause << "[c1]" << kColourSeparator << "[c2]"
     << kColourSeparator << "... [cn]\n";
  os << "prompt.auxiliary=[class]" << kPositiveSuffix << "\n";
  os << "prompt.negative=" << kNegativePrompt << "\n";
  os << "prompt.local=" << local_prompt("[class]") << "\n";
  return os.str();
}

}  // namespace paintmix
