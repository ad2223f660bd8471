#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "paintmix/config.hpp"
#include "paintmix/errors.hpp"
#include "paintmix/image.hpp"
#include "paintmix/palette.hpp"
#include "paintmix/pipeline.hpp"
#include "paintmix/png_io.hpp"

namespace paintmix {

// One user region: a mask (PNG path, or a label id of the sketch) and the
// palette whose global image fills it.
struct JobRegion {
  std::optional<std::filesystem::path> mask_path;
  std::optional<int> label;
  Palette palette;
};

// A colourisation job. Relative paths resolve against the job file's folder.
struct Job {
  std::filesystem::path label_map;
  std::optional<std::string> class_label;
  std::vector<JobRegion> regions;
  std::filesystem::path output_dir;
  nlohmann::json overrides = nlohmann::json::object();
};

namespace detail {

inline std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  const std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

inline std::string require_string(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || !j.at(key).is_string()) throw ParseError(where + ": '" + key + "' must be a string");
  return j.at(key).get<std::string>();
}

}  // namespace detail

inline Job parse_job(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ParseError("job: expected a JSON object");
  static const std::vector<std::string> known = {"label_map", "class", "regions", "output_dir", "config",
                                                 "seed",      "tau",   "steps",   "cfg_scale"};
  for (const auto& [key, value] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) throw ParseError("job: unknown key '" + key + "'");
  }

  Job job;
  job.label_map = detail::resolve(base_dir, detail::require_string(j, "label_map", "job"));
  if (j.contains("class")) {
    if (!j.at("class").is_string() || j.at("class").get<std::string>().empty()) {
      throw ParseError("job: 'class' must be a non-empty string");
    }
    job.class_label = j.at("class").get<std::string>();
  }
  job.output_dir = detail::resolve(base_dir, j.value("output_dir", std::string("out")));

  if (!j.contains("regions") || !j.at("regions").is_array() || j.at("regions").empty()) {
    throw ParseError("job: 'regions' must be a non-empty array");
  }
  int index = 0;
  for (const auto& r : j.at("regions")) {
    ++index;
    const std::string where = "job: region " + std::to_string(index);
    if (!r.is_object()) throw ParseError(where + ": expected an object");
    JobRegion reg;
    if (r.contains("mask")) reg.mask_path = detail::resolve(base_dir, detail::require_string(r, "mask", where));
    if (r.contains("label")) {
      if (!r.at("label").is_number_integer()) throw ParseError(where + ": 'label' must be an integer");
      reg.label = r.at("label").get<int>();
    }
    if (reg.mask_path.has_value() == reg.label.has_value()) {
      throw ParseError(where + ": give exactly one of 'mask' or 'label'");
    }
    if (!r.contains("palette") || !r.at("palette").is_array()) throw ParseError(where + ": 'palette' must be an array");
    std::vector<std::string> codes;
    for (const auto& c : r.at("palette")) {
      if (!c.is_string()) throw ParseError(where + ": palette entries must be strings");
      codes.push_back(c.get<std::string>());
    }
    reg.palette = Palette::from_hex(codes);
    job.regions.push_back(std::move(reg));
  }

  if (j.contains("config")) job.overrides = j.at("config");
  if (!job.overrides.is_object()) throw ParseError("job: 'config' must be an object");
  for (const char* key : {"seed", "tau", "steps", "cfg_scale"}) {
    if (j.contains(key)) job.overrides[key] = j.at(key);
  }
  return job;
}

inline Job load_job(const std::filesystem::path& path) {
  return parse_job(read_json_file(path), path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

inline std::vector<Palette> job_palettes(const Job& job) {
  std::vector<Palette> out;
  for (const auto& r : job.regions) out.push_back(r.palette);
  return out;
}

inline Mask job_mask(const JobRegion& r, const SketchSpec& sketch) {
  Mask m = r.mask_path ? load_mask(*r.mask_path) : Mask();
  if (r.label) {
    if (*r.label < 0 || *r.label >= sketch.regions) {
      throw ParseError("job: label " + std::to_string(*r.label) + " is not a region of the sketch");
    }
    m = sketch.region_mask(*r.label);
  }
  if (m.width() != sketch.width || m.height() != sketch.height) {
    throw DimensionError("mask '" + (r.mask_path ? r.mask_path->string() : std::string("label")) + "' is " +
                         dims_string(m.width(), m.height()) + ", sketch is " + dims_string(sketch.width, sketch.height));
  }
  return m;
}

}  // namespace paintmix
