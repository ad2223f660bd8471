// paintmix command-line driver. See README.md for the job-file schema and
// output layout.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "paintmix/ablation.hpp"
#include "paintmix/job.hpp"

namespace fs = std::filesystem;
using namespace paintmix;

namespace {

enum ExitCode { kOk = 0, kOther = 1, kParse = 2, kIo = 3, kDivergence = 4 };

// Command-line overrides shared by the job-driven subcommands.
struct Overrides {
  std::optional<int> steps;
  std::optional<double> cfg_scale;
  std::optional<std::uint64_t> seed;
  std::optional<double> tau;
  std::string out;

  void attach(CLI::App* cmd) {
    cmd->add_option("--steps", steps, "Solver steps (sampling and inversion)");
    cmd->add_option("--cfg-scale", cfg_scale, "Classifier-free guidance scale");
    cmd->add_option("--seed", seed, "Base seed");
    cmd->add_option("--tau", tau, "Attention injection fraction in [0,1]");
    cmd->add_option("--out", out, "Output directory (default: the job's output_dir)");
  }
};

std::string g_config_path;

// defaults < config file (--config or PAINTMIX_CONFIG) < job overrides < flags
Config resolve_config(const nlohmann::json& job_overrides, const Overrides& o) {
  Config c;
  std::string path = g_config_path;
  if (path.empty()) {
    if (const char* env = std::getenv("PAINTMIX_CONFIG")) path = env;
  }
  if (!path.empty()) apply_json(c, read_json_file(path));
  apply_json(c, job_overrides);
  if (o.steps) c.steps = c.inversion_steps = *o.steps;
  if (o.cfg_scale) c.cfg_scale = *o.cfg_scale;
  if (o.seed) c.seed = *o.seed;
  if (o.tau) c.tau = *o.tau;
  c.validate();
  return c;
}

void ensure_parent(const fs::path& p) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

// Write to a sibling temp file, then rename over the target.
void write_png_atomic(const ImageBuffer& img, const fs::path& path) {
  ensure_parent(path);
  fs::path tmp = path;
  tmp += ".tmp";
  save_png(img, tmp);
  fs::rename(tmp, path);
}

void write_text_atomic(const std::string& text, const fs::path& path) {
  ensure_parent(path);
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    out << text;
    if (!out) throw IoError("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, path);
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw ParseError("bad number '" + item + "' in list '" + text + "'");
    }
  }
  if (out.empty()) throw ParseError("empty list");
  return out;
}

std::string pad2(std::size_t i) {
  std::ostringstream os;
  os << std::setw(2) << std::setfill('0') << i;
  return os.str();
}

// Everything a job-driven command needs, loaded and validated.
struct Loaded {
  Job job;
  Config cfg;
  SketchSpec sketch;
  std::vector<Mask> masks;
  std::vector<Palette> palettes;
  fs::path out;
};

Loaded load(const std::string& job_path, const Overrides& o) {
  Loaded l;
  l.job = load_job(job_path);
  l.cfg = resolve_config(l.job.overrides, o);
  l.sketch = load_label_map(l.job.label_map, l.job.class_label);
  for (const auto& r : l.job.regions) l.masks.push_back(job_mask(r, l.sketch));
  l.palettes = job_palettes(l.job);
  l.out = o.out.empty() ? l.job.output_dir : fs::path(o.out);
  return l;
}

std::vector<LocalRegion> local_regions(const GlobalResult& g, const std::vector<Mask>& masks) {
  std::vector<LocalRegion> out;
  for (std::size_t i = 0; i < masks.size(); ++i) out.push_back({g.palettes[i].image, masks[i]});
  return out;
}

const char* kMetricsNote =
    "# palette_distance: mean RGB byte distance from K-Means (K=4) centroids to the nearest palette colour;\n"
    "# a local stand-in, not DCCW, and not comparable to published DCCW numbers.\n";

int cmd_name_colour(const std::string& hex) {
  std::cout << nearest_name(css3_tree(), parse_hex(hex)).name << "\n";
  return kOk;
}

int cmd_compose(const std::string& background, const std::vector<std::pair<std::string, std::string>>& pairs,
                const std::string& out) {
  CompositePlan plan{load_png(background), {}};
  std::vector<Mask> masks;
  for (const auto& [mask, image] : pairs) {
    masks.push_back(load_mask(mask));
    plan.regions.push_back({load_png(image), masks.back()});
  }
  const ImageBuffer composite = compose(plan);
  const fs::path dir(out);
  write_png_atomic(composite, dir / "composite.png");
  const Mask tran = transitional_mask(masks, composite.width(), composite.height());
  write_png_atomic(mask_to_image(tran), dir / "transitional_mask.png");
  std::cout << (dir / "composite.png").string() << "\n" << (dir / "transitional_mask.png").string() << "\n";
  return kOk;
}

int cmd_colourise(const std::string& job_path, const Overrides& o, bool dump_stages, bool dump_trajectory,
                  bool save_tape, const std::string& invert_with) {
  const Loaded l = load(job_path, o);
  const Pipeline p(l.cfg);
  const std::string cls = class_semantics(l.sketch);

  const GlobalResult g = p.global_colourise(l.sketch, l.palettes, l.cfg.seed);
  std::ostringstream prompts;
  for (std::size_t i = 0; i < g.palettes.size(); ++i) {
    write_png_atomic(g.palettes[i].image, l.out / "global" / ("palette_" + std::to_string(i + 1) + ".png"));
    prompts << "palette_" << i + 1 << ".seed=" << g.palettes[i].seed << "\n";
    prompts << "palette_" << i + 1 << ".positive=" << g.palettes[i].prompt.positive << "\n";
  }
  write_png_atomic(g.auxiliary.image, l.out / "global" / "auxiliary.png");
  prompts << "auxiliary.seed=" << g.auxiliary.seed << "\n";
  prompts << "auxiliary.positive=" << g.auxiliary.prompt.positive << "\n";
  prompts << "negative=" << g.auxiliary.prompt.negative << "\n";
  prompts << "local=" << local_prompt(cls) << "\n";

  std::size_t stage = 0;
  StageSink sink;
  if (dump_stages) {
    sink = [&](std::string_view name, const ImageBuffer& img) {
      write_png_atomic(img, l.out / "stages" / (pad2(stage++) + "_" + std::string(name) + ".png"));
    };
  }
  const LocalPrepared prep = p.prepare_local(l.sketch, l.palettes, g.auxiliary.image, local_regions(g, l.masks),
                                             l.cfg.seed, sink, parse_inversion_prompt(invert_with));
  Trajectory traj;
  const ImageBuffer local = p.finish_local(prep, cls, l.cfg.tau, sink, dump_trajectory ? &traj : nullptr);

  write_png_atomic(prep.composite, l.out / "local" / "composite.png");
  write_png_atomic(mask_to_image(prep.transitional), l.out / "local" / "transitional_mask.png");
  write_png_atomic(decode_latent(prep.reconstruction), l.out / "local" / "reconstruction.png");
  write_png_atomic(local, l.out / "local" / "local.png");
  if (save_tape) prep.tape.save(l.out / "local" / "attention.tape");
  if (dump_trajectory) {
    for (std::size_t i = 0; i < traj.latents.size(); ++i) {
      write_png_atomic(decode_latent(traj.latents[i]), l.out / "trajectory" / ("step_" + pad2(i) + ".png"));
    }
  }

  std::ostringstream m;
  m << kMetricsNote;
  m << "tau=" << format_double(l.cfg.tau) << "\n";
  m << "steps=" << l.cfg.steps << "\n";
  m << "seed=" << l.cfg.seed << "\n";
  for (std::size_t i = 0; i < g.palettes.size(); ++i) {
    m << "global.palette_" << i + 1 << ".palette_distance=" << format_double(palette_distance(g.palettes[i].image, l.palettes[i]))
      << "\n";
  }
  m << "local.reconstruction.psnr=" << format_double(psnr(decode_latent(prep.reconstruction), prep.composite)) << "\n";
  m << "local.psnr=" << format_double(psnr(local, prep.composite)) << "\n";
  m << "local.ssim=" << format_double(ssim(local, prep.composite)) << "\n";
  for (std::size_t i = 0; i < l.masks.size(); ++i) {
    m << "local.region_" << i + 1 << ".palette_distance=" << format_double(palette_distance(local, l.palettes[i], &l.masks[i]))
      << "\n";
  }
  m << "local.transitional_pixels=" << prep.transitional.count() << "\n";
  write_text_atomic(m.str(), l.out / "metrics.txt");
  write_text_atomic(prompts.str(), l.out / "prompts.txt");
  std::cout << (l.out / "local" / "local.png").string() << "\n";
  return kOk;
}

int cmd_regenerate(const std::string& job_path, const Overrides& o, int index) {
  const Loaded l = load(job_path, o);
  if (index < 1 || index > static_cast<int>(l.palettes.size())) {
    throw ParseError("--palette must be in [1," + std::to_string(l.palettes.size()) + "]");
  }
  const Pipeline p(l.cfg);
  const ImageBuffer img = p.regenerate(l.sketch, l.palettes[static_cast<std::size_t>(index - 1)], l.cfg.seed);
  const fs::path path =
      l.out / "global" / ("palette_" + std::to_string(index) + "_seed_" + std::to_string(l.cfg.seed) + ".png");
  write_png_atomic(img, path);
  std::cout << path.string() << "\n";
  return kOk;
}

int cmd_ablate_tau(const std::string& job_path, const Overrides& o, const std::string& taus) {
  const Loaded l = load(job_path, o);
  const Pipeline p(l.cfg);
  const GlobalResult g = p.global_colourise(l.sketch, l.palettes, l.cfg.seed);
  const LocalPrepared prep = p.prepare_local(l.sketch, l.palettes, g.auxiliary.image, local_regions(g, l.masks), l.cfg.seed);
  const auto rows = tau_sweep(p, prep, class_semantics(l.sketch), parse_list(taus), l.masks, l.palettes);
  for (const auto& r : rows) {
    write_png_atomic(r.image, l.out / "ablate_tau" / ("tau_" + format_double(r.tau) + ".png"));
  }
  const std::string table = tau_table(rows);
  write_text_atomic(table, l.out / "ablate_tau" / "tau_sweep.tsv");
  std::cout << table;
  return kOk;
}

int cmd_ablate_inversion(const std::string& job_path, const Overrides& o, int cases, const std::string& steps) {
  const Loaded l = load(job_path, o);
  if (cases < 1) throw ParseError("--cases must be positive");
  const Pipeline p(l.cfg);
  std::vector<int> ns;
  for (double v : parse_list(steps)) ns.push_back(static_cast<int>(v));
  const std::string table = inversion_table(inversion_ablation(p, l.sketch, l.palettes, cases, ns));
  write_text_atomic(table, l.out / "ablate_inversion" / "inversion.tsv");
  std::cout << table;
  return kOk;
}

int cmd_sdedit(const std::string& job_path, const Overrides& o, const std::string& strengths) {
  const Loaded l = load(job_path, o);
  const Pipeline p(l.cfg);
  const std::string cls = class_semantics(l.sketch);
  const GlobalResult g = p.global_colourise(l.sketch, l.palettes, l.cfg.seed);
  const LocalPrepared prep = p.prepare_local(l.sketch, l.palettes, g.auxiliary.image, local_regions(g, l.masks), l.cfg.seed);
  const ImageBuffer local = p.finish_local(prep, cls, l.cfg.tau);
  const auto rows = sdedit_comparison(p, prep, local, cls, parse_list(strengths), l.masks, l.palettes);
  for (const auto& r : rows) {
    write_png_atomic(r.image, l.out / "sdedit" / (r.method + "_" + format_double(r.strength) + ".png"));
  }
  const std::string table = sdedit_table(rows);
  write_text_atomic(table, l.out / "sdedit" / "sdedit.tsv");
  std::cout << table;
  return kOk;
}

int cmd_ablate_palette(const std::string& job_path, const Overrides& o, const std::string& sizes,
                       const std::string& reference) {
  const Loaded l = load(job_path, o);
  const Pipeline p(l.cfg);
  const ImageBuffer ref = reference.empty() ? synthetic_reference(l.sketch, l.cfg.seed) : load_png(reference);
  if (ref.width() != l.sketch.width || ref.height() != l.sketch.height) {
    throw DimensionError("reference is " + dims_string(ref.width(), ref.height()) + ", sketch is " +
                         dims_string(l.sketch.width, l.sketch.height));
  }
  std::vector<int> ns;
  for (double v : parse_list(sizes)) ns.push_back(static_cast<int>(v));
  const auto rows = palette_size_sweep(p, l.sketch, ref, ns);
  write_png_atomic(ref, l.out / "ablate_palette" / "reference.png");
  for (const auto& r : rows) {
    write_png_atomic(r.image, l.out / "ablate_palette" / ("size_" + std::to_string(r.size) + ".png"));
  }
  const std::string table = palette_size_table(rows);
  write_text_atomic(table, l.out / "ablate_palette" / "palette_sizes.tsv");
  std::cout << table;
  return kOk;
}

int cmd_palette_extract(const std::string& image, const std::string& mask, int k, std::uint64_t seed) {
  const ImageBuffer img = load_png(image);
  std::optional<Mask> m;
  if (!mask.empty()) m = load_mask(mask);
  if (m && !m->matches(img)) throw DimensionError("mask and image sizes differ");
  Rng rng(seed);
  const auto res = extract_palette(img, m ? &*m : nullptr, static_cast<std::size_t>(k), rng);
  for (Rgb c : res.palette.colours) std::cout << to_hex(c) << "\t" << nearest_name(css3_tree(), c).name << "\n";
  if (res.padded) std::cerr << "note: fewer than " << k << " distinct colours; palette padded by repetition\n";
  return kOk;
}

int cmd_config_print(const std::string& job_path, const Overrides& o) {
  nlohmann::json overrides = nlohmann::json::object();
  if (!job_path.empty()) overrides = load_job(job_path).overrides;
  std::cout << print_config(resolve_config(overrides, o));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"paintmix: palette-driven colourisation of label-map sketches"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--config", g_config_path, "Config JSON (overrides $PAINTMIX_CONFIG)");

  std::string hex;
  auto* name = app.add_subcommand("name-colour", "Print the nearest CSS3 colour name of #RRGGBB");
  name->add_option("hex", hex)->required();

  std::string background, compose_out = ".";
  std::vector<std::pair<std::string, std::string>> pairs;
  auto* comp = app.add_subcommand("compose", "Composite region images over a background by mask");
  comp->add_option("--background", background, "Background PNG")->required();
  comp->add_option("--region", pairs, "Mask PNG and region PNG (repeatable)");
  comp->add_option("--out", compose_out, "Output directory");

  std::string job;
  Overrides ov;
  bool dump_stages = false, dump_trajectory = false, save_tape = false;
  std::string invert_with = "except";
  auto* col = app.add_subcommand("colourise", "Run the global and local stages for a job file");
  col->add_option("job", job)->required();
  ov.attach(col);
  col->add_flag("--dump-stages", dump_stages, "Write every local-stage intermediate");
  col->add_flag("--dump-trajectory", dump_trajectory, "Write the final sampling trajectory as PNG frames");
  col->add_flag("--save-tape", save_tape, "Write the captured attention tape to local/attention.tape");
  col->add_option("--invert", invert_with, "Inversion prompt: except or null");

  int palette_index = 1;
  auto* regen = app.add_subcommand("regenerate", "Re-run one palette's global image at a new seed");
  regen->add_option("job", job)->required();
  regen->add_option("--palette", palette_index, "1-based palette index");
  ov.attach(regen);

  std::string taus = "0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1";
  auto* atau = app.add_subcommand("ablate-tau", "Sweep tau and tabulate fidelity and palette metrics");
  atau->add_option("job", job)->required();
  atau->add_option("--taus", taus, "Comma-separated tau values");
  ov.attach(atau);

  int cases = 10;
  std::string inv_steps = "10,20,50,100";
  auto* ainv = app.add_subcommand("ablate-inversion", "Exceptional vs null prompt inversion roundtrip errors");
  ainv->add_option("job", job)->required();
  ainv->add_option("--cases", cases, "Seeded cases");
  ainv->add_option("--inversion-steps", inv_steps, "Comma-separated step counts");
  ov.attach(ainv);

  std::string strengths = "0.25,0.5,0.75";
  auto* sde = app.add_subcommand("sdedit", "Compare the local stage with SDEdit on the same composite");
  sde->add_option("job", job)->required();
  sde->add_option("--sdedit-strength", strengths, "Comma-separated strengths in [0,1]");
  ov.attach(sde);

  std::string sizes = "1,2,3,4,5", reference;
  auto* apal = app.add_subcommand("ablate-palette", "Sweep palette size against a reference image");
  apal->add_option("job", job)->required();
  apal->add_option("--sizes", sizes, "Comma-separated palette sizes in [1,8]");
  apal->add_option("--reference", reference, "Reference PNG (default: seeded synthetic image)");
  ov.attach(apal);

  std::string image, mask;
  int k = 4;
  std::uint64_t pseed = 0;
  auto* pal = app.add_subcommand("palette-extract", "K-Means dominant colours of a PNG");
  pal->add_option("image", image)->required();
  pal->add_option("--mask", mask, "Restrict to a mask PNG");
  pal->add_option("-k", k, "Number of colours");
  pal->add_option("--seed", pseed, "Seed for the start pixel");

  auto* cprint = app.add_subcommand("config-print", "Print the resolved configuration and prompt templates");
  cprint->add_option("job", job, "Optional job file whose overrides apply");
  ov.attach(cprint);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kParse;
  }

  try {
    if (*name) return cmd_name_colour(hex);
    if (*comp) return cmd_compose(background, pairs, compose_out);
    if (*col) return cmd_colourise(job, ov, dump_stages, dump_trajectory, save_tape, invert_with);
    if (*regen) return cmd_regenerate(job, ov, palette_index);
    if (*atau) return cmd_ablate_tau(job, ov, taus);
    if (*ainv) return cmd_ablate_inversion(job, ov, cases, inv_steps);
    if (*sde) return cmd_sdedit(job, ov, strengths);
    if (*apal) return cmd_ablate_palette(job, ov, sizes, reference);
    if (*pal) return cmd_palette_extract(image, mask, k, pseed);
    if (*cprint) return cmd_config_print(job, ov);
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kParse;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kIo;
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDivergence;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kOther;
  }
  return kOther;
}
