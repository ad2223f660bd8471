// Prints one PASS/FAIL line per acceptance criterion; exits 1 on any failure.
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "paintmix/ablation.hpp"
#include "paintmix/attention_control.hpp"
#include "paintmix/colour.hpp"
#include "paintmix/config.hpp"
#include "paintmix/job.hpp"
#include "paintmix/mask_ops.hpp"
#include "paintmix/ode_solver.hpp"
#include "paintmix/pipeline.hpp"
#include "paintmix/prompt.hpp"

using namespace paintmix;
namespace fs = std::filesystem;

namespace {

const fs::path kSource = PAINTMIX_SOURCE_DIR;
const fs::path kDemoJob = kSource / "data/demo/job.json";

// Frozen after the first audited oracle run.
constexpr int kPaletteLinf = 24;
constexpr int kPaletteSeedsRequired = 9;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

int run_cli(const std::string& args, const fs::path& stdout_path) {
  const std::string cmd = "env -u PAINTMIX_CONFIG '" + std::string(PAINTMIX_CLI) + "' " + args + " >'" +
                          stdout_path.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("paintmix_acceptance_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

LatentGrid seeded_latent(int w, int h, std::uint64_t seed, double scale) {
  Rng rng(seed);
  LatentGrid z(w, h, 3);
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = scale * rng.normal();
  return z;
}

SketchSpec quad_sketch(int w, int h) {
  std::vector<int> labels(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) labels[static_cast<std::size_t>(y) * w + x] = (y >= h / 2) * 2 + (x >= w / 2);
  }
  return SketchSpec::from_labels(w, h, labels, "cat");
}

struct Demo {
  Config cfg;
  Pipeline p{cfg};
  SketchSpec sketch;
  std::vector<Mask> masks;
  std::vector<Palette> palettes;

  Demo() {
    const Job job = load_job(kDemoJob);
    sketch = load_label_map(job.label_map, job.class_label);
    for (const auto& r : job.regions) masks.push_back(job_mask(r, sketch));
    palettes = job_palettes(job);
  }
};

// 1. DPM-Solver++ 2M order on the single-Gaussian ODE against its closed form.
Outcome solver_order() {
  Outcome o;
  const auto start = Clock::now();
  const NoiseSchedule s;
  const double sigma0 = 0.5;
  const LatentGrid mu = seeded_latent(4, 4, 11, 0.5);
  const LatentGrid x_t = seeded_latent(4, 4, 12, 1.0);
  const GmmDenoiser d({{mu, 1.0, {}}}, s, sigma0);
  auto v = [&](double t) { return s.alpha_bar(t) * sigma0 * sigma0 + 1.0 - s.alpha_bar(t); };
  LatentGrid exact(4, 4, 3);
  const double k = std::sqrt(v(s.t_min) / v(s.t_max));
  for (std::size_t i = 0; i < exact.size(); ++i) exact[i] = s.alpha(s.t_min) * mu[i] + (x_t[i] - s.alpha(s.t_max) * mu[i]) * k;
  auto error = [&](int n, SolverOrder order) {
    SamplerConfig c;
    c.steps = n;
    c.order = order;
    c.guidance = Guidance::raw({1, 0, {}, EmbeddingKind::null});
    const LatentGrid got = sample(d, x_t, c).latent;
    double sq = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i) sq += (got[i] - exact[i]) * (got[i] - exact[i]);
    return std::sqrt(sq);
  };
  for (int n : {20, 40}) {
    const double second = error(n, SolverOrder::second) / error(2 * n, SolverOrder::second);
    const double first = error(n, SolverOrder::first) / error(2 * n, SolverOrder::first);
    o.detail << " N=" << n << " ratio2=" << second << " ratio1=" << first;
    o.check(second >= 3.0 && second <= 6.0, "second-order ratio in [3,6]");
    o.check(first >= 1.7 && first <= 2.5, "first-order ratio in [1.7,2.5]");
  }
  const double secs = seconds_since(start);
  o.detail << " time=" << secs << "s";
  o.check(secs < 10.0, "runtime < 10 s");
  return o;
}

// 2. Inversion roundtrip on seeded GMM draws.
Outcome inversion_fidelity(const Demo& demo) {
  Outcome o;
  const auto start = Clock::now();
  const int cases = 10;
  const auto rows = inversion_ablation(demo.p, demo.sketch, demo.palettes, cases, {20, 100});
  std::map<int, std::map<int, InversionRow>> by_case;
  for (const auto& r : rows) by_case[r.case_index][r.steps] = r;
  double worst100 = 0.0;
  int null_not_worse = 0;
  int coarse_larger = 0;
  for (const auto& [c, by_steps] : by_case) {
    const auto& fine = by_steps.at(100);
    const auto& coarse = by_steps.at(20);
    worst100 = std::max(worst100, fine.except_error);
    coarse_larger += coarse.except_error > fine.except_error;
    null_not_worse += fine.null_error >= fine.except_error;
  }
  o.detail << " cases=" << by_case.size() << " max_except_100=" << worst100 << " coarse_larger=" << coarse_larger
           << " null>=except@100=" << null_not_worse;
  o.check(static_cast<int>(by_case.size()) >= 10, ">= 10 cases");
  o.check(worst100 < 1e-3, "100+100 relative L2 < 1e-3");
  o.check(coarse_larger == cases, "20+20 error strictly larger on every case");
  o.check(null_not_worse == cases, "null error >= exceptional error on every case");
  const double secs = seconds_since(start);
  o.detail << " time=" << secs << "s";
  o.check(secs < 30.0, "runtime < 30 s");
  return o;
}

// 3. The exceptional embedding reproduces the unconditional prediction.
Outcome neutrality() {
  Outcome o;
  const Config cfg;
  const Pipeline p(cfg);
  const SketchSpec sk = quad_sketch(cfg.width, cfg.height);
  const auto except = p.encoder().exceptional();
  const auto null = p.encoder().null_embedding();
  double worst_except = 0.0, worst_null = 0.0;
  for (const auto& pal : {Palette::from_hex({"#FF0000", "#0000FF"}),
                          Palette::from_hex({"#FFD700", "#228B22", "#4B0082", "#FF6347"})}) {
    const GmmDenoiser d = p.palette_denoiser(sk, pal);
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
      const LatentGrid x = seeded_latent(cfg.width, cfg.height, 100 + seed, 1.0);
      for (double t : {0.05, 0.3, 0.6, 0.9}) {
        const LatentGrid u = d.unconditional(x, t);
        worst_except = std::max(worst_except, max_abs_diff(d.evaluate(x, t, except), u));
        worst_null = std::max(worst_null, max_abs_diff(d.evaluate(x, t, null), u));
      }
    }
  }
  o.detail << " except_diff=" << worst_except << " null_diff=" << worst_null;
  o.check(worst_except <= 1e-12, "exceptional within 1e-12");
  o.check(worst_null > 1e-3, "null differs by > 1e-3");
  return o;
}

// 4. Mask algebra over every 4x4 mask.
Outcome mask_algebra() {
  Outcome o;
  const auto start = Clock::now();
  auto from_bits = [](std::uint32_t bits) {
    Mask m(4, 4);
    for (int i = 0; i < 16; ++i) m.set(static_cast<std::size_t>(i), ((bits >> i) & 1U) != 0);
    return m;
  };
  auto in_rect = [](std::uint32_t bits, int y, int x) {
    bool up = false, down = false, left = false, right = false;
    for (int i = 0; i < 16; ++i) {
      if (!((bits >> i) & 1U)) continue;
      up |= i / 4 <= y;
      down |= i / 4 >= y;
      left |= i % 4 <= x;
      right |= i % 4 >= x;
    }
    return up && down && left && right;
  };
  ImageBuffer bg(4, 4, 3), r1(4, 4, 3), r2(4, 4, 3);
  for (std::size_t i = 0; i < bg.size(); ++i) {
    bg[i] = 0.1 + 0.001 * static_cast<double>(i);
    r1[i] = 0.4 + 0.001 * static_cast<double>(i);
    r2[i] = 0.7 + 0.001 * static_cast<double>(i);
  }
  long mismatches = 0;
  for (std::uint32_t bits = 0; bits < 65536; ++bits) {
    const std::uint32_t other = ((bits << 5) | (bits >> 11)) & 0xFFFFU;
    const Mask a = from_bits(bits), b = from_bits(other);
    const Mask tot = total_mask({a, b});
    for (std::size_t q = 0; q < 16; ++q) mismatches += tot[q] != (a[q] || b[q]);
    if (bits != 0) {
      const Mask rect = bounding_rect(a);
      const Mask tran = transitional_mask({a});
      for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 4; ++x) {
          mismatches += rect.at(y, x) != in_rect(bits, y, x);
          mismatches += tran.at(y, x) != (in_rect(bits, y, x) && !a.at(y, x));
        }
      }
    }
    const CompositePlan plan{bg, {{r1, a}, {r2, b}}};
    if ((bits & other) != 0) {
      try {
        compose(plan);
        ++mismatches;
      } catch (const CompositionError&) {
      }
      continue;
    }
    const ImageBuffer out = compose(plan);
    for (int y = 0; y < 4; ++y) {
      for (int x = 0; x < 4; ++x) {
        const ImageBuffer& src = a.at(y, x) ? r1 : b.at(y, x) ? r2 : bg;
        for (int c = 0; c < 3; ++c) mismatches += out.at(y, x, c) != src.at(y, x, c);
      }
    }
  }
  const double secs = seconds_since(start);
  o.detail << " mismatches=" << mismatches << " time=" << secs << "s";
  o.check(mismatches == 0, "zero mismatches");
  o.check(secs < 10.0, "runtime < 10 s");
  return o;
}

// 5. Attention injection at the tau extremes and the tau sweep direction.
Outcome tau_extremes(const Demo& demo) {
  Outcome o;
  const Pipeline& p = demo.p;
  const auto global = p.global_colourise(demo.sketch, demo.palettes, demo.cfg.seed);
  std::vector<LocalRegion> regions;
  for (std::size_t i = 0; i < demo.masks.size(); ++i) regions.push_back({global.palettes[i].image, demo.masks[i]});
  const auto prep = p.prepare_local(demo.sketch, demo.palettes, global.auxiliary.image, regions, demo.cfg.seed);

  const SamplerConfig fin = p.final_sampler("cat");
  const LatentGrid injected0 = injected_sample(*prep.denoiser, prep.z_final_start, prep.tape, 0.0, fin).latent;
  const LatentGrid plain = sample(*prep.denoiser, prep.z_final_start, fin).latent;
  o.check(injected0 == plain, "tau=0 bitwise equals the plain run");

  const SketchSpec quad = quad_sketch(demo.cfg.width, demo.cfg.height);
  const Palette pal = Palette::from_hex({"#FFD700", "#228B22", "#4B0082", "#FF6347"});
  auto rect = [&](int y0, int y1, int x0, int x1) {
    Mask m(demo.cfg.width, demo.cfg.height);
    for (int y = y0; y < y1; ++y) {
      for (int x = x0; x < x1; ++x) m.set(y, x, true);
    }
    return m;
  };
  const ImageBuffer fg = p.regenerate(quad, pal, 2);
  const auto rect_res = p.local_colourise(quad, {pal, pal}, p.auxiliary(quad, 1).image,
                                          {{fg, rect(36, 56, 8, 28)}, {fg, rect(4, 20, 30, 60)}}, "cat", 1.0,
                                          demo.cfg.seed);
  o.check(rect_res.prepared.transitional.count() == 0, "rectangular masks give an empty transitional mask");
  o.check(rect_res.image == decode_latent(rect_res.prepared.reconstruction), "tau=1 bitwise equals the reconstruction");

  std::vector<double> taus;
  for (int i = 0; i <= 10; ++i) taus.push_back(i / 10.0);
  const auto rows = tau_sweep(p, prep, "cat", taus, demo.masks, demo.palettes);
  bool monotone = true;
  o.detail << " psnr(tau=0..1)=";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    o.detail << (i ? "," : "") << rows[i].psnr;
    if (i > 0 && rows[i].psnr < rows[i - 1].psnr) monotone = false;
  }
  o.check(monotone, "psnr non-decreasing in tau");
  return o;
}

// 6. Nearest-name lookup.
Outcome colour_naming() {
  Outcome o;
  const ColourDatabase& db = ColourDatabase::css3();
  const KdTree3& tree = css3_tree();
  Rng rng(2024);
  int mismatches = 0;
  for (int i = 0; i < 10000; ++i) {
    const Rgb q{static_cast<std::uint8_t>(rng.below(256)), static_cast<std::uint8_t>(rng.below(256)),
                static_cast<std::uint8_t>(rng.below(256))};
    // Linear scan; ties go to the alphabetically first name, the database order.
    const ColourEntry* best = nullptr;
    int best_d = 1 << 30;
    for (const auto& e : db.entries()) {
      const int d = squared_distance(q, e.rgb);
      if (d < best_d) {
        best_d = d;
        best = &e;
      }
    }
    mismatches += tree.nearest(q).name != best->name;
  }
  const std::string gold = nearest_name(tree, parse_hex("#FFD700")).name;
  o.detail << " mismatches=" << mismatches << " #FFD700=" << gold << " entries=" << db.size();
  o.check(mismatches == 0, "K-D tree equals linear scan");
  o.check(gold == "gold", "#FFD700 -> gold");
  o.check(db.size() == 147, "147 entries");
  return o;
}

// 7. Global-stage palette fidelity on a 4-region label map.
Outcome palette_fidelity() {
  Outcome o;
  const Config cfg;
  const Pipeline p(cfg);
  const SketchSpec sk = quad_sketch(cfg.width, cfg.height);
  const Palette pal = Palette::from_hex({"#FFD700", "#228B22", "#4B0082", "#FF6347"});
  int passing = 0;
  o.detail << " worst_linf_per_seed=";
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed);
    const auto got = extract_palette(p.regenerate(sk, pal, seed), nullptr, 4, rng).palette;
    int worst = 0;
    for (Rgb c : got.colours) {
      int best = 256;
      for (Rgb q : pal.colours) best = std::min(best, std::max({std::abs(c.r - q.r), std::abs(c.g - q.g), std::abs(c.b - q.b)}));
      worst = std::max(worst, best);
    }
    o.detail << (seed > 1 ? "," : "") << worst;
    passing += worst <= kPaletteLinf;
  }
  o.detail << " passing=" << passing << "/10";
  o.check(passing >= kPaletteSeedsRequired, ">= 9 of 10 seeds within L-inf 24");
  return o;
}

// 8. Shipped defaults and templates, config-print against the golden file.
Outcome defaults() {
  Outcome o;
  const Config shipped = load_config(kSource / "config/default.json");
  o.check(shipped.cfg_scale == 2.5, "cfg_scale 2.5");
  o.check(shipped.tau == 0.4, "tau 0.4");
  o.check(shipped.steps == 20, "20 steps");
  const std::vector<std::string> names = {"red", "darkorange"};
  const PromptPair pp = assemble_prompt("cat", names);
  o.check(pp.positive ==
              "cat, hyper-realistic, quality, photography style, using only colours in colour palette of red - darkorange",
          "positive template");
  o.check(pp.negative ==
              "drawing look, sketch look, line art style, cartoon look, unnatural colour, unnatural texture, "
              "unrealistic look, low-quality",
          "negative template");
  o.check(local_prompt("cat") == "hyper-realistic cat in photography style", "local template");
  const fs::path dir = fresh_dir("config");
  const int code = run_cli("config-print", dir / "printed.txt");
  o.check(code == 0, "config-print exits 0");
  o.check(slurp(dir / "printed.txt") == slurp(kSource / "tests/golden/config_print.txt"), "config-print equals golden");
  o.detail << " cfg_scale=" << shipped.cfg_scale << " tau=" << shipped.tau << " steps=" << shipped.steps;
  return o;
}

// 9. Two colourise runs give byte-identical trees.
Outcome determinism() {
  Outcome o;
  const fs::path dir = fresh_dir("determinism");
  const int a = run_cli("colourise '" + kDemoJob.string() + "' --out '" + (dir / "a").string() + "'", dir / "a.log");
  const int b = run_cli("colourise '" + kDemoJob.string() + "' --out '" + (dir / "b").string() + "'", dir / "b.log");
  o.check(a == 0 && b == 0, "both runs exit 0");
  auto files = [](const fs::path& root) {
    std::map<std::string, std::string> out;
    if (!fs::exists(root)) return out;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
      if (e.is_regular_file()) out[fs::relative(e.path(), root).generic_string()] = slurp(e.path());
    }
    return out;
  };
  const auto ta = files(dir / "a");
  const auto tb = files(dir / "b");
  o.detail << " files=" << ta.size();
  o.check(!ta.empty() && ta == tb, "identical trees");
  return o;
}

// 10. Metric identities.
Outcome metrics() {
  Outcome o;
  Rng rng(10);
  ImageBuffer x(20, 17, 3), base(16, 16, 3), shifted(16, 16, 3);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform();
  for (std::size_t i = 0; i < base.size(); ++i) {
    base[i] = 0.9 * rng.uniform();
    shifted[i] = base[i] + 0.1;
  }
  const double s = ssim(x, x);
  const double db = psnr(base, shifted);
  o.check(s == 1.0, "ssim(x,x) = 1 exactly");
  o.check(std::abs(db - 20.0) <= 1e-6, "psnr of +0.1 offset = 20 dB");
  ImageBuffer img(24, 24, 3);
  for (std::size_t i = 0; i < img.size(); ++i) img[i] = rng.uniform();
  Rng krng(0);
  const double own = palette_distance(img, extract_palette(img, nullptr, 4, krng).palette);
  int beaten = 0;
  for (int i = 0; i < 100; ++i) {
    Palette rand;
    for (int k = 0; k < 4; ++k) {
      rand.colours.push_back({static_cast<std::uint8_t>(rng.below(256)), static_cast<std::uint8_t>(rng.below(256)),
                              static_cast<std::uint8_t>(rng.below(256))});
    }
    beaten += palette_distance(img, rand) < own;
  }
  o.detail << " ssim=" << s << " psnr=" << db << " own_distance=" << own << " random_better=" << beaten;
  o.check(beaten == 0, "extracted palette minimal among 100 random palettes");
  return o;
}

}  // namespace

int main() {
  const Demo demo;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"solver order", solver_order},
      {"inversion fidelity", [&] { return inversion_fidelity(demo); }},
      {"exceptional-prompt neutrality", neutrality},
      {"mask algebra", mask_algebra},
      {"tau extremes", [&] { return tau_extremes(demo); }},
      {"colour naming", colour_naming},
      {"palette fidelity", palette_fidelity},
      {"defaults conformance", defaults},
      {"determinism", determinism},
      {"metrics", metrics},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    failures += !o.pass;
    std::printf("%s criterion %zu (%s):%s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(),
                o.detail.str().c_str());
  }
  std::printf("%s: %zu/%zu criteria passed\n", failures ? "FAIL" : "PASS", criteria.size() - failures, criteria.size());
  return failures ? 1 : 0;
}
