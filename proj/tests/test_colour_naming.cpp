#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <map>
#include <set>

#include "paintmix/colour.hpp"
#include "paintmix/palette.hpp"
#include "paintmix/prompt.hpp"
#include "test_util.hpp"

using namespace paintmix;

namespace {

// Linear-scan oracle: minimal squared distance, ties to the smallest name.
const ColourEntry& linear_nearest(Rgb q) {
  const auto& db = ColourDatabase::css3();
  const ColourEntry* best = nullptr;
  int best_d = 0;
  for (const auto& e : db.entries()) {
    const int d = squared_distance(e.rgb, q);
    if (!best || d < best_d || (d == best_d && e.name < best->name)) {
      best = &e;
      best_d = d;
    }
  }
  return *best;
}

double objective(const std::vector<Point3>& pts, const std::vector<Point3>& centroids) {
  double total = 0.0;
  for (const auto& p : pts) {
    double best = squared_distance(p, centroids[0]);
    for (const auto& c : centroids) best = std::min(best, squared_distance(p, c));
    total += best;
  }
  return total;
}

}  // namespace

TEST(ParseHex, Examples) {
  EXPECT_EQ(parse_hex("#FFD700"), (Rgb{255, 215, 0}));
  EXPECT_EQ(parse_hex("#ffd700"), (Rgb{255, 215, 0}));
  EXPECT_EQ(parse_hex("#000000"), (Rgb{0, 0, 0}));
  EXPECT_EQ(to_hex(Rgb{255, 215, 0}), "#FFD700");
}

TEST(ParseHex, ErrorsNameTheInput) {
  for (const char* bad : {"#GG0000", "FFD700", "#FFD70", "#FFD7000", "", "#"}) {
    try {
      parse_hex(bad);
      FAIL() << bad;
    } catch (const ParseError& e) {
      EXPECT_NE(std::string(e.what()).find(std::string("'") + bad + "'"), std::string::npos) << e.what();
    }
  }
}

TEST(ColourDatabase, Has147SortedUniqueEntries) {
  const auto& db = ColourDatabase::css3();
  ASSERT_EQ(db.size(), 147u);
  for (std::size_t i = 1; i < db.size(); ++i) EXPECT_LT(db[i - 1].name, db[i].name);
  for (const auto& e : db.entries()) EXPECT_FALSE(e.name.empty());
}

TEST(ColourDatabase, RejectsDuplicateAndEmptyNames) {
  EXPECT_THROW(ColourDatabase::from_csv("red,#FF0000\nred,#FE0000\n"), ParseError);
  EXPECT_THROW(ColourDatabase::from_csv(",#FF0000\n"), ParseError);
  EXPECT_THROW(ColourDatabase::from_csv("red #FF0000\n"), ParseError);
}

TEST(KdTree, ContainsEveryEntryOnce) {
  const auto& tree = css3_tree();
  EXPECT_EQ(tree.size(), 147u);
  std::vector<ColourEntry> seen;
  tree.in_order([&](const KdTree3::Node& n) { seen.push_back(n.entry); });
  std::sort(seen.begin(), seen.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
  EXPECT_EQ(seen, ColourDatabase::css3().entries());
}

TEST(KdTree, SplitInvariantOnEveryNode) {
  const auto& tree = css3_tree();
  // Collect each subtree's entries and check them against the node's split.
  std::function<void(int, std::vector<Rgb>&)> collect = [&](int idx, std::vector<Rgb>& out) {
    if (idx < 0) return;
    out.push_back(tree.node(idx).entry.rgb);
    collect(tree.node(idx).left, out);
    collect(tree.node(idx).right, out);
  };
  std::function<void(int, int)> check = [&](int idx, int depth) {
    if (idx < 0) return;
    const auto& n = tree.node(idx);
    EXPECT_EQ(n.axis, depth % 3);
    const int split = n.entry.rgb[n.axis];
    std::vector<Rgb> left, right;
    collect(n.left, left);
    collect(n.right, right);
    for (Rgb c : left) EXPECT_LE(c[n.axis], split);
    for (Rgb c : right) EXPECT_GT(c[n.axis], split);
    check(n.left, depth + 1);
    check(n.right, depth + 1);
  };
  check(tree.root(), 0);
}

TEST(KdTree, SingleEntryIsRootOnly) {
  const ColourDatabase db({{"only", {1, 2, 3}}});
  const KdTree3 tree(db);
  ASSERT_EQ(tree.size(), 1u);
  EXPECT_EQ(tree.node(tree.root()).left, -1);
  EXPECT_EQ(tree.node(tree.root()).right, -1);
  EXPECT_EQ(tree.nearest({200, 200, 200}).name, "only");
}

TEST(NearestName, Gold) { EXPECT_EQ(nearest_name(css3_tree(), parse_hex("#FFD700")).name, "gold"); }

TEST(NearestName, MatchesLinearScanOn10kSeededSamples) {
  Rng rng(20240611);
  int mismatches = 0;
  for (int i = 0; i < 10000; ++i) {
    const Rgb q{static_cast<std::uint8_t>(rng.below(256)), static_cast<std::uint8_t>(rng.below(256)),
                static_cast<std::uint8_t>(rng.below(256))};
    if (!(nearest_name(css3_tree(), q) == linear_nearest(q))) ++mismatches;
  }
  EXPECT_EQ(mismatches, 0);
}

TEST(NearestName, DatabaseColoursMapToThemselvesUpToDuplicateRgb) {
  const auto& db = ColourDatabase::css3();
  std::map<Rgb, std::string> smallest;
  for (const auto& e : db.entries()) {
    auto it = smallest.find(e.rgb);
    if (it == smallest.end() || e.name < it->second) smallest[e.rgb] = e.name;
  }
  int unique_hits = 0;
  for (const auto& e : db.entries()) {
    const auto& hit = nearest_name(css3_tree(), e.rgb);
    EXPECT_EQ(hit.rgb, e.rgb);
    EXPECT_EQ(hit.name, smallest[e.rgb]);
    if (hit.name == e.name) ++unique_hits;
  }
  // Several CSS3 names share an RGB value (aqua/cyan, gray/grey, ...).
  EXPECT_EQ(nearest_name(css3_tree(), parse_hex("#00FFFF")).name, "aqua");
  EXPECT_EQ(nearest_name(css3_tree(), parse_hex("#FF00FF")).name, "fuchsia");
  EXPECT_EQ(unique_hits, static_cast<int>(smallest.size()));
}

TEST(Prompt, TemplateWithColours) {
  const std::vector<std::string> names = {"gold", "navy"};
  const auto p = assemble_prompt("cat", names);
  EXPECT_EQ(p.positive,
            "cat, hyper-realistic, quality, photography style, using only colours in colour palette of gold - navy");
  EXPECT_EQ(p.negative,
            "drawing look, sketch look, line art style, cartoon look, unnatural colour, unnatural texture, "
            "unrealistic look, low-quality");
}

TEST(Prompt, AuxiliaryDropsColourClause) {
  EXPECT_EQ(assemble_prompt("cat", {}).positive, "cat, hyper-realistic, quality, photography style");
  EXPECT_THROW(assemble_prompt("", {}), ParseError);
}

TEST(Prompt, DeterministicAndInjective) {
  std::set<std::string> seen;
  const std::vector<std::vector<std::string>> lists = {{}, {"gold"}, {"navy"}, {"gold", "navy"}, {"navy", "gold"}};
  for (const char* cls : {"cat", "dog", "bird"}) {
    for (const auto& names : lists) {
      const auto a = assemble_prompt(cls, names);
      EXPECT_EQ(a, assemble_prompt(cls, names));
      EXPECT_TRUE(seen.insert(a.positive).second) << a.positive;
    }
  }
}

TEST(ExtractPalette, TwoSolidHalves) {
  ImageBuffer img(8, 8, 3, 0.0);
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 8; ++x) (x < 4 ? img.at(y, x, 0) : img.at(y, x, 2)) = 1.0;
  }
  Rng rng(1);
  const auto res = extract_palette(img, nullptr, 2, rng);
  EXPECT_FALSE(res.padded);
  const std::set<Rgb> got(res.palette.colours.begin(), res.palette.colours.end());
  EXPECT_EQ(got, (std::set<Rgb>{{255, 0, 0}, {0, 0, 255}}));
}

TEST(ExtractPalette, UniformImageK1) {
  Rng rng(1);
  const auto res = extract_palette(ImageBuffer(5, 5, 3, 0.2), nullptr, 1, rng);
  ASSERT_EQ(res.palette.size(), 1u);
  EXPECT_EQ(res.palette.colours[0], (Rgb{51, 51, 51}));
}

TEST(ExtractPalette, TooFewDistinctColoursIsPaddedAndFlagged) {
  ImageBuffer img(4, 4, 3, 0.0);
  for (int x = 0; x < 4; ++x) img.at(0, x, 1) = 1.0;
  Rng rng(1);
  const auto res = extract_palette(img, nullptr, 4, rng);
  EXPECT_TRUE(res.padded);
  EXPECT_EQ(res.palette.size(), 4u);
  const std::set<Rgb> got(res.palette.colours.begin(), res.palette.colours.end());
  EXPECT_EQ(got, (std::set<Rgb>{{0, 0, 0}, {0, 255, 0}}));
}

TEST(ExtractPalette, MaskSelectsPixels) {
  ImageBuffer img(4, 4, 3, 0.0);
  Mask m(4, 4);
  for (int x = 0; x < 4; ++x) {
    img.at(1, x, 0) = 1.0;
    m.set(1, x, true);
  }
  Rng rng(3);
  EXPECT_EQ(extract_palette(img, &m, 1, rng).palette.colours[0], (Rgb{255, 0, 0}));
  Mask small(4, 4);
  small.set(0, 0, true);
  EXPECT_THROW(extract_palette(img, &small, 2, rng), DimensionError);
  EXPECT_THROW(extract_palette(img, nullptr, 9, rng), ParseError);
}

TEST(ExtractPalette, SeededMosaicRecoversGeneratingColours) {
  const std::vector<Rgb> gen = {{200, 30, 30}, {20, 160, 40}, {30, 40, 210}, {230, 220, 60}};
  Rng rng(77);
  ImageBuffer img(32, 32, 3);
  for (int y = 0; y < 32; ++y) {
    for (int x = 0; x < 32; ++x) {
      const Rgb c = gen[static_cast<std::size_t>((y / 8 + x / 8) % 4)];
      for (int a = 0; a < 3; ++a) {
        const double jitter = static_cast<double>(rng.below(5)) - 2.0;
        img.at(y, x, a) = (c[a] + jitter) / 255.0;
      }
    }
  }
  Rng krng(5);
  const auto res = extract_palette(img, nullptr, 4, krng);
  for (Rgb c : res.palette.colours) {
    int best = 256;
    for (Rgb g : gen) {
      best = std::min(best, std::max({std::abs(c.r - g.r), std::abs(c.g - g.g), std::abs(c.b - g.b)}));
    }
    EXPECT_LE(best, 2) << to_hex(c);
  }
  // Equal cluster sizes, so the order falls back to RGB.
  EXPECT_TRUE(std::is_sorted(res.palette.colours.begin(), res.palette.colours.end()));
}

TEST(KMeans, ObjectiveNonIncreasingAndBounded) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const ImageBuffer img = testutil::random_image(12, 12, seed);
    const auto pts = image_points(img, nullptr);
    Rng rng(seed);
    const auto res = kmeans(pts, 4, rng);
    EXPECT_LE(res.iterations, 100);
    for (std::size_t i = 1; i < res.objective.size(); ++i) {
      EXPECT_LE(res.objective[i], res.objective[i - 1] * (1 + 1e-12));
    }
    EXPECT_NEAR(objective(pts, res.centroids), res.objective.back(), 1e-6 * res.objective.back());
  }
}

TEST(KMeans, DeterministicForSeed) {
  const auto pts = image_points(testutil::random_image(10, 10, 8), nullptr);
  Rng a(4), b(4);
  EXPECT_EQ(kmeans(pts, 3, a).centroids, kmeans(pts, 3, b).centroids);
}

TEST(Palette, ValidatesLength) {
  EXPECT_THROW(Palette::from_hex({}), ParseError);
  EXPECT_THROW(Palette::from_hex(std::vector<std::string>(9, "#000000")), ParseError);
  EXPECT_EQ(Palette::from_hex({"#FFD700"}).size(), 1u);
  EXPECT_EQ(colour_names(css3_tree(), Palette::from_hex({"#FFD700", "#000080"})),
            (std::vector<std::string>{"gold", "navy"}));
}
