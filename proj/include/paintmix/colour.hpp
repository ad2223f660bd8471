#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include "paintmix/css3_table.hpp"
#include "paintmix/errors.hpp"

namespace paintmix {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  std::uint8_t operator[](int axis) const noexcept { return axis == 0 ? r : axis == 1 ? g : b; }
  friend auto operator<=>(const Rgb&, const Rgb&) = default;
};

inline int squared_distance(Rgb a, Rgb b) {
  const int dr = int{a.r} - b.r;
  const int dg = int{a.g} - b.g;
  const int db = int{a.b} - b.b;
  return dr * dr + dg * dg + db * db;
}

// Parses "#RRGGBB" (hex digits in either case).
inline Rgb parse_hex(std::string_view text) {
  auto fail = [&] { return ParseError("invalid hex colour '" + std::string(text) + "', expected #RRGGBB"); };
  if (text.size() != 7 || text[0] != '#') throw fail();
  auto nibble = [&](char ch) -> int {
    if (ch >= '0' && ch <= '9') return ch - '0';
    const char lower = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (lower >= 'a' && lower <= 'f') return lower - 'a' + 10;
    throw fail();
  };
  auto byte = [&](std::size_t i) { return static_cast<std::uint8_t>(nibble(text[i]) * 16 + nibble(text[i + 1])); };
  return Rgb{byte(1), byte(3), byte(5)};
}

inline std::string to_hex(Rgb c) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02X%02X%02X", c.r, c.g, c.b);
  return buf;
}

struct ColourEntry {
  std::string name;
  Rgb rgb;

  friend bool operator==(const ColourEntry&, const ColourEntry&) = default;
};

// The 147 CSS3 named colours, sorted by name.
class ColourDatabase {
 public:
  explicit ColourDatabase(std::vector<ColourEntry> entries) : entries_(std::move(entries)) {
    std::sort(entries_.begin(), entries_.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      if (entries_[i].name.empty()) throw ParseError("colour database: empty name");
      if (i > 0 && entries_[i].name == entries_[i - 1].name) {
        throw ParseError("colour database: duplicate name '" + entries_[i].name + "'");
      }
    }
  }

  static ColourDatabase from_csv(std::string_view csv) {
    std::vector<ColourEntry> out;
    std::size_t pos = 0;
    while (pos < csv.size()) {
      std::size_t end = csv.find('\n', pos);
      if (end == std::string_view::npos) end = csv.size();
      std::string_view line = csv.substr(pos, end - pos);
      pos = end + 1;
      if (line.empty()) continue;
      const auto comma = line.find(',');
      if (comma == std::string_view::npos) throw ParseError("colour database: malformed row '" + std::string(line) + "'");
      out.push_back({std::string(line.substr(0, comma)), parse_hex(line.substr(comma + 1))});
    }
    return ColourDatabase(std::move(out));
  }

  // Loads the embedded table and checks the row count.
  static const ColourDatabase& css3() {
    static const ColourDatabase db = [] {
      auto d = from_csv(kCss3ColourCsv);
      if (d.size() != kCss3ColourCount) {
        throw ParseError("embedded CSS3 table has " + std::to_string(d.size()) + " rows, expected 147");
      }
      return d;
    }();
    return db;
  }

  std::size_t size() const noexcept { return entries_.size(); }
  const std::vector<ColourEntry>& entries() const noexcept { return entries_; }
  const ColourEntry& operator[](std::size_t i) const { return entries_[i]; }

 private:
  std::vector<ColourEntry> entries_;
};

// 3-d tree over RGB. Median split, axis R -> G -> B by depth; equal keys go
// left of (or onto) the node, so left <= split < right on every node.
class KdTree3 {
 public:
  struct Node {
    ColourEntry entry;
    int axis = 0;
    int left = -1;
    int right = -1;
  };

  explicit KdTree3(const ColourDatabase& db) {
    std::vector<ColourEntry> items = db.entries();
    nodes_.reserve(items.size());
    root_ = build(items, 0);
  }

  std::size_t size() const noexcept { return nodes_.size(); }
  int root() const noexcept { return root_; }
  const Node& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }

  // Nearest entry by squared RGB distance; ties go to the smallest name.
  const ColourEntry& nearest(Rgb q) const {
    int best = -1;
    int best_d = 0;
    search(root_, q, best, best_d);
    return nodes_[static_cast<std::size_t>(best)].entry;
  }

  template <typename Fn>
  void in_order(Fn&& fn) const {
    visit(root_, fn);
  }

 private:
  int build(std::vector<ColourEntry>& items, int depth) {
    if (items.empty()) return -1;
    const int axis = depth % 3;
    std::sort(items.begin(), items.end(), [axis](const ColourEntry& a, const ColourEntry& b) {
      if (a.rgb[axis] != b.rgb[axis]) return a.rgb[axis] < b.rgb[axis];
      return a.name < b.name;
    });
    std::size_t mid = (items.size() - 1) / 2;
    while (mid + 1 < items.size() && items[mid + 1].rgb[axis] == items[mid].rgb[axis]) ++mid;

    std::vector<ColourEntry> lower(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(mid));
    std::vector<ColourEntry> upper(items.begin() + static_cast<std::ptrdiff_t>(mid) + 1, items.end());
    const int self = static_cast<int>(nodes_.size());
    nodes_.push_back({items[mid], axis, -1, -1});
    const int l = build(lower, depth + 1);
    const int r = build(upper, depth + 1);
    nodes_[static_cast<std::size_t>(self)].left = l;
    nodes_[static_cast<std::size_t>(self)].right = r;
    return self;
  }

  void search(int idx, Rgb q, int& best, int& best_d) const {
    if (idx < 0) return;
    const Node& n = nodes_[static_cast<std::size_t>(idx)];
    const int d = squared_distance(q, n.entry.rgb);
    if (best < 0 || d < best_d || (d == best_d && n.entry.name < nodes_[static_cast<std::size_t>(best)].entry.name)) {
      best = idx;
      best_d = d;
    }
    const int diff = int{q[n.axis]} - n.entry.rgb[n.axis];
    const int near = diff <= 0 ? n.left : n.right;
    const int far = diff <= 0 ? n.right : n.left;
    search(near, q, best, best_d);
    // <= keeps equal-distance candidates reachable for the name tie-break.
    if (diff * diff <= best_d) search(far, q, best, best_d);
  }

  template <typename Fn>
  void visit(int idx, Fn& fn) const {
    if (idx < 0) return;
    const Node& n = nodes_[static_cast<std::size_t>(idx)];
    visit(n.left, fn);
    fn(n);
    visit(n.right, fn);
  }

  std::vector<Node> nodes_;
  int root_ = -1;
};

inline const KdTree3& css3_tree() {
  static const KdTree3 tree(ColourDatabase::css3());
  return tree;
}

inline const ColourEntry& nearest_name(const KdTree3& tree, Rgb rgb) { return tree.nearest(rgb); }

}  // namespace paintmix
