#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "paintmix/colour.hpp"
#include "paintmix/prompt.hpp"
#include "paintmix/rng.hpp"

namespace paintmix {

enum class EmbeddingKind { normal, null, exceptional };

inline const char* to_string(EmbeddingKind k) {
  switch (k) {
    case EmbeddingKind::normal: return "normal";
    case EmbeddingKind::null: return "null";
    case EmbeddingKind::exceptional: return "exceptional";
  }
  return "?";
}

// Token-by-feature matrix produced by the toy text encoder.
struct PromptEmbedding {
  int tokens = 0;
  int dim = 0;
  std::vector<double> data;  // row-major tokens x dim
  EmbeddingKind kind = EmbeddingKind::normal;

  double at(int row, int col) const { return data[static_cast<std::size_t>(row) * dim + col]; }

  std::vector<double> row(int r) const {
    return {data.begin() + static_cast<std::ptrdiff_t>(r) * dim,
            data.begin() + static_cast<std::ptrdiff_t>(r + 1) * dim};
  }

  std::vector<double> mean_pooled() const {
    std::vector<double> out(static_cast<std::size_t>(dim), 0.0);
    for (int r = 0; r < tokens; ++r) {
      for (int c = 0; c < dim; ++c) out[static_cast<std::size_t>(c)] += at(r, c);
    }
    for (auto& v : out) v /= tokens;
    return out;
  }

  friend bool operator==(const PromptEmbedding&, const PromptEmbedding&) = default;
};

struct TextEncoderConfig {
  int tokens = 32;
  int dim = 16;
  std::uint64_t seed = 7;
};

// Toy stand-in for a CLIP text encoder: word-level vocabulary, random token
// and positional tables, explicit start/end/pad tokens.
//
// The shared "common" token embedding is the first basis vector. Every other
// table entry is Gaussian; conditioning keys that leave coordinate 0 at zero
// are therefore blind to the exceptional embedding.
class ToyTextEncoder {
 public:
  static constexpr int kStart = 0;
  static constexpr int kEnd = 1;
  static constexpr int kPad = 2;
  static constexpr int kUnk = 3;
  static constexpr int kCommon = 4;

  explicit ToyTextEncoder(TextEncoderConfig cfg = {}) : cfg_(cfg) {
    if (cfg_.tokens < 2 || cfg_.dim < 2) throw ParseError("text encoder needs >= 2 tokens and >= 2 dims");
    for (const auto& e : ColourDatabase::css3().entries()) add_word(e.name);
    for (std::string_view text : {kPositiveSuffix, kPaletteClause, kNegativePrompt, std::string_view("hyper-realistic in photography style")}) {
      for (const auto& w : tokenize(text)) add_word(w);
    }
    for (std::string_view w : kClassWords) add_word(std::string(w));

    const int vocab = kCommon + 1 + static_cast<int>(words_.size());
    token_table_.resize(static_cast<std::size_t>(vocab) * cfg_.dim);
    for (int id = 0; id < vocab; ++id) {
      Rng rng(derive_seed(cfg_.seed, static_cast<std::uint64_t>(id)));
      for (int c = 0; c < cfg_.dim; ++c) token_table_[idx(id, c)] = rng.normal();
    }
    for (int c = 0; c < cfg_.dim; ++c) token_table_[idx(kCommon, c)] = c == 0 ? 1.0 : 0.0;

    position_table_.resize(static_cast<std::size_t>(cfg_.tokens) * cfg_.dim);
    for (int r = 0; r < cfg_.tokens; ++r) {
      Rng rng(derive_seed(cfg_.seed ^ 0x5A5A5A5AULL, static_cast<std::uint64_t>(r)));
      for (int c = 0; c < cfg_.dim; ++c) position_table_[static_cast<std::size_t>(r) * cfg_.dim + c] = 0.5 * rng.normal();
    }
  }

  const TextEncoderConfig& config() const noexcept { return cfg_; }
  int dim() const noexcept { return cfg_.dim; }
  int vocabulary_size() const noexcept { return kCommon + 1 + static_cast<int>(words_.size()); }

  // Lower-cases and splits on anything that is not a letter or digit.
  static std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
      const auto u = static_cast<unsigned char>(ch);
      if (std::isalnum(u)) {
        cur.push_back(static_cast<char>(std::tolower(u)));
      } else if (!cur.empty()) {
        out.push_back(std::move(cur));
        cur.clear();
      }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
  }

  int token_id(const std::string& word) const {
    auto it = words_.find(word);
    return it == words_.end() ? kUnk : it->second;
  }

  std::vector<double> token_embedding(int id) const {
    return {token_table_.begin() + static_cast<std::ptrdiff_t>(idx(id, 0)),
            token_table_.begin() + static_cast<std::ptrdiff_t>(idx(id, 0) + cfg_.dim)};
  }

  std::vector<int> token_ids(std::string_view prompt) const {
    std::vector<int> ids{kStart};
    for (const auto& w : tokenize(prompt)) {
      if (static_cast<int>(ids.size()) >= cfg_.tokens - 1) break;
      ids.push_back(token_id(w));
    }
    ids.push_back(kEnd);
    while (static_cast<int>(ids.size()) < cfg_.tokens) ids.push_back(kPad);
    return ids;
  }

  // start + words + end + pads, each row = token + positional embedding.
  PromptEmbedding encode(std::string_view prompt) const {
    const auto ids = token_ids(prompt);
    PromptEmbedding e{cfg_.tokens, cfg_.dim, std::vector<double>(static_cast<std::size_t>(cfg_.tokens) * cfg_.dim),
                      prompt.empty() ? EmbeddingKind::null : EmbeddingKind::normal};
    for (int r = 0; r < cfg_.tokens; ++r) {
      for (int c = 0; c < cfg_.dim; ++c) {
        e.data[static_cast<std::size_t>(r) * cfg_.dim + c] =
            token_table_[idx(ids[static_cast<std::size_t>(r)], c)] + position_table_[static_cast<std::size_t>(r) * cfg_.dim + c];
      }
    }
    return e;
  }

  PromptEmbedding null_embedding() const { return encode(""); }

  // Every row is the common token; no positional rows and no special tokens.
  PromptEmbedding exceptional() const {
    PromptEmbedding e{cfg_.tokens, cfg_.dim, std::vector<double>(static_cast<std::size_t>(cfg_.tokens) * cfg_.dim),
                      EmbeddingKind::exceptional};
    for (int r = 0; r < cfg_.tokens; ++r) {
      for (int c = 0; c < cfg_.dim; ++c) e.data[static_cast<std::size_t>(r) * cfg_.dim + c] = token_table_[idx(kCommon, c)];
    }
    return e;
  }

 private:
  static constexpr std::string_view kClassWords[] = {
      "object", "cat", "dog", "bird", "cow", "horse", "sheep", "car", "bus", "house", "building", "tree",
      "flower", "person", "face", "chair", "boat", "airplane", "bottle", "bicycle", "train", "landscape"};

  void add_word(const std::string& w) {
    if (words_.count(w)) return;
    const int id = kCommon + 1 + static_cast<int>(words_.size());
    words_.emplace(w, id);
  }

  std::size_t idx(int id, int c) const { return static_cast<std::size_t>(id) * cfg_.dim + c; }

  TextEncoderConfig cfg_;
  std::map<std::string, int> words_;
  std::vector<double> token_table_;
  std::vector<double> position_table_;
};

}  // namespace paintmix
