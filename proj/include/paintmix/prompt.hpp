#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "paintmix/errors.hpp"

namespace paintmix {

inline constexpr std::string_view kPositiveSuffix = ", hyper-realistic, quality, photography style";
inline constexpr std::string_view kPaletteClause = ", using only colours in colour palette of ";
inline constexpr std::string_view kColourSeparator = " - ";
inline constexpr std::string_view kNegativePrompt =
    "drawing look, sketch look, line art style, cartoon look, unnatural colour, unnatural texture, "
    "unrealistic look, low-quality";

struct PromptPair {
  std::string positive;
  std::string negative;

  friend bool operator==(const PromptPair&, const PromptPair&) = default;
};

// "[class], hyper-realistic, quality, photography style, using only colours in
// colour palette of c1 - c2 - ... cn". With no colour names the palette clause
// is dropped (auxiliary, colour-free prompt).
inline PromptPair assemble_prompt(std::string_view class_label, std::span<const std::string> names) {
  if (class_label.empty()) throw ParseError("assemble_prompt: empty class label");
  std::string positive(class_label);
  positive += kPositiveSuffix;
  if (!names.empty()) {
    positive += kPaletteClause;
    for (std::size_t i = 0; i < names.size(); ++i) {
      if (i > 0) positive += kColourSeparator;
      positive += names[i];
    }
  }
  return {std::move(positive), std::string(kNegativePrompt)};
}

// Prompt used for the final guided sampling of the local stage.
inline std::string local_prompt(std::string_view class_label) {
  return "hyper-realistic " + std::string(class_label) + " in photography style";
}

}  // namespace paintmix
