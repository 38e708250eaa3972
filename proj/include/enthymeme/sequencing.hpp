#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace enthymeme::sequencing {

inline constexpr std::string_view kDelimiter = "[SEP]";
inline constexpr std::string_view kDefaultMask = "[MASK]";
inline constexpr std::string_view kMarker = "And since";

enum class InputSetting { kPlain, kKnowledge, kZeroShot };

std::string_view to_string(InputSetting s);

struct EncoderInput {
  std::string text;
  InputSetting setting = InputSetting::kPlain;
};

struct DecoderTarget {
  std::string text;
};

struct Extraction {
  std::string premise;
  // True when no sentence carried the marker and the fallback rule picked one.
  bool fallback = false;
};

/// Rule-based sentence splitter. Splits after '.', '!' or '?' (optionally
/// followed by closing quotes/brackets) when the next non-space character is
/// an uppercase letter or digit, unless the token is a known abbreviation.
/// Whitespace is normalized first, so joining the output with single spaces
/// reproduces the normalized input.
std::vector<std::string> split_sentences(std::string_view text);

/// `first [SEP] second`, or `first [SEP] phrase [SEP] second` when a knowledge
/// phrase is supplied. Throws ValidationError on empty parts or a stray delimiter.
EncoderInput build_encoder_input(std::string_view first, std::string_view second,
                                 std::optional<std::string_view> knowledge_phrase = std::nullopt);

/// `first And since <hypothesis>. second`. The hypothesis initial is lowercased
/// unless the first word looks like a proper noun (see below).
DecoderTarget build_decoder_target(std::string_view first, std::string_view hypothesis,
                                   std::string_view second);

/// `premise. And since [MASK]. claim` with a configurable mask literal.
EncoderInput build_zero_shot_prompt(std::string_view premise, std::string_view claim,
                                    std::string_view mask_literal = kDefaultMask);

/// Recovers the implicit premise from a generated three-sentence argument.
/// `context` holds the stated premise and claim, used only by the fallback.
Extraction extract_implicit_premise(std::string_view generated_argument,
                                    const std::vector<std::string>& context = {});

// Exposed for tests: whether the first word of `hypothesis` keeps its case
// after the marker, given the surrounding sentences.
bool keeps_initial_case(std::string_view hypothesis, const std::vector<std::string_view>& context);

}  // namespace enthymeme::sequencing
