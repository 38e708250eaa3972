#include "enthymeme/sequencing.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <set>

#include "enthymeme/error.hpp"
#include "enthymeme/text.hpp"

namespace enthymeme::sequencing {

namespace {

constexpr std::array<std::string_view, 28> kAbbreviations = {
    "dr.", "mr.", "mrs.", "ms.", "prof.", "st.", "jr.", "sr.", "vs.", "etc.",
    "e.g.", "i.e.", "u.s.", "u.k.", "no.", "inc.", "ltd.", "co.", "corp.", "mt.",
    "fig.", "gen.", "gov.", "sen.", "rep.", "approx.", "dept.", "capt."};

// Words that are capitalized only because they start a sentence.
const std::set<std::string, std::less<>> kClosedClass = {
    "a", "an", "the", "this", "that", "these", "those", "some", "any", "every", "each",
    "no", "all", "both", "many", "most", "much", "more", "few", "several", "other",
    "he", "she", "it", "they", "we", "you", "his", "her", "its", "their", "our", "your",
    "my", "him", "them", "us", "me", "there", "here", "then", "when", "while", "if",
    "because", "since", "so", "but", "and", "or", "as", "after", "before", "in", "on",
    "at", "to", "for", "of", "with", "by", "from", "about", "people", "someone",
    "everyone", "nobody", "something", "nothing", "everything", "one", "not", "also",
    "only", "just", "even", "still", "now", "what", "who", "which", "how", "why"};

bool is_terminal(char c) { return c == '.' || c == '!' || c == '?'; }
bool is_closer(char c) { return c == '"' || c == '\'' || c == ')' || c == ']'; }

bool is_abbreviation(std::string_view token) {
  const auto lower = text::to_lower(token);
  return std::find(kAbbreviations.begin(), kAbbreviations.end(), lower) != kAbbreviations.end();
}

std::string strip_terminal_punct(std::string s) {
  while (!s.empty() && (is_terminal(s.back()) || s.back() == ' ')) s.pop_back();
  return s;
}

std::string ensure_period(std::string s) {
  if (s.empty()) return s;
  if (!is_terminal(s.back())) s.push_back('.');
  return s;
}

std::string first_word(std::string_view s) {
  auto words = text::split_whitespace(s);
  if (words.empty()) return {};
  std::string w = words.front();
  while (!w.empty() && !std::isalnum(static_cast<unsigned char>(w.back()))) w.pop_back();
  return w;
}

std::set<std::string> lowered_token_set(std::string_view s) {
  std::set<std::string> out;
  for (auto& w : text::split_whitespace(s)) {
    std::string t;
    for (char c : w) {
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '\'') {
        t.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
      }
    }
    if (!t.empty()) out.insert(t);
  }
  return out;
}

bool has_marker_prefix(std::string_view sentence) {
  return text::to_lower(sentence.substr(0, kMarker.size() + 1)) == "and since ";
}

// Upper-case letter or digit, possibly behind an opening quote; a lower-case
// discourse marker also opens a sentence since decoders often drop the capital.
bool starts_sentence(std::string_view rest) {
  std::size_t k = 0;
  while (k < rest.size() && (rest[k] == '"' || rest[k] == '\'' || rest[k] == '(')) ++k;
  if (k >= rest.size()) return false;
  const auto c = static_cast<unsigned char>(rest[k]);
  if (std::isupper(c) || std::isdigit(c)) return true;
  return k == 0 && has_marker_prefix(rest);
}

std::string require_non_empty(std::string_view s, const char* what) {
  auto t = text::collapse_whitespace(s);
  if (t.empty()) throw ValidationError(std::string(what) + " must be non-empty");
  return t;
}

}  // namespace

std::string_view to_string(InputSetting s) {
  switch (s) {
    case InputSetting::kPlain: return "plain";
    case InputSetting::kKnowledge: return "knowledge";
    case InputSetting::kZeroShot: return "zero_shot";
  }
  return "plain";
}

std::vector<std::string> split_sentences(std::string_view input) {
  const std::string s = text::collapse_whitespace(input);
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!is_terminal(s[i])) continue;
    std::size_t end = i + 1;
    while (end < s.size() && (is_terminal(s[end]) || is_closer(s[end]))) ++end;
    if (end >= s.size() || s[end] != ' ' || end + 1 >= s.size()) {
      i = end - 1;
      continue;
    }
    if (!starts_sentence(std::string_view(s).substr(end + 1))) {
      i = end - 1;
      continue;
    }
    const auto token_start = s.rfind(' ', i);
    const auto tb = token_start == std::string::npos ? 0 : token_start + 1;
    if (is_abbreviation(std::string_view(s).substr(tb, i + 1 - tb))) {
      i = end - 1;
      continue;
    }
    out.push_back(s.substr(start, end - start));
    start = end + 1;
    i = end;
  }
  if (start < s.size()) out.push_back(s.substr(start));
  return out;
}

EncoderInput build_encoder_input(std::string_view first, std::string_view second,
                                 std::optional<std::string_view> knowledge_phrase) {
  const auto a = require_non_empty(first, "first sentence");
  const auto b = require_non_empty(second, "second sentence");
  if (a.find(kDelimiter) != std::string::npos || b.find(kDelimiter) != std::string::npos) {
    throw ValidationError("input sentence contains the delimiter literal");
  }
  const std::string sep = " " + std::string(kDelimiter) + " ";
  if (!knowledge_phrase) return {a + sep + b, InputSetting::kPlain};

  const auto phrase = require_non_empty(*knowledge_phrase, "knowledge phrase");
  if (phrase.find(kDelimiter) != std::string::npos) {
    throw ValidationError("knowledge phrase contains the delimiter literal");
  }
  return {a + sep + phrase + sep + b, InputSetting::kKnowledge};
}

bool keeps_initial_case(std::string_view hypothesis,
                        const std::vector<std::string_view>& context) {
  const auto w = first_word(hypothesis);
  if (w.empty()) return false;
  if (w == "I" || text::starts_with(w, "I'")) return true;
  const bool any_lower = std::any_of(w.begin(), w.end(), [](unsigned char c) { return std::islower(c); });
  const auto uppers = std::count_if(w.begin(), w.end(), [](unsigned char c) { return std::isupper(c); });
  if (!any_lower && uppers >= 2) return true;
  if (!std::isupper(static_cast<unsigned char>(w.front()))) return true;  // nothing to lower
  if (kClosedClass.count(text::to_lower(w)) != 0) return false;
  for (auto sentence : context) {
    for (const auto& tok : text::split_whitespace(sentence)) {
      std::string t = tok;
      while (!t.empty() && !std::isalnum(static_cast<unsigned char>(t.back()))) t.pop_back();
      if (t == w) return true;
    }
  }
  return false;
}

DecoderTarget build_decoder_target(std::string_view first, std::string_view hypothesis,
                                   std::string_view second) {
  const auto a = ensure_period(require_non_empty(first, "first sentence"));
  const auto c = require_non_empty(second, "second sentence");
  auto h = strip_terminal_punct(require_non_empty(hypothesis, "hypothesis"));
  if (h.empty()) throw ValidationError("hypothesis must contain text");
  if (has_marker_prefix(h + " ")) {
    throw ValidationError("hypothesis already starts with the discourse marker");
  }
  if (!keeps_initial_case(h, {a, c})) h = text::lower_first_letter(std::move(h));

  DecoderTarget target{a + " " + std::string(kMarker) + " " + h + ". " + c};
  const auto sentences = split_sentences(target.text);
  if (sentences.size() != 3 || !has_marker_prefix(sentences[1])) {
    throw ValidationError("decoder target does not split into three sentences: " + target.text);
  }
  return target;
}

EncoderInput build_zero_shot_prompt(std::string_view premise, std::string_view claim,
                                    std::string_view mask_literal) {
  const auto p = require_non_empty(premise, "premise");
  const auto c = require_non_empty(claim, "claim");
  if (mask_literal.empty()) throw ValidationError("mask literal must be non-empty");
  if (p.find(mask_literal) != std::string::npos || c.find(mask_literal) != std::string::npos) {
    throw ValidationError("premise or claim contains the mask literal");
  }
  return {ensure_period(p) + " " + std::string(kMarker) + " " + std::string(mask_literal) +
              ". " + c,
          InputSetting::kZeroShot};
}

Extraction extract_implicit_premise(std::string_view generated_argument,
                                    const std::vector<std::string>& context) {
  const auto sentences = split_sentences(generated_argument);
  if (sentences.empty()) throw ValidationError("generated argument is empty");

  auto finish = [](std::string s) {
    return ensure_period(text::upper_first_letter(text::trim(s)));
  };

  for (const auto& s : sentences) {
    if (has_marker_prefix(s)) {
      auto rest = text::trim(std::string_view(s).substr(kMarker.size() + 1));
      while (has_marker_prefix(rest)) rest = text::trim(std::string_view(rest).substr(kMarker.size() + 1));
      if (!rest.empty() && rest != ".") return {finish(rest), false};
    }
  }

  if (sentences.size() == 3) return {finish(sentences[1]), true};

  // Most novel sentence: least token overlap with the stated inputs. Without
  // explicit context the first and last output sentences stand in for them.
  std::set<std::string> ctx;
  if (!context.empty()) {
    for (const auto& c : context) ctx.merge(lowered_token_set(c));
  } else {
    ctx = lowered_token_set(sentences.front());
    ctx.merge(lowered_token_set(sentences.back()));
  }
  std::size_t best = 0;
  double best_overlap = 2.0;
  for (std::size_t i = 0; i < sentences.size(); ++i) {
    const auto toks = lowered_token_set(sentences[i]);
    if (toks.empty()) continue;
    const auto shared = std::count_if(toks.begin(), toks.end(),
                                      [&](const std::string& t) { return ctx.count(t) != 0; });
    const double overlap = static_cast<double>(shared) / static_cast<double>(toks.size());
    if (overlap < best_overlap) {
      best_overlap = overlap;
      best = i;
    }
  }
  return {finish(sentences[best]), true};
}

}  // namespace enthymeme::sequencing
