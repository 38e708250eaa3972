#include <doctest.h>

#include <random>

#include "enthymeme/error.hpp"
#include "enthymeme/sequencing.hpp"
#include "enthymeme/text.hpp"

using namespace enthymeme;
using namespace enthymeme::sequencing;

namespace {

const std::string kO1 = "Amy was looking through her mother's old scrapbooks.";
const std::string kO2 = "Amy realized her mother had dated her history professor.";
const std::string kHyp = "Amy found pictures of her history professor and mother together";

}  // namespace

TEST_CASE("reference encoder and decoder sequences") {
  CHECK(build_encoder_input(kO1, kO2).text ==
        "Amy was looking through her mother's old scrapbooks. [SEP] Amy realized her mother had dated her "
        "history professor.");
  CHECK(build_encoder_input(kO1, kO2).setting == InputSetting::kPlain);

  const auto row2 = build_encoder_input(kO1, kO2, "to find something");
  CHECK(row2.text ==
        "Amy was looking through her mother's old scrapbooks. [SEP] to find something [SEP] Amy realized her "
        "mother had dated her history professor.");
  CHECK(row2.setting == InputSetting::kKnowledge);

  CHECK(build_decoder_target(kO1, kHyp, kO2).text ==
        "Amy was looking through her mother's old scrapbooks. And since Amy found pictures of her history "
        "professor and mother together. Amy realized her mother had dated her history professor.");
}

TEST_CASE("encoder input shapes") {
  CHECK(build_encoder_input("A.", "B.").text == "A. [SEP] B.");
  CHECK(build_encoder_input("  A. ", " B.  ").text == "A. [SEP] B.");
  CHECK(text::count_occurrences(build_encoder_input("A.", "B.", "p").text, "[SEP]") == 2);
  CHECK_THROWS_AS(build_encoder_input("A.", "B.", "x [SEP] y"), ValidationError);
  CHECK_THROWS_AS(build_encoder_input("", "B."), ValidationError);
  CHECK_THROWS_AS(build_encoder_input("A.", "B.", "  "), ValidationError);
}

TEST_CASE("decoder target") {
  CHECK(build_decoder_target("A.", "b holds", "C.").text == "A. And since b holds. C.");
  CHECK(build_decoder_target("A.", "The key was lost.", "C.").text == "A. And since the key was lost. C.");
  CHECK_THROWS_AS(build_decoder_target("A.", "And since b holds", "C."), ValidationError);
  CHECK_THROWS_AS(build_decoder_target("A.", "", "C."), ValidationError);
  const auto t = build_decoder_target("A.", "b holds", "C.");
  const auto parts = split_sentences(t.text);
  REQUIRE(parts.size() == 3);
  CHECK(text::starts_with(parts[1], "And since "));
}

TEST_CASE("proper noun guard keeps names capitalized") {
  CHECK(keeps_initial_case("Amy found it", {kO1, kO2}));
  CHECK_FALSE(keeps_initial_case("The key was lost", {"The door was open."}));
  CHECK(keeps_initial_case("I was late", {}));
  CHECK(keeps_initial_case("NASA launched it", {}));
  CHECK_FALSE(keeps_initial_case("Bob ate", {"Nobody mentions him."}));
}

TEST_CASE("zero-shot prompt") {
  CHECK(build_zero_shot_prompt("Vaccinations save lives", "Vaccination should be mandatory for all children").text ==
        "Vaccinations save lives. And since [MASK]. Vaccination should be mandatory for all children");
  CHECK(build_zero_shot_prompt("A", "B").text == "A. And since [MASK]. B");
  CHECK(build_zero_shot_prompt("A!", "B").text == "A! And since [MASK]. B");
  CHECK(build_zero_shot_prompt("A", "B", "<mask>").text == "A. And since <mask>. B");
  CHECK(text::count_occurrences(build_zero_shot_prompt("A", "B").text, "[MASK]") == 1);
  CHECK_THROWS_AS(build_zero_shot_prompt("A [MASK]", "B"), ValidationError);
  CHECK_THROWS_AS(build_zero_shot_prompt("", "B"), ValidationError);
}

TEST_CASE("sentence splitting") {
  CHECK(split_sentences("A. B. C.") == std::vector<std::string>{"A.", "B.", "C."});
  CHECK(split_sentences("Dr. Smith left. He was tired.") == std::vector<std::string>{"Dr. Smith left.", "He was tired."});
  CHECK(split_sentences("").empty());
  CHECK(split_sentences("   ").empty());
  CHECK(split_sentences("He paid 3.5 dollars. It was cheap.").size() == 2);
  CHECK(split_sentences("Stop! \"Why?\" She left.") == std::vector<std::string>{"Stop!", "\"Why?\"", "She left."});
  CHECK(split_sentences("it ends. lowercase does not split.").size() == 1);
  CHECK(split_sentences("Born in 1990. 2000 was later.").size() == 2);

  const std::string messy = "  One  two.\nThree   four!  Five? ";
  const auto parts = split_sentences(messy);
  std::string joined;
  for (const auto& p : parts) joined += (joined.empty() ? "" : " ") + p;
  CHECK(joined == text::collapse_whitespace(messy));
  CHECK(split_sentences(joined) == parts);
}

TEST_CASE("extraction") {
  const auto row3 = build_decoder_target(kO1, kHyp, kO2).text;
  auto e = extract_implicit_premise(row3);
  CHECK(e.premise == "Amy found pictures of her history professor and mother together.");
  CHECK_FALSE(e.fallback);

  e = extract_implicit_premise("X. And since y holds. Z.");
  CHECK(e.premise == "Y holds.");
  CHECK_FALSE(e.fallback);

  e = extract_implicit_premise("X. Y. Z.");
  CHECK(e.premise == "Y.");
  CHECK(e.fallback);

  e = extract_implicit_premise("X. and since y holds. Z.");
  CHECK(e.premise == "Y holds.");

  // Repeated marker is stripped once per occurrence.
  e = extract_implicit_premise("X. And since and since y. Z.");
  CHECK(e.premise == "Y.");

  // Two sentences, no marker: the one least like the context wins.
  e = extract_implicit_premise("Cats purr loudly. Dogs bark at night.", {"Cats purr loudly.", "Pets are nice."});
  CHECK(e.premise == "Dogs bark at night.");
  CHECK(e.fallback);

  CHECK_THROWS_AS(extract_implicit_premise("   "), ValidationError);
}

TEST_CASE("round trip over randomized fixtures") {
  const std::vector<std::string> names = {"Amy", "Tom", "Sara", "Ben"};
  const std::vector<std::string> openers = {"the", "a", "my", "his", "her", "some", "every"};
  const std::vector<std::string> words = {"dog",  "found", "old",   "pictures", "went", "store", "quickly", "rain",
                                          "was",  "happy", "3",     "o'clock",  "red",  "car",   "friends", "ate",
                                          "city", "loud",  "music", "teacher's", "new", "job",   "late",    "school"};
  std::mt19937_64 rng(13);
  auto pick = [&](const std::vector<std::string>& v) { return v[rng() % v.size()]; };

  int failures = 0;
  for (int i = 0; i < 200; ++i) {
    const auto name = pick(names);
    std::string first = name + " " + pick(words) + " " + pick(words) + ".";
    std::string second = (rng() % 2 ? name : std::string("Then")) + " " + pick(words) + " " + pick(words);
    if (rng() % 2) second += ".";

    std::string h;
    switch (rng() % 4) {
      case 0: h = name; break;                   // proper noun from context
      case 1: h = "I"; break;
      case 2: h = pick(openers); break;
      default: h = text::upper_first_letter(pick(openers)); break;
    }
    const auto n = 2 + rng() % 6;
    for (std::size_t k = 0; k < n; ++k) h += (k == 2 && rng() % 3 == 0 ? ", " : " ") + pick(words);
    if (rng() % 3 == 0) h += ".";

    const auto target = build_decoder_target(first, h, second);
    const auto got = extract_implicit_premise(target.text, {first, second});
    std::string expected = text::upper_first_letter(h);
    if (expected.back() != '.') expected += ".";
    if (got.premise != expected || got.fallback) {
      ++failures;
      MESSAGE("mismatch: " << h << " -> " << got.premise);
    }
  }
  CHECK(failures == 0);
}
