#include <doctest.h>

#include <numeric>

#include "enthymeme/corpus.hpp"
#include "enthymeme/error.hpp"
#include "enthymeme/text.hpp"
#include "support.hpp"

using namespace enthymeme;
using namespace enthymeme::corpus;

namespace {

std::size_t reason_sum(const CorpusStats& s) {
  return std::accumulate(s.filter_reasons.begin(), s.filter_reasons.end(), std::size_t{0},
                         [](std::size_t acc, const auto& kv) { return acc + kv.second; });
}

void check_invariants(const std::vector<Enthymeme>& records) {
  for (const auto& e : records) {
    CHECK(is_well_formed_sentence(e.stated_premise));
    CHECK(is_well_formed_sentence(e.stated_claim));
    CHECK_FALSE(e.gold_premises.empty());
    for (const auto& g : e.gold_premises) CHECK_FALSE(text::trim(g).empty());
    if (e.source != Source::kD3) CHECK_FALSE(e.scheme.has_value());
  }
}

}  // namespace

TEST_CASE("well-formedness heuristic") {
  CHECK(is_well_formed_sentence("Vaccinations save lives"));
  CHECK(is_well_formed_sentence("Vaccination should be mandatory for all children"));
  CHECK(is_well_formed_sentence("Alex applied to Harvard"));
  CHECK_FALSE(is_well_formed_sentence(""));
  CHECK_FALSE(is_well_formed_sentence("A dog in the stable."));
  CHECK_FALSE(is_well_formed_sentence("Tall trees"));
  CHECK_FALSE(is_well_formed_sentence("THIS IS ALL SHOUTING"));
  CHECK_FALSE(is_well_formed_sentence("It rains. It pours."));
  CHECK_FALSE(is_well_formed_sentence("the things"));
  std::string long_one = "He";
  for (int i = 0; i < 70; ++i) long_one += " runs";
  CHECK_FALSE(is_well_formed_sentence(long_one));
}

TEST_CASE("ART adapter") {
  SUBCASE("hyp field and blank hypothesis") {
    const auto r = load_art(fixture("art_two_lines.jsonl"), Split::kTrain, Format::kArtJsonl);
    REQUIRE(r.records.size() == 1);
    const auto& p = r.records[0];
    CHECK(p.id == "s1");
    CHECK(p.obs1 == "Alex had his heart set on an ivy league college");
    CHECK(p.obs2 == "Alex ended up achieving his dream of getting into the school.");
    CHECK(p.hypothesis == "Alex applied to Harvard");
    CHECK(p.split == Split::kTrain);
    CHECK(r.stats.loaded_count == 1);
    CHECK(r.stats.filtered_out_count == 1);
    CHECK(r.stats.filter_reasons.at("empty_hypothesis") == 1);
  }
  SUBCASE("labels file picks the hypothesis") {
    const auto r = load_art(fixture("art_dev.jsonl"), Split::kValidation, Format::kArtJsonl);
    REQUIRE(r.records.size() == 2);
    CHECK(r.records[0].id == "a");
    CHECK(r.records[0].hypothesis == "Amy found pictures of her history professor and mother together.");
    CHECK(r.records[1].id == "a-2");
    CHECK(r.records[1].hypothesis == "Amy saw her professor in an old photo.");
    CHECK(r.records[1].split == Split::kValidation);
    CHECK(r.stats.filter_reasons.at("missing_label") == 1);
  }
  SUBCASE("empty file") {
    TempDir dir;
    text::write_file_atomic(dir / "empty.jsonl", "");
    const auto r = load_art(dir / "empty.jsonl", Split::kTrain, Format::kArtJsonl);
    CHECK(r.records.empty());
    CHECK(r.stats.loaded_count == 0);
  }
  SUBCASE("canonical round trip") {
    TempDir dir;
    const auto r = load_art(fixture("art_dev.jsonl"), Split::kTest, Format::kArtJsonl);
    text::write_file_atomic(dir / "c.jsonl", to_jsonl(r.records));
    const auto back = load_art(dir / "c.jsonl", Split::kTrain, Format::kCanonical);
    CHECK(back.records == r.records);
  }
  CHECK_THROWS_AS(load_art(fixture("nope.jsonl"), Split::kTrain, Format::kArtJsonl), IoError);
  CHECK_THROWS_AS(load_art(fixture("d1_sample.tsv"), Split::kTrain, Format::kArctTsv), ValidationError);
}

TEST_CASE("D1 adapter keeps the labelled warrant") {
  const auto r = load_d1(fixture("d1_sample.tsv"), Format::kArctTsv);
  REQUIRE(r.records.size() == 2);
  const auto& e = r.records[0];
  CHECK(e.id == "d1-1");
  CHECK(e.stated_premise == "Vaccinations save lives");
  CHECK(e.stated_claim == "Vaccination should be mandatory for all children");
  CHECK(e.gold_premises == std::vector<std::string>{"most children are protected when everyone is vaccinated"});
  CHECK(e.source == Source::kD1);
  CHECK(r.records[1].gold_premises == std::vector<std::string>{"schools teach art"});
  CHECK(r.stats.filter_reasons.at("missing_field:correctLabelW0orW1") == 1);
  CHECK(r.stats.filter_reasons.at("ill_formed_premise") == 1);
  CHECK(r.stats.malformed_count == 1);
  CHECK(r.stats.pre_filter_count() == 4);
  CHECK(reason_sum(r.stats) == r.stats.filtered_out_count);
  check_invariants(r.records);
}

TEST_CASE("D2 adapter keeps all gold paraphrases") {
  const auto r = load_d2(fixture("d2_sample.jsonl"), Format::kD2Jsonl);
  REQUIRE(r.records.size() == 2);
  CHECK(r.records[0].gold_premises.size() == 2);
  CHECK(r.records[0].source == Source::kD2);
  CHECK(r.stats.filtered_out_count == 1);
  CHECK(r.stats.malformed_count == 1);
  CHECK(reason_sum(r.stats) == r.stats.filtered_out_count);
  check_invariants(r.records);
}

TEST_CASE("D3 adapter keeps single-premise support arguments") {
  const auto r = load_d3(fixture("d3_sample.jsonl"), Format::kD3Jsonl);
  REQUIRE(r.records.size() == 2);
  CHECK(r.records[0].id == "d3-1");
  CHECK(r.records[0].scheme == std::optional<std::string>("Practical Evaluation"));
  CHECK(r.records[1].id == "d3-4");
  CHECK_FALSE(r.records[1].scheme.has_value());
  CHECK(r.stats.filter_reasons.at("non_support_relation") == 1);
  CHECK(r.stats.filter_reasons.at("premise_chain") == 1);
  CHECK(r.stats.pre_filter_count() == 4);
  check_invariants(r.records);
}

TEST_CASE("canonical enthymeme round trip and determinism") {
  TempDir dir;
  auto a = load_d3(fixture("d3_sample.jsonl"), Format::kD3Jsonl);
  auto b = load_d3(fixture("d3_sample.jsonl"), Format::kD3Jsonl);
  CHECK(a.records == b.records);
  text::write_file_atomic(dir / "d3.jsonl", to_jsonl(a.records));
  const auto back = load_enthymemes(dir / "d3.jsonl");
  CHECK(back.records == a.records);
  CHECK(back.stats.filtered_out_count == 0);
  // Loading canonical data under a different source is refused record by record.
  const auto wrong = load_d1(dir / "d3.jsonl");
  CHECK(wrong.records.empty());
  CHECK(wrong.stats.filter_reasons.at("source_mismatch") == 2);
}

TEST_CASE("enum parsing") {
  CHECK(parse_source("D2") == Source::kD2);
  CHECK(parse_split("validation") == Split::kValidation);
  CHECK(parse_format("arct-tsv") == Format::kArctTsv);
  CHECK_THROWS_AS(parse_source("D9"), ValidationError);
  CHECK_THROWS_AS(parse_format("xml"), ValidationError);
}
