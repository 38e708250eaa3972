#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>

#include "annotation_support.hpp"
#include "enthymeme/annotation.hpp"
#include "enthymeme/error.hpp"
#include "enthymeme/text.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace enthymeme;
using namespace enthymeme::annotation;

namespace {

std::vector<generator::GeneratedPremise> gens_for(const std::vector<corpus::Enthymeme>& es, generator::Setting s) {
  std::vector<generator::GeneratedPremise> out;
  for (const auto& e : es) {
    generator::GeneratedPremise g;
    g.enthymeme_id = e.id;
    g.setting = s;
    g.implicit_premise = "Generated for " + e.id + ".";
    out.push_back(g);
  }
  return out;
}

std::vector<corpus::Enthymeme> enthymemes(corpus::Source s, int n, const std::string& prefix) {
  std::vector<corpus::Enthymeme> out;
  for (int i = 0; i < n; ++i) {
    corpus::Enthymeme e;
    e.id = prefix + std::to_string(i);
    e.stated_premise = "Premise is here";
    e.stated_claim = "Claim is here";
    e.gold_premises = {"g"};
    e.source = s;
    out.push_back(e);
  }
  return out;
}

void serve_and_submit(AnnotationStore& store, const std::string& who, bool label) {
  auto item = store.next_item(who);
  REQUIRE(item.has_value());
  store.submit_judgment({item->item_id, who, label, ""});
}

}  // namespace

TEST_CASE("majority vote over all triples") {
  for (int mask = 0; mask < 8; ++mask) {
    const bool v[3] = {(mask & 1) != 0, (mask & 2) != 0, (mask & 4) != 0};
    const int yes = v[0] + v[1] + v[2];
    CHECK(majority_vote(v) == (yes >= 2));
  }
  const bool two_of_three[3] = {true, true, false};
  CHECK(majority_vote(two_of_three));
  const bool one_of_three[3] = {true, false, false};
  CHECK_FALSE(majority_vote(one_of_three));
  const bool single[1] = {true};
  CHECK(majority_vote(single));
  const bool even[2] = {true, false};
  CHECK_THROWS_AS(majority_vote(even), ValidationError);
  CHECK_THROWS_AS(majority_vote(std::span<const bool>()), ValidationError);
}

TEST_CASE("krippendorff alpha") {
  SUBCASE("hand coincidence matrix") {
    // Units (1,1) (1,0) (0,0) (0,0): o00 = 4, o01 = o10 = 1, o11 = 2; n0 = 5, n1 = 3, n = 8.
    // alpha = 1 - (n - 1) * 2 / (2 * 5 * 3) = 8/15.
    const JudgmentMatrix m = {{true, true}, {true, false}, {false, false}, {false, false}};
    CHECK(std::fabs(krippendorff_alpha(m) - 8.0 / 15.0) < 1e-9);
  }
  SUBCASE("perfect agreement") {
    const JudgmentMatrix m = {{true, true, true}, {false, false, false}, {true, true, std::nullopt}};
    CHECK(krippendorff_alpha(m) == 1.0);
    auto flipped = m;
    flipped[0][1] = false;
    CHECK(krippendorff_alpha(flipped) < 1.0);
  }
  SUBCASE("missing cells") {
    const JudgmentMatrix m = {{true, std::nullopt, true},
                              {false, true, std::nullopt},
                              {std::nullopt, false, false},
                              {true, true, false},
                              {true, std::nullopt, std::nullopt}};
    CHECK(std::fabs(krippendorff_alpha(m) - oracle::alpha(m)) < 1e-12);
  }
  SUBCASE("random labels sit near zero") {
    std::mt19937_64 rng(13);
    JudgmentMatrix m(1000);
    for (auto& row : m) {
      for (int k = 0; k < 3; ++k) row.emplace_back((rng() & 1) != 0);
    }
    const double a = krippendorff_alpha(m);
    CHECK(std::fabs(a) < 0.1);
    CHECK(std::fabs(a - oracle::alpha(m)) < 1e-9);
  }
  SUBCASE("degenerate inputs") {
    CHECK_THROWS_AS(krippendorff_alpha({{true, true}, {true, true}}), UndefinedStatisticError);
    CHECK_THROWS_AS(krippendorff_alpha({{true, false}}), ValidationError);
    CHECK_THROWS_AS(krippendorff_alpha({{true, std::nullopt}, {false, std::nullopt}}), ValidationError);
  }
}

TEST_CASE("batch creation") {
  std::vector<corpus::Enthymeme> all;
  for (auto [s, p] : {std::pair{corpus::Source::kD1, "a"}, {corpus::Source::kD2, "b"}, {corpus::Source::kD3, "c"}}) {
    auto e = enthymemes(s, 60, p);
    all.insert(all.end(), e.begin(), e.end());
  }
  const auto gens = gens_for(all, generator::Setting::kFineTuned);
  const auto batch = create_batch(gens, all, 50, 13);
  CHECK(batch.size() == 150);
  CHECK(std::is_sorted(batch.begin(), batch.end(), [](auto& x, auto& y) { return x.item_id < y.item_id; }));
  std::map<corpus::Source, int> per;
  for (const auto& it : batch) {
    ++per[it.dataset];
    CHECK(it.required_judges == 3);
    CHECK(it.system == metrics::System::kArt);
  }
  CHECK(per[corpus::Source::kD1] == 50);
  CHECK(per[corpus::Source::kD3] == 50);
  CHECK(create_batch(gens, all, 50, 13) == batch);
  CHECK(create_batch(gens, all, 50, 14) != batch);
  CHECK(create_batch(gens, all, 0, 13).empty());
  CHECK_THROWS_AS(create_batch(gens, all, 61, 13), ValidationError);

  // Both fine-tuned systems yield one item each per sampled enthymeme.
  auto both = gens;
  const auto k = gens_for(all, generator::Setting::kFineTunedKnowledge);
  both.insert(both.end(), k.begin(), k.end());
  CHECK(create_batch(both, all, 10, 13).size() == 60);
}

TEST_CASE("store serving order and caps") {
  TempDir dir;
  AnnotationStore store(make_items(5), dir / "journal.jsonl");
  CHECK(store.next_item("ann-a")->item_id == "i00");
  CHECK_THROWS_AS(store.next_item(""), ValidationError);

  // Exhaustive serve loop: annotators keep pulling until nothing is left.
  const std::vector<std::string> annotators = {"ann-a", "ann-b", "ann-c", "ann-d", "ann-e"};
  std::set<std::pair<std::string, std::string>> pairs;
  bool progress = true;
  while (progress) {
    progress = false;
    for (const auto& who : annotators) {
      auto item = store.next_item(who);
      if (!item) continue;
      progress = true;
      CHECK(pairs.insert({item->item_id, who}).second);
      store.submit_judgment({item->item_id, who, (item->item_id.back() - '0') % 2 == 0, ""});
    }
  }
  CHECK(store.judgment_count() == 15);
  std::map<std::string, int> per_item;
  for (const auto& j : store.judgments()) ++per_item[j.item_id];
  for (const auto& [id, n] : per_item) CHECK(n == 3);
  CHECK(per_item.size() == 5);
  for (const auto& who : annotators) CHECK_FALSE(store.next_item(who).has_value());
}

TEST_CASE("store submission rules") {
  TempDir dir;
  AnnotationStore store(make_items(2), dir / "journal.jsonl");
  CHECK_THROWS_AS(store.submit_judgment({"nope", "a", true, ""}), NotFoundError);
  CHECK_THROWS_AS(store.submit_judgment({"i00", "a", true, ""}), ValidationError);  // never served

  REQUIRE(store.next_item("a")->item_id == "i00");
  const auto first = store.submit_judgment({"i00", "a", true, ""});
  CHECK_FALSE(first.duplicate);
  CHECK_FALSE(first.record.submitted_at.empty());
  const auto again = store.submit_judgment({"i00", "a", true, ""});
  CHECK(again.duplicate);
  CHECK(again.record == first.record);
  CHECK(store.judgment_count() == 1);
  CHECK_THROWS_AS(store.submit_judgment({"i00", "a", false, ""}), ConflictError);

  // Four annotators were offered i01 at once; the fourth is turned away.
  for (const auto* who : {"b", "c", "d", "e"}) CHECK(store.next_item(who)->item_id == "i01");
  store.submit_judgment({"i01", "b", true, ""});
  store.submit_judgment({"i01", "c", true, ""});
  store.submit_judgment({"i01", "d", false, ""});
  CHECK_THROWS_AS(store.submit_judgment({"i01", "e", true, ""}), ConflictError);
  CHECK(store.judgment_count() == 4);
}

TEST_CASE("journal replay restores state") {
  TempDir dir;
  const auto journal = dir / "journal.jsonl";
  std::vector<JudgmentRecord> before;
  std::string served_to_c;
  {
    AnnotationStore store(make_items(3), journal);
    serve_and_submit(store, "a", true);
    serve_and_submit(store, "b", false);
    served_to_c = store.next_item("c")->item_id;  // served, not yet judged
    before = store.judgments();
  }
  AnnotationStore replayed(make_items(3), journal);
  CHECK(replayed.judgments() == before);
  // The earlier serve still counts, so c may submit straight away.
  CHECK_FALSE(replayed.submit_judgment({served_to_c, "c", true, ""}).duplicate);
  CHECK(replayed.judgment_count() == 3);

  text::write_file_atomic(dir / "bad.jsonl", "{\"type\":\"judgment\",\"item_id\":\"zz\"}\n");
  CHECK_THROWS_AS(AnnotationStore(make_items(3), dir / "bad.jsonl"), ValidationError);
}

TEST_CASE("aggregation") {
  const auto items = make_items(10);
  // Scripted labels; item i is plausible by majority iff i % 3 != 0.
  std::vector<JudgmentRecord> js;
  for (int i = 0; i < 10; ++i) {
    const bool maj = i % 3 != 0;
    js.push_back({items[static_cast<std::size_t>(i)].item_id, "x", maj, ""});
    js.push_back({items[static_cast<std::size_t>(i)].item_id, "y", maj, ""});
    js.push_back({items[static_cast<std::size_t>(i)].item_id, "z", i % 2 == 0, ""});
  }
  const auto r = aggregate(items, js);
  CHECK(r.n_judgments == 30);
  REQUIRE(r.groups.size() == 4);
  // Hand count: D1/ART {0,4,8} -> 4,8; D1/+PC {2,6} -> 2; D2/ART {1,5,9} -> 1,5; D2/+PC {3,7} -> 7.
  std::map<std::pair<corpus::Source, metrics::System>, double> want = {
      {{corpus::Source::kD1, metrics::System::kArt}, 2.0 / 3.0},
      {{corpus::Source::kD1, metrics::System::kArtParacomet}, 0.5},
      {{corpus::Source::kD2, metrics::System::kArt}, 2.0 / 3.0},
      {{corpus::Source::kD2, metrics::System::kArtParacomet}, 0.5}};
  for (const auto& g : r.groups) {
    CHECK(g.plausible_fraction == doctest::Approx(want.at({g.dataset, g.system})));
  }
  REQUIRE(r.alpha.has_value());

  std::mt19937_64 rng(5);
  auto shuffled = js;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const auto r2 = aggregate(items, shuffled);
  CHECK(*r2.alpha == *r.alpha);
  CHECK(to_json(r2).dump() == to_json(r).dump());

  std::vector<JudgmentRecord> partial(js.begin(), js.end() - 1);
  CHECK_THROWS_AS(aggregate(items, partial), ValidationError);
  CHECK(aggregate(items, partial, false).groups.size() == 4);

  std::vector<JudgmentRecord> all_yes;
  for (const auto& it : items) {
    for (const auto* who : {"x", "y", "z"}) all_yes.push_back({it.item_id, who, true, ""});
  }
  const auto yes = aggregate(items, all_yes);
  for (const auto& g : yes.groups) CHECK(g.plausible_fraction == 1.0);
  CHECK_FALSE(yes.alpha.has_value());

  const auto table = format_table(r);
  CHECK(table.find("Plausibility") != std::string::npos);
  CHECK(table.find("66.67%") != std::string::npos);
  CHECK(table.find("50.00%") != std::string::npos);
  CHECK(format_table(yes).find("100.00%") != std::string::npos);
  CHECK(table.find("+PARA-COMET") != std::string::npos);
}

TEST_CASE("item validation and io") {
  auto items = make_items(2);
  items[0].required_judges = 2;
  CHECK_THROWS_AS(items[0].validate(), ValidationError);
  TempDir dir;
  const auto good = make_items(3);
  text::write_file_atomic(dir / "b.jsonl", to_jsonl(good));
  CHECK(load_batch(dir / "b.jsonl") == good);
  text::write_file_atomic(dir / "dup.jsonl", to_jsonl({good[0], good[0]}));
  CHECK_THROWS_AS(load_batch(dir / "dup.jsonl"), ValidationError);
}
