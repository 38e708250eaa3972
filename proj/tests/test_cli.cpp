#include <doctest.h>

#include <iostream>
#include <sstream>

#include "enthymeme/annotation.hpp"
#include "enthymeme/cli.hpp"
#include "enthymeme/text.hpp"
#include "support.hpp"

using namespace enthymeme;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
};

// Runs the CLI with stdout and stderr captured.
Result run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "enthymeme");
  std::ostringstream out, err;
  auto* old_out = std::cout.rdbuf(out.rdbuf());
  auto* old_err = std::cerr.rdbuf(err.rdbuf());
  const int code = cli::run(args);
  std::cout.rdbuf(old_out);
  std::cerr.rdbuf(old_err);
  return {code, out.str() + err.str()};
}

std::size_t line_count(const fs::path& p) {
  std::size_t n = 0;
  text::for_each_line(p, [&](const std::string& l, std::size_t) { n += l.empty() ? 0 : 1; });
  return n;
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(run_cli({}).code == 2);
  CHECK(run_cli({"frobnicate"}).code == 2);
  CHECK(run_cli({"prepare", "--dataset", "d9", "--in", fixture("d3_sample.jsonl").string(), "--out", "x"}).code == 2);
  CHECK(run_cli({"prepare", "--dataset", "d3", "--in", "/no/such/file", "--out", "x"}).code == 2);
  CHECK(run_cli({"--help"}).code == 0);
}

TEST_CASE("prepare writes canonical records, stats and a manifest") {
  TempDir dir;
  const auto out = dir / "d3.jsonl";
  const auto r = run_cli({"prepare", "--dataset", "d3", "--in", fixture("d3_sample.jsonl").string(), "--out", out.string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("kept=2") != std::string::npos);
  CHECK(r.out.find("premise_chain: 1") != std::string::npos);
  CHECK(line_count(out) == 2);
  const auto manifest = nlohmann::json::parse(text::read_file(out.string() + ".manifest.json"));
  CHECK(manifest["command"] == "prepare");
  CHECK(manifest["inputs"].size() == 1);
  CHECK(manifest["outputs"][out.string()] == text::sha256_hex(text::read_file(out)));

  // Wrong adapter for the dataset is a data error.
  CHECK(run_cli({"prepare", "--dataset", "art", "--format", "arct-tsv", "--in", fixture("d1_sample.tsv").string(), "--out",
             (dir / "x.jsonl").string()})
            .code == 3);
}

TEST_CASE("generate with the stub on three items") {
  TempDir dir;
  const auto all = dir / "p.jsonl";
  REQUIRE(run_cli({"prepare", "--dataset", "d2", "--in", fixture("pipeline_20.jsonl").string(), "--out", all.string()}).code == 0);
  std::string three;
  int n = 0;
  text::for_each_line(all, [&](const std::string& l, std::size_t) {
    if (n++ < 3) three += l + "\n";
  });
  text::write_file_atomic(dir / "three.jsonl", three);

  const auto out = dir / "gen.jsonl";
  const auto r = run_cli({"generate", "--enthymemes", (dir / "three.jsonl").string(), "--setting", "fine_tuned", "--stub",
                      "--out", out.string()});
  CHECK(r.code == 0);
  CHECK(line_count(out) == 3);
  CHECK(fs::exists(out.string() + ".manifest.json"));

  // Backend selection is exclusive; an unreachable model server is a backend error.
  CHECK(run_cli({"generate", "--enthymemes", (dir / "three.jsonl").string(), "--setting", "fine_tuned", "--out",
             out.string()})
            .code == 3);
  ::unsetenv("GENERATION_BACKEND_URL");
  CHECK(run_cli({"generate", "--enthymemes", (dir / "three.jsonl").string(), "--setting", "fine_tuned", "--http", "--out",
             out.string()})
            .code == 4);
  ::setenv("GENERATION_BACKEND_URL", "http://127.0.0.1:1/generate", 1);
  const auto down = run_cli({"generate", "--enthymemes", (dir / "three.jsonl").string(), "--setting", "fine_tuned",
                         "--http", "--out", out.string()});
  CHECK(down.code == 0);  // per-item failures are reported, not fatal
  CHECK(down.out.find("failed=3") != std::string::npos);
  ::unsetenv("GENERATION_BACKEND_URL");
}

TEST_CASE("train then generate from the checkpoint") {
  TempDir dir;
  text::write_file_atomic(dir / "config.json", R"({"epochs": 2, "learning_rate": 3e-5, "batch_size": 8})");
  const auto aug = dir / "pairs_k.jsonl";
  REQUIRE(run_cli({"augment", "--in", fixture("art_train_16.jsonl").string(), "--backend", "stub", "--out", aug.string()})
              .code == 0);
  const auto ckpt = dir / "ckpt";
  const auto r = run_cli({"train", "--pairs", fixture("art_train_16.jsonl").string(), "--knowledge", aug.string(),
                      "--config", (dir / "config.json").string(), "--out", ckpt.string()});
  CHECK(r.code == 0);
  CHECK(fs::exists(ckpt / "weights.json"));
  CHECK(fs::exists(ckpt / "manifest.json"));
  CHECK(fs::exists(dir / "ckpt.manifest.json"));
  const auto m = nlohmann::json::parse(text::read_file(dir / "ckpt.manifest.json"));
  CHECK(m["config"]["seed"] == 13);

  const auto ents = dir / "e.jsonl";
  REQUIRE(run_cli({"prepare", "--dataset", "d3", "--in", fixture("d3_sample.jsonl").string(), "--out", ents.string()}).code == 0);
  const auto out = dir / "gen.jsonl";
  CHECK(run_cli({"generate", "--enthymemes", ents.string(), "--setting", "fine_tuned_knowledge", "--checkpoint",
             ckpt.string(), "--knowledge-backend", "stub", "--workers", "2", "--out", out.string()})
            .code == 0);
  const auto gens = generator::load_generations(out);
  REQUIRE(gens.size() == 2);
  for (const auto& g : gens) CHECK_FALSE(g.error.has_value());

  // Missing knowledge coverage is a data error.
  text::write_file_atomic(dir / "partial.jsonl", text::read_file(fixture("art_train_16.jsonl")).substr(0, 10));
  CHECK(run_cli({"train", "--pairs", fixture("art_train_16.jsonl").string(), "--knowledge", fixture("art_train_16.jsonl").string(),
             "--config", (dir / "config.json").string(), "--out", (dir / "c2").string()})
            .code == 3);
}

TEST_CASE("flags fall back to environment variables") {
  TempDir dir;
  const auto out = dir / "d3.jsonl";
  ::setenv("ENTHYMEME_DATASET", "d3", 1);
  ::setenv("ENTHYMEME_IN", fixture("d3_sample.jsonl").c_str(), 1);
  const auto r = run_cli({"prepare", "--out", out.string()});
  ::unsetenv("ENTHYMEME_DATASET");
  ::unsetenv("ENTHYMEME_IN");
  CHECK(r.code == 0);
  CHECK(line_count(out) == 2);
}

TEST_CASE("evaluate, batch and report") {
  TempDir dir;
  const auto ents = dir / "e.jsonl";
  REQUIRE(run_cli({"prepare", "--dataset", "d2", "--in", fixture("pipeline_20.jsonl").string(), "--out", ents.string()}).code == 0);
  const auto aug = dir / "e_k.jsonl";
  REQUIRE(run_cli({"augment", "--in", ents.string(), "--backend", "stub", "--out", aug.string()}).code == 0);
  const auto g1 = dir / "g1.jsonl";
  const auto g2 = dir / "g2.jsonl";
  REQUIRE(run_cli({"generate", "--enthymemes", ents.string(), "--setting", "fine_tuned", "--stub", "--out", g1.string()}).code == 0);
  REQUIRE(run_cli({"generate", "--enthymemes", aug.string(), "--setting", "fine_tuned_knowledge", "--stub", "--out", g2.string()}).code == 0);

  const auto rep = dir / "scores.json";
  auto r = run_cli({"evaluate", "--generations", g1.string(), "--gold", ents.string(), "--embedder", "static", "--compare",
                g2.string(), "--out", rep.string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("BLEU1") != std::string::npos);
  const auto scores = nlohmann::json::parse(text::read_file(rep));
  CHECK(scores["reports"].size() == 2);
  CHECK(scores["reports"][0]["n_items"] == 20);

  const auto batch = dir / "batch.jsonl";
  ::setenv("ENTHYMEME_SAMPLE_SIZE", "5", 1);
  r = run_cli({"batch", "--generations", g1.string(), g2.string(), "--gold", ents.string(), "--out", batch.string()});
  ::unsetenv("ENTHYMEME_SAMPLE_SIZE");
  CHECK(r.code == 0);
  CHECK(line_count(batch) == 10);

  const auto journal = dir / "journal.jsonl";
  {
    annotation::AnnotationStore store(annotation::load_batch(batch), journal);
    for (const auto* who : {"a", "b", "c"}) {
      while (auto item = store.next_item(who)) store.submit_judgment({item->item_id, who, true, ""});
    }
  }
  const auto agg = dir / "agg.json";
  r = run_cli({"report", "--batch", batch.string(), "--journal", journal.string(), "--require-complete", "--out", agg.string()});
  CHECK(r.code == 0);
  CHECK(r.out.find("100.00%") != std::string::npos);
  CHECK(nlohmann::json::parse(text::read_file(agg))["n_judgments"] == 30);
  CHECK(run_cli({"report", "--batch", batch.string(), "--journal", (dir / "none.jsonl").string()}).code == 3);
}
