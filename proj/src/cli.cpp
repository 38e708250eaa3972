#include "enthymeme/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <iostream>
#include <map>
#include <memory>
#include <optional>

#include "enthymeme/annotation.hpp"
#include "enthymeme/annotation_server.hpp"
#include "enthymeme/corpus.hpp"
#include "enthymeme/error.hpp"
#include "enthymeme/generator.hpp"
#include "enthymeme/knowledge.hpp"
#include "enthymeme/metrics.hpp"
#include "enthymeme/text.hpp"

namespace enthymeme::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr long long kDefaultSeed = 13;

// Every flag is also readable from ENTHYMEME_<FLAG>, e.g. --sample-size from
// ENTHYMEME_SAMPLE_SIZE.
std::string env_name(const std::string& flag) {
  std::string out = "ENTHYMEME_";
  for (char c : flag.substr(flag.find_first_not_of('-'))) {
    out += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }
  return out;
}

template <class T>
CLI::Option* flag(CLI::App* app, const std::string& name, T& target, const std::string& help) {
  return app->add_option(name, target, help)->envname(env_name(name));
}

// Hash of a file, or of every regular file under a directory in path order.
std::string hash_input(const fs::path& p) {
  if (!fs::is_directory(p)) return text::sha256_hex(text::read_file(p));
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(p)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  std::string acc;
  for (const auto& f : files) acc += fs::relative(f, p).generic_string() + "\n" + text::sha256_hex(text::read_file(f)) + "\n";
  return text::sha256_hex(acc);
}

struct RunManifest {
  explicit RunManifest(std::string cmd) : command(std::move(cmd)) {}

  std::string command;
  json config = json::object();
  std::map<std::string, std::string> inputs;  // path -> sha256
  std::vector<std::string> outputs;
  std::string started_at = text::utc_timestamp();

  void input(const fs::path& p) { inputs[p.string()] = hash_input(p); }

  // Written beside the primary output as <output>.manifest.json.
  void write(const fs::path& primary) const {
    json outs = json::object();
    for (const auto& o : outputs) {
      std::error_code ec;
      outs[o] = fs::exists(o, ec) ? json(hash_input(o)) : json(nullptr);
    }
    json j = {{"command", command},
              {"config", config},
              {"inputs", inputs},
              {"outputs", outs},
              {"started_at", started_at},
              {"finished_at", text::utc_timestamp()}};
    auto target = primary;
    if (!target.has_filename()) target = target.parent_path();
    text::write_file_atomic(target.string() + ".manifest.json", j.dump(2) + "\n");
  }
};

void print_stats(const corpus::CorpusStats& s) {
  std::cout << s.source << " pre_filter=" << s.pre_filter_count() << " kept=" << s.loaded_count
            << " filtered=" << s.filtered_out_count << " malformed=" << s.malformed_count << "\n";
  for (const auto& [reason, n] : s.filter_reasons) std::cout << "  " << reason << ": " << n << "\n";
}

bool looks_like_pairs(const fs::path& path) {
  bool pairs = false;
  bool decided = false;
  text::for_each_line(path, [&](const std::string& line, std::size_t) {
    if (decided || text::trim(line).empty()) return;
    decided = true;
    try {
      pairs = json::parse(line).contains("obs1");
    } catch (const json::exception&) {
      pairs = false;
    }
  });
  return pairs;
}

// --- prepare -------------------------------------------------------------

struct PrepareArgs {
  std::string dataset;
  std::string in;
  std::string format;
  std::string split = "train";
  std::string out;
};

int prepare(const PrepareArgs& a) {
  RunManifest m("prepare");
  m.input(a.in);
  std::string format = a.format;
  if (format.empty()) {
    format = a.dataset == "art" ? "art-jsonl" : a.dataset == "d1" ? "arct-tsv" : a.dataset == "d2" ? "d2-jsonl" : "d3-jsonl";
  }
  const auto f = corpus::parse_format(format);
  corpus::CorpusStats stats;
  std::string payload;
  if (a.dataset == "art") {
    auto r = corpus::load_art(a.in, corpus::parse_split(a.split), f);
    stats = r.stats;
    payload = corpus::to_jsonl(r.records);
  } else {
    auto r = a.dataset == "d1" ? corpus::load_d1(a.in, f) : a.dataset == "d2" ? corpus::load_d2(a.in, f) : corpus::load_d3(a.in, f);
    stats = r.stats;
    payload = corpus::to_jsonl(r.records);
  }
  text::write_file_atomic(a.out, payload);
  print_stats(stats);
  m.config = {{"dataset", a.dataset}, {"format", format}, {"split", a.split}, {"stats", corpus::to_json(stats)}};
  m.outputs = {a.out};
  m.write(a.out);
  return 0;
}

// --- augment -------------------------------------------------------------

struct AugmentArgs {
  std::string in;
  std::string backend = "stub";
  std::string cache;
  std::string out;
};

int augment(const AugmentArgs& a) {
  RunManifest m("augment");
  m.input(a.in);
  std::optional<fs::path> cache;
  if (!a.cache.empty()) cache = a.cache;
  auto kb = knowledge::make_backend(a.backend, cache);

  std::size_t failed = 0;
  auto phrase_for = [&](const std::string& first, const std::string& second) -> std::optional<std::string> {
    try {
      return knowledge::select_intent(knowledge::infer({first, second}, *kb));
    } catch (const MissingInferenceError& e) {
      std::cerr << "warning: " << e.what() << "\n";
    } catch (const ValidationError& e) {
      std::cerr << "warning: " << e.what() << "\n";
    }
    ++failed;
    return std::nullopt;
  };

  std::string payload;
  std::size_t total = 0;
  if (looks_like_pairs(a.in)) {
    auto r = corpus::load_art(a.in, corpus::Split::kTrain, corpus::Format::kCanonical);
    for (auto& p : r.records) p.knowledge_phrase = phrase_for(p.obs1, p.obs2);
    total = r.records.size();
    payload = corpus::to_jsonl(r.records);
  } else {
    auto r = corpus::load_enthymemes(a.in);
    for (auto& e : r.records) e.knowledge_phrase = phrase_for(e.stated_premise, e.stated_claim);
    total = r.records.size();
    payload = corpus::to_jsonl(r.records);
  }
  text::write_file_atomic(a.out, payload);
  std::cout << "augmented=" << total - failed << " failed=" << failed << "\n";
  m.config = {{"backend", kb->id()}, {"cache", a.cache}, {"failed", failed}};
  m.outputs = {a.out};
  m.write(a.out);
  return 0;
}

// --- train ---------------------------------------------------------------

struct TrainArgs {
  std::string pairs;
  std::string knowledge;
  std::string config;
  std::string out;
  long long seed = kDefaultSeed;
  bool seed_given = false;
};

int train(const TrainArgs& a) {
  RunManifest m("train");
  m.input(a.pairs);
  m.input(a.config);
  json raw;
  try {
    raw = json::parse(text::read_file(a.config));
  } catch (const json::parse_error& e) {
    throw ValidationError("bad training config " + a.config + ": " + e.what());
  }
  auto config = generator::TrainingConfig::from_json(raw);
  config.checkpoint_dir = a.out;
  if (a.seed_given || !raw.contains("seed")) config.seed = a.seed;

  const auto pairs = corpus::load_art(a.pairs, corpus::Split::kTrain, corpus::Format::kCanonical).records;
  std::map<std::string, std::string> phrases;
  if (!a.knowledge.empty()) {
    m.input(a.knowledge);
    for (const auto& p : corpus::load_art(a.knowledge, corpus::Split::kTrain, corpus::Format::kCanonical).records) {
      if (p.knowledge_phrase) phrases[p.id] = *p.knowledge_phrase;
    }
  }
  auto backend = generator::fine_tune(pairs, a.knowledge.empty() ? nullptr : &phrases, config);
  const auto& w = backend->weights();
  std::cout << "trained on " << pairs.size() << " pairs; mixture bigram=" << w[0] << " unigram=" << w[1]
            << " copy=" << w[2] << "\n";
  m.config = config.to_json();
  m.config["knowledge"] = !a.knowledge.empty();
  m.outputs = {a.out};
  m.write(fs::path(a.out).lexically_normal());
  return 0;
}

// --- generate ------------------------------------------------------------

struct GenerateArgs {
  std::string enthymemes;
  std::string setting;
  std::string checkpoint;
  bool stub = false;
  bool http = false;
  std::string knowledge_backend;
  std::string cache;
  std::string out;
  int beam_width = 5;
  int max_tokens = 32;
  std::size_t workers = 1;
  long long seed = kDefaultSeed;
};

int generate(const GenerateArgs& a) {
  RunManifest m("generate");
  m.input(a.enthymemes);
  if ((a.stub ? 1 : 0) + (a.http ? 1 : 0) + (a.checkpoint.empty() ? 0 : 1) != 1) {
    throw ValidationError("choose exactly one of --checkpoint, --stub, --http");
  }
  generator::GenerationConfig config;
  config.setting = generator::parse_setting(a.setting);
  config.beam_width = a.beam_width;
  config.max_output_tokens = a.max_tokens;
  config.seed = a.seed;
  config.validate();

  std::function<std::unique_ptr<generator::GenerationBackend>()> factory;
  if (a.stub) {
    factory = [] { return std::make_unique<generator::StubGenerationBackend>(); };
  } else if (a.http) {
    factory = [] { return std::make_unique<generator::HttpGenerationBackend>(generator::HttpGenerationBackend::from_env()); };
  } else {
    m.input(a.checkpoint);
    auto loaded = std::make_shared<generator::NgramSeq2SeqBackend>(generator::NgramSeq2SeqBackend::load(a.checkpoint));
    factory = [loaded] { return std::make_unique<generator::NgramSeq2SeqBackend>(*loaded); };
  }

  std::unique_ptr<knowledge::KnowledgeBackend> kb;
  if (!a.knowledge_backend.empty()) {
    std::optional<fs::path> cache;
    if (!a.cache.empty()) cache = a.cache;
    kb = knowledge::make_backend(a.knowledge_backend, cache);
  }

  const auto enthymemes = corpus::load_enthymemes(a.enthymemes).records;
  std::vector<generator::GeneratedPremise> out;
  if (a.workers > 1) {
    out = generator::generate_for_corpus_parallel(enthymemes, factory, config, kb.get(), a.workers);
  } else {
    auto backend = factory();
    out = generator::generate_for_corpus(enthymemes, *backend, config, kb.get());
  }
  text::write_file_atomic(a.out, generator::to_jsonl(out));

  const auto failed = std::count_if(out.begin(), out.end(), [](const auto& g) { return g.error.has_value(); });
  const auto fallback = std::count_if(out.begin(), out.end(), [](const auto& g) { return g.extraction_fallback; });
  std::cout << "generated=" << out.size() - static_cast<std::size_t>(failed) << " failed=" << failed
            << " fallback=" << fallback << "\n";
  for (const auto& g : out) {
    if (g.error) std::cerr << "warning: " << g.enthymeme_id << ": " << *g.error << "\n";
  }
  m.config = config.to_json();
  m.config["backend"] = a.stub ? "stub" : a.http ? "http" : "checkpoint";
  m.config["knowledge_backend"] = kb ? json(kb->id()) : json(nullptr);
  m.config["workers"] = a.workers;
  m.config["failed"] = failed;
  m.outputs = {a.out};
  m.write(a.out);
  return 0;
}

// --- evaluate ------------------------------------------------------------

struct EvaluateArgs {
  std::string generations;
  std::string gold;
  std::string embedder = "static";
  std::string out;
  std::string compare;
};

int evaluate(const EvaluateArgs& a) {
  RunManifest m("evaluate");
  m.input(a.generations);
  m.input(a.gold);
  std::unique_ptr<metrics::Embedder> embedder;
  if (a.embedder == "static") {
    embedder = std::make_unique<metrics::StaticHashEmbedder>();
  } else if (a.embedder == "model") {
    embedder = std::make_unique<metrics::HttpEmbedder>(metrics::HttpEmbedder::from_env());
  } else {
    throw ValidationError("unknown embedder: " + a.embedder);
  }
  const auto gold = corpus::load_enthymemes(a.gold).records;
  auto primary = metrics::evaluate(generator::load_generations(a.generations), gold, *embedder);
  std::vector<metrics::ScoreReport> reports{primary.report};
  if (!a.compare.empty()) {
    m.input(a.compare);
    auto other = metrics::evaluate(generator::load_generations(a.compare), gold, *embedder);
    try {
      reports[0].p_value = metrics::compare_systems(primary, other);
    } catch (const UndefinedStatisticError& e) {
      std::cerr << "notice: no p-value: " << e.what() << "\n";
    }
    reports.push_back(other.report);
  }
  json doc = {{"reports", json::array()}};
  for (const auto& r : reports) doc["reports"].push_back(metrics::to_json(r));
  text::write_file_atomic(a.out, doc.dump(2) + "\n");
  std::cout << metrics::format_table(reports);
  m.config = {{"embedder", embedder->id()}, {"compare", !a.compare.empty()}};
  m.outputs = {a.out};
  m.write(a.out);
  return 0;
}

// --- batch ---------------------------------------------------------------

struct BatchArgs {
  std::vector<std::string> generations;
  std::vector<std::string> gold;
  std::size_t sample_size = 50;
  int judges = 3;
  long long seed = kDefaultSeed;
  std::string out;
};

int batch(const BatchArgs& a) {
  RunManifest m("batch");
  std::vector<generator::GeneratedPremise> gens;
  for (const auto& p : a.generations) {
    m.input(p);
    auto g = generator::load_generations(p);
    gens.insert(gens.end(), g.begin(), g.end());
  }
  std::vector<corpus::Enthymeme> gold;
  for (const auto& p : a.gold) {
    m.input(p);
    auto r = corpus::load_enthymemes(p).records;
    gold.insert(gold.end(), r.begin(), r.end());
  }
  const auto items = annotation::create_batch(gens, gold, a.sample_size, static_cast<std::uint64_t>(a.seed), a.judges);
  text::write_file_atomic(a.out, annotation::to_jsonl(items));
  std::cout << "items=" << items.size() << "\n";
  m.config = {{"sample_size", a.sample_size}, {"required_judges", a.judges}, {"seed", a.seed}};
  m.outputs = {a.out};
  m.write(a.out);
  return 0;
}

// --- serve / report ------------------------------------------------------

struct ServeArgs {
  std::string batch;
  std::string journal;
  std::string ui;
  std::string host = "127.0.0.1";
  int port = 0;
};

int serve(const ServeArgs& a) {
  RunManifest m("serve");
  m.input(a.batch);
  annotation::AnnotationStore store(annotation::load_batch(a.batch), a.journal);
  std::optional<fs::path> ui;
  if (!a.ui.empty()) ui = a.ui;
  annotation::AnnotationServer server(store, ui);
  const int port = a.port > 0 ? a.port : annotation::port_from_env();
  m.config = {{"host", a.host}, {"port", port}, {"ui", a.ui}, {"replayed_judgments", store.judgment_count()}};
  m.outputs = {a.journal};
  m.write(a.journal);
  std::cout << "serving " << store.batch().size() << " items on http://" << a.host << ":" << port << "\n" << std::flush;
  if (!server.listen(a.host, port)) throw IoError("cannot listen on " + a.host + ":" + std::to_string(port));
  return 0;
}

struct ReportArgs {
  std::string batch;
  std::string journal;
  std::string out;
  bool require_complete = false;
};

int report(const ReportArgs& a) {
  RunManifest m("report");
  m.input(a.batch);
  if (!fs::exists(a.journal)) throw IoError("journal not found: " + a.journal);
  m.input(a.journal);
  annotation::AnnotationStore store(annotation::load_batch(a.batch), a.journal);
  const auto r = store.report(a.require_complete);
  std::cout << annotation::format_table(r);
  if (!a.out.empty()) {
    text::write_file_atomic(a.out, annotation::to_json(r).dump(2) + "\n");
    m.outputs = {a.out};
  }
  m.config = {{"require_complete", a.require_complete}};
  m.write(a.out.empty() ? fs::path(a.journal + ".report") : fs::path(a.out));
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Implicit premise generation and evaluation pipeline"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "enthymeme 0.1.0");

  PrepareArgs pa;
  auto* prep = app.add_subcommand("prepare", "Load a raw corpus and write canonical JSONL");
  flag(prep, "--dataset", pa.dataset, "art, d1, d2 or d3")->required()->check(CLI::IsMember({"art", "d1", "d2", "d3"}));
  flag(prep, "--in", pa.in, "raw input file")->required()->check(CLI::ExistingFile);
  flag(prep, "--format", pa.format, "input layout (default depends on dataset)")
      ->check(CLI::IsMember({"canonical", "art-jsonl", "arct-tsv", "d2-jsonl", "d3-jsonl"}));
  flag(prep, "--split", pa.split, "ART split label")->check(CLI::IsMember({"train", "validation", "test"}));
  flag(prep, "--out", pa.out, "canonical JSONL output")->required();

  AugmentArgs aa;
  auto* aug = app.add_subcommand("augment", "Attach a commonsense intent phrase to each record");
  flag(aug, "--in", aa.in, "canonical pairs or enthymemes")->required()->check(CLI::ExistingFile);
  flag(aug, "--backend", aa.backend, "live, cache or stub")->check(CLI::IsMember({"live", "cache", "stub"}));
  flag(aug, "--cache", aa.cache, "knowledge cache JSONL");
  flag(aug, "--out", aa.out, "augmented JSONL output")->required();

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "Fine-tune the sequence model on abductive pairs");
  flag(tr, "--pairs", ta.pairs, "canonical ART pairs")->required()->check(CLI::ExistingFile);
  flag(tr, "--knowledge", ta.knowledge, "augmented pairs carrying knowledge phrases")->check(CLI::ExistingFile);
  flag(tr, "--config", ta.config, "training config JSON")->required()->check(CLI::ExistingFile);
  flag(tr, "--out", ta.out, "checkpoint directory")->required();
  auto* train_seed = flag(tr, "--seed", ta.seed, "random seed");

  GenerateArgs ga;
  auto* gen = app.add_subcommand("generate", "Generate implicit premises for enthymemes");
  flag(gen, "--enthymemes", ga.enthymemes, "canonical enthymemes")->required()->check(CLI::ExistingFile);
  flag(gen, "--setting", ga.setting, "zero_shot, fine_tuned or fine_tuned_knowledge")
      ->required()
      ->check(CLI::IsMember({"zero_shot", "fine_tuned", "fine_tuned_knowledge"}));
  flag(gen, "--checkpoint", ga.checkpoint, "trained checkpoint directory")->check(CLI::ExistingDirectory);
  gen->add_flag("--stub", ga.stub, "use the deterministic stub backend")->envname("ENTHYMEME_STUB");
  gen->add_flag("--http", ga.http, "use the model server at GENERATION_BACKEND_URL")->envname("ENTHYMEME_HTTP");
  flag(gen, "--knowledge-backend", ga.knowledge_backend, "live, cache or stub")
      ->check(CLI::IsMember({"live", "cache", "stub"}));
  flag(gen, "--cache", ga.cache, "knowledge cache JSONL");
  flag(gen, "--beam-width", ga.beam_width, "beam width")->check(CLI::PositiveNumber);
  flag(gen, "--max-tokens", ga.max_tokens, "maximum premise tokens")->check(CLI::PositiveNumber);
  flag(gen, "--workers", ga.workers, "parallel backend instances")->check(CLI::PositiveNumber);
  flag(gen, "--seed", ga.seed, "random seed");
  flag(gen, "--out", ga.out, "generations JSONL output")->required();

  EvaluateArgs ea;
  auto* ev = app.add_subcommand("evaluate", "Score generations with BLEU and BERTScore");
  flag(ev, "--generations", ea.generations, "generations JSONL")->required()->check(CLI::ExistingFile);
  flag(ev, "--gold", ea.gold, "canonical enthymemes with gold premises")->required()->check(CLI::ExistingFile);
  flag(ev, "--embedder", ea.embedder, "static or model")->check(CLI::IsMember({"static", "model"}));
  flag(ev, "--compare", ea.compare, "second system's generations for a paired test")->check(CLI::ExistingFile);
  flag(ev, "--out", ea.out, "report JSON output")->required();

  BatchArgs ba;
  auto* bt = app.add_subcommand("batch", "Sample an annotation batch");
  bt->add_option("--generations", ba.generations, "generations JSONL files")->required()->check(CLI::ExistingFile);
  bt->add_option("--gold", ba.gold, "canonical enthymeme files")->required()->check(CLI::ExistingFile);
  flag(bt, "--sample-size", ba.sample_size, "enthymemes per dataset");
  flag(bt, "--judges", ba.judges, "judgments required per item");
  flag(bt, "--seed", ba.seed, "random seed");
  flag(bt, "--out", ba.out, "batch JSONL output")->required();

  ServeArgs sa;
  auto* sv = app.add_subcommand("serve", "Run the annotation service");
  flag(sv, "--batch", sa.batch, "batch JSONL")->required()->check(CLI::ExistingFile);
  flag(sv, "--journal", sa.journal, "judgment journal (created if missing)")->required();
  flag(sv, "--ui", sa.ui, "static UI directory served under /ui")->check(CLI::ExistingDirectory);
  flag(sv, "--host", sa.host, "bind address");
  flag(sv, "--port", sa.port, "port (default ANNOTATION_PORT or 8080)");

  ReportArgs ra;
  auto* rp = app.add_subcommand("report", "Aggregate collected judgments");
  flag(rp, "--batch", ra.batch, "batch JSONL")->required()->check(CLI::ExistingFile);
  flag(rp, "--journal", ra.journal, "judgment journal")->required();
  flag(rp, "--out", ra.out, "report JSON output");
  rp->add_flag("--require-complete", ra.require_complete, "fail unless every item is fully judged")
      ->envname("ENTHYMEME_REQUIRE_COMPLETE");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::kUsage);
  }

  try {
    if (*prep) return prepare(pa);
    if (*aug) return augment(aa);
    if (*tr) {
      ta.seed_given = train_seed->count() > 0;
      return train(ta);
    }
    if (*gen) return generate(ga);
    if (*ev) return evaluate(ea);
    if (*bt) return batch(ba);
    if (*sv) return serve(sa);
    if (*rp) return report(ra);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(e.exit_code());
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kData);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kData);
  }
  return static_cast<int>(ExitCode::kUsage);
}

int run(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace enthymeme::cli
