#include "enthymeme/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "enthymeme/error.hpp"
#include "enthymeme/sequencing.hpp"
#include "enthymeme/text.hpp"

namespace enthymeme::corpus {

using nlohmann::json;

namespace {

const std::set<std::string, std::less<>> kAuxiliaries = {
    "is", "are", "was", "were", "be", "been", "being", "am", "do", "does", "did", "has",
    "have", "had", "can", "could", "will", "would", "shall", "should", "may", "might",
    "must", "need", "ought", "cannot", "can't", "won't", "don't", "doesn't", "didn't",
    "isn't", "aren't", "wasn't", "weren't", "shouldn't", "wouldn't", "couldn't", "hasn't",
    "haven't", "hadn't", "mustn't", "needn't"};

const std::set<std::string, std::less<>> kDeterminers = {
    "a", "an", "the", "this", "that", "these", "those", "my", "your", "his", "her", "its",
    "our", "their", "some", "any", "every", "each", "no", "many", "several", "few", "all"};

// Closed-class words that happen to end in a verbal suffix.
const std::set<std::string, std::less<>> kSuffixExceptions = {
    "this", "his", "its", "us", "was", "has", "does", "thus", "less", "unless", "yes",
    "during", "nothing", "something", "anything", "everything", "thing", "things",
    "always", "perhaps", "towards", "besides", "whereas", "afterwards", "sometimes",
    "news", "ones", "yours", "ours", "theirs", "hers", "bus", "plus", "across", "bed",
    "red", "need", "indeed", "hundred", "speed", "king", "morning", "evening", "ceiling"};

std::string word_core(std::string_view token) {
  std::size_t b = 0;
  std::size_t e = token.size();
  while (b < e && !std::isalnum(static_cast<unsigned char>(token[b]))) ++b;
  while (e > b && !std::isalnum(static_cast<unsigned char>(token[e - 1]))) --e;
  return text::to_lower(token.substr(b, e - b));
}

bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

bool is_contracted_aux(std::string_view w) {
  return ends_with(w, "'re") || ends_with(w, "'m") || ends_with(w, "'ll") ||
         ends_with(w, "'ve") || ends_with(w, "n't");
}

bool has_verbal_suffix(std::string_view w) {
  if (w.size() < 4 || kSuffixExceptions.count(w) != 0) return false;
  if (ends_with(w, "ss") || ends_with(w, "'s")) return false;
  return ends_with(w, "s") || ends_with(w, "ed") || ends_with(w, "ing");
}

bool is_shouting(std::string_view s) {
  std::size_t letters = 0;
  std::size_t upper = 0;
  for (unsigned char c : s) {
    if (std::isalpha(c)) {
      ++letters;
      if (std::isupper(c)) ++upper;
    }
  }
  return letters >= 4 && upper == letters;
}

std::optional<std::string> get_string(const json& j, std::string_view key) {
  auto it = j.find(key);
  if (it == j.end() || !it->is_string()) return std::nullopt;
  return text::collapse_whitespace(it->get<std::string>());
}

std::vector<std::string> get_string_list(const json& j, std::string_view key) {
  std::vector<std::string> out;
  auto it = j.find(key);
  if (it == j.end()) return out;
  if (it->is_string()) {
    auto s = text::collapse_whitespace(it->get<std::string>());
    if (!s.empty()) out.push_back(std::move(s));
    return out;
  }
  if (!it->is_array()) return out;
  for (const auto& v : *it) {
    if (!v.is_string()) continue;
    auto s = text::collapse_whitespace(v.get<std::string>());
    if (!s.empty()) out.push_back(std::move(s));
  }
  return out;
}

std::string id_of(const json& j, std::string_view key, std::size_t line_number) {
  auto it = j.find(key);
  if (it != j.end()) {
    if (it->is_string()) return it->get<std::string>();
    if (it->is_number_integer()) return std::to_string(it->get<long long>());
  }
  return "line-" + std::to_string(line_number);
}

void check_readable(const std::filesystem::path& path) {
  std::error_code ec;
  if (!std::filesystem::is_regular_file(path, ec)) {
    throw IoError("not a readable file: " + path.string());
  }
}

// Parses each non-blank line as a JSON object; unparseable lines are counted
// as malformed and skipped.
void for_each_json_line(const std::filesystem::path& path, CorpusStats& stats,
                        const std::function<void(const json&, std::size_t)>& fn) {
  check_readable(path);
  text::for_each_line(path, [&](const std::string& line, std::size_t n) {
    if (text::trim(line).empty()) return;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      stats.malformed(n, e.what());
      return;
    }
    if (!j.is_object()) {
      stats.malformed(n, "not a JSON object");
      return;
    }
    fn(j, n);
  });
}

// Shared post-processing for every enthymeme loader.
class EnthymemeSink {
 public:
  EnthymemeSink(Source source, LoadResult<Enthymeme>& out) : source_(source), out_(out) {}

  void offer(Enthymeme e) {
    e.source = source_;
    if (source_ != Source::kD3) e.scheme.reset();
    e.stated_premise = text::collapse_whitespace(e.stated_premise);
    e.stated_claim = text::collapse_whitespace(e.stated_claim);
    for (auto& g : e.gold_premises) g = text::collapse_whitespace(g);
    std::erase_if(e.gold_premises, [](const std::string& g) { return g.empty(); });
    if (e.stated_premise.empty()) return out_.stats.reject("missing_field:stated_premise");
    if (e.stated_claim.empty()) return out_.stats.reject("missing_field:stated_claim");
    if (e.gold_premises.empty()) return out_.stats.reject("missing_field:gold_premises");
    if (!seen_.insert(e.id).second) return out_.stats.reject("duplicate_id");
    if (!is_well_formed_sentence(e.stated_premise)) return out_.stats.reject("ill_formed_premise");
    if (!is_well_formed_sentence(e.stated_claim)) return out_.stats.reject("ill_formed_claim");
    ++out_.stats.loaded_count;
    out_.records.push_back(std::move(e));
  }

  CorpusStats& stats() { return out_.stats; }

 private:
  Source source_;
  LoadResult<Enthymeme>& out_;
  std::unordered_set<std::string> seen_;
};

void load_canonical_enthymemes(const std::filesystem::path& path, EnthymemeSink& sink,
                               std::optional<Source> expected) {
  for_each_json_line(path, sink.stats(), [&](const json& j, std::size_t n) {
    Enthymeme e;
    try {
      e = enthymeme_from_json(j);
    } catch (const ValidationError&) {
      e.id = id_of(j, "id", n);
      e.stated_premise = get_string(j, "stated_premise").value_or("");
      e.stated_claim = get_string(j, "stated_claim").value_or("");
      e.gold_premises = get_string_list(j, "gold_premises");
      if (expected) e.source = *expected;
    }
    if (expected && j.contains("source") && j["source"].is_string() &&
        j["source"].get<std::string>() != to_string(*expected)) {
      return sink.stats().reject("source_mismatch");
    }
    sink.offer(std::move(e));
  });
}

std::filesystem::path art_labels_path(const std::filesystem::path& data) {
  // train.jsonl -> train-labels.lst (upstream naming).
  auto p = data;
  p.replace_filename(data.stem().string() + "-labels.lst");
  return p;
}

}  // namespace

void CorpusStats::reject(const std::string& reason) {
  ++filtered_out_count;
  ++filter_reasons[reason];
}

void CorpusStats::malformed(std::size_t line_number, const std::string& why) {
  ++malformed_count;
  malformed_lines.push_back("line " + std::to_string(line_number) + ": " + why);
}

std::string_view to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValidation: return "validation";
    case Split::kTest: return "test";
  }
  return "train";
}

std::string_view to_string(Source s) {
  switch (s) {
    case Source::kD1: return "D1";
    case Source::kD2: return "D2";
    case Source::kD3: return "D3";
  }
  return "D1";
}

Split parse_split(std::string_view s) {
  const auto l = text::to_lower(s);
  if (l == "train") return Split::kTrain;
  if (l == "validation" || l == "dev" || l == "valid") return Split::kValidation;
  if (l == "test") return Split::kTest;
  throw ValidationError("unknown split: " + std::string(s));
}

Source parse_source(std::string_view s) {
  const auto l = text::to_lower(s);
  if (l == "d1") return Source::kD1;
  if (l == "d2") return Source::kD2;
  if (l == "d3") return Source::kD3;
  throw ValidationError("unknown source: " + std::string(s));
}

Format parse_format(std::string_view s) {
  if (s == "canonical") return Format::kCanonical;
  if (s == "art-jsonl") return Format::kArtJsonl;
  if (s == "arct-tsv") return Format::kArctTsv;
  if (s == "d2-jsonl") return Format::kD2Jsonl;
  if (s == "d3-jsonl") return Format::kD3Jsonl;
  throw ValidationError("unknown format: " + std::string(s));
}

std::string_view to_string(Format f) {
  switch (f) {
    case Format::kCanonical: return "canonical";
    case Format::kArtJsonl: return "art-jsonl";
    case Format::kArctTsv: return "arct-tsv";
    case Format::kD2Jsonl: return "d2-jsonl";
    case Format::kD3Jsonl: return "d3-jsonl";
  }
  return "canonical";
}

bool is_well_formed_sentence(std::string_view raw) {
  const auto s = text::collapse_whitespace(raw);
  if (s.empty()) return false;
  const auto tokens = text::split_whitespace(s);
  if (tokens.size() < 3 || tokens.size() > 60) return false;
  if (sequencing::split_sentences(s).size() != 1) return false;
  if (is_shouting(s)) return false;

  std::string previous;
  for (const auto& tok : tokens) {
    const auto w = word_core(tok);
    if (w.empty()) continue;
    if (kAuxiliaries.count(w) != 0 || is_contracted_aux(w)) return true;
    if (has_verbal_suffix(w) && kDeterminers.count(previous) == 0) return true;
    previous = w;
  }
  return false;
}

LoadResult<AbductivePair> load_art(const std::filesystem::path& path, Split split, Format format) {
  if (format != Format::kCanonical && format != Format::kArtJsonl) {
    throw ValidationError("format " + std::string(to_string(format)) + " is not an ART format");
  }
  LoadResult<AbductivePair> out;
  out.stats.source = "art";

  std::vector<int> labels;
  if (format == Format::kArtJsonl) {
    const auto lp = art_labels_path(path);
    std::error_code ec;
    if (std::filesystem::is_regular_file(lp, ec)) {
      text::for_each_line(lp, [&](const std::string& line, std::size_t) {
        const auto t = text::trim(line);
        if (!t.empty()) labels.push_back(std::atoi(t.c_str()));
      });
    }
  }

  std::unordered_set<std::string> seen;
  std::unordered_map<std::string, std::size_t> repeats;
  std::size_t record_index = 0;
  for_each_json_line(path, out.stats, [&](const json& j, std::size_t n) {
    const std::size_t index = record_index++;
    AbductivePair p;
    p.split = split;
    p.obs1 = get_string(j, "obs1").value_or("");
    p.obs2 = get_string(j, "obs2").value_or("");
    if (format == Format::kCanonical) {
      p.id = id_of(j, "id", n);
      p.hypothesis = get_string(j, "hypothesis").value_or("");
      if (auto s = get_string(j, "split"); s && !s->empty()) {
        try {
          p.split = parse_split(*s);
        } catch (const ValidationError&) {
          return out.stats.reject("bad_split");
        }
      }
      p.knowledge_phrase = get_string(j, "knowledge_phrase");
    } else {
      const auto base = id_of(j, "story_id", n);
      const auto k = ++repeats[base];
      p.id = k == 1 ? base : base + "-" + std::to_string(k);
      if (auto h = get_string(j, "hyp")) {
        p.hypothesis = *h;
      } else {
        int label = 0;
        if (auto it = j.find("label"); it != j.end() && it->is_number_integer()) {
          label = it->get<int>();
        } else if (index < labels.size()) {
          label = labels[index];
        }
        if (label != 1 && label != 2) return out.stats.reject("missing_label");
        p.hypothesis = get_string(j, label == 1 ? "hyp1" : "hyp2").value_or("");
      }
    }
    if (p.obs1.empty()) return out.stats.reject("empty_obs1");
    if (p.obs2.empty()) return out.stats.reject("empty_obs2");
    if (p.hypothesis.empty()) return out.stats.reject("empty_hypothesis");
    if (!seen.insert(p.id).second) return out.stats.reject("duplicate_id");
    ++out.stats.loaded_count;
    out.records.push_back(std::move(p));
  });
  return out;
}

LoadResult<Enthymeme> load_d1(const std::filesystem::path& path, Format format) {
  LoadResult<Enthymeme> out;
  out.stats.source = "d1";
  EnthymemeSink sink(Source::kD1, out);
  if (format == Format::kCanonical) {
    load_canonical_enthymemes(path, sink, Source::kD1);
    return out;
  }
  if (format != Format::kArctTsv) {
    throw ValidationError("format " + std::string(to_string(format)) + " is not a D1 format");
  }
  check_readable(path);
  std::vector<std::string> header;
  std::unordered_map<std::string, std::size_t> col;
  text::for_each_line(path, [&](const std::string& line, std::size_t n) {
    if (text::trim(line).empty()) return;
    std::vector<std::string> cells;
    std::size_t pos = 0;
    while (true) {
      auto tab = line.find('\t', pos);
      cells.push_back(line.substr(pos, tab == std::string::npos ? std::string::npos : tab - pos));
      if (tab == std::string::npos) break;
      pos = tab + 1;
    }
    if (header.empty()) {
      header = cells;
      for (std::size_t i = 0; i < header.size(); ++i) col[text::trim(header[i])] = i;
      for (const char* required : {"#id", "warrant0", "warrant1", "correctLabelW0orW1", "reason", "claim"}) {
        if (col.count(required) == 0) {
          throw ValidationError(path.string() + ": header lacks column " + required);
        }
      }
      return;
    }
    if (cells.size() != header.size()) {
      return sink.stats().malformed(n, "expected " + std::to_string(header.size()) + " columns");
    }
    auto cell = [&](const char* name) { return text::collapse_whitespace(cells[col.at(name)]); };
    Enthymeme e;
    e.id = cell("#id");
    e.stated_premise = cell("reason");
    e.stated_claim = cell("claim");
    const auto label = cell("correctLabelW0orW1");
    if (label != "0" && label != "1") return sink.stats().reject("missing_field:correctLabelW0orW1");
    const auto warrant = cell(label == "0" ? "warrant0" : "warrant1");
    if (!warrant.empty()) e.gold_premises.push_back(warrant);
    for (const char* meta : {"debateTitle", "debateInfo"}) {
      if (col.count(meta) != 0) e.raw_meta[meta] = cell(meta);
    }
    sink.offer(std::move(e));
  });
  return out;
}

LoadResult<Enthymeme> load_d2(const std::filesystem::path& path, Format format) {
  LoadResult<Enthymeme> out;
  out.stats.source = "d2";
  EnthymemeSink sink(Source::kD2, out);
  if (format == Format::kCanonical) {
    load_canonical_enthymemes(path, sink, Source::kD2);
    return out;
  }
  if (format != Format::kD2Jsonl) {
    throw ValidationError("format " + std::string(to_string(format)) + " is not a D2 format");
  }
  for_each_json_line(path, sink.stats(), [&](const json& j, std::size_t n) {
    Enthymeme e;
    e.id = id_of(j, "id", n);
    e.stated_premise = get_string(j, "premise").value_or("");
    e.stated_claim = get_string(j, "claim").value_or("");
    e.gold_premises = get_string_list(j, j.contains("implicit_premises") ? "implicit_premises"
                                                                          : "implicit_premise");
    if (auto t = get_string(j, "topic")) e.raw_meta["topic"] = *t;
    sink.offer(std::move(e));
  });
  return out;
}

LoadResult<Enthymeme> load_d3(const std::filesystem::path& path, Format format) {
  LoadResult<Enthymeme> out;
  out.stats.source = "d3";
  EnthymemeSink sink(Source::kD3, out);
  if (format == Format::kCanonical) {
    load_canonical_enthymemes(path, sink, Source::kD3);
    return out;
  }
  if (format != Format::kD3Jsonl) {
    throw ValidationError("format " + std::string(to_string(format)) + " is not a D3 format");
  }
  for_each_json_line(path, sink.stats(), [&](const json& j, std::size_t n) {
    const auto relation = text::to_lower(get_string(j, "relation").value_or(""));
    if (relation.empty()) return sink.stats().reject("missing_field:relation");
    if (relation != "support") return sink.stats().reject("non_support_relation");
    auto premises = get_string_list(j, "implicit_premises");
    if (premises.empty()) return sink.stats().reject("missing_field:implicit_premises");
    if (premises.size() != 1) return sink.stats().reject("premise_chain");
    Enthymeme e;
    e.id = id_of(j, "id", n);
    e.stated_premise = get_string(j, "premise").value_or("");
    e.stated_claim = get_string(j, "claim").value_or("");
    e.gold_premises = std::move(premises);
    e.scheme = get_string(j, "scheme");
    if (e.scheme && e.scheme->empty()) e.scheme.reset();
    e.raw_meta["relation"] = relation;
    sink.offer(std::move(e));
  });
  return out;
}

LoadResult<Enthymeme> load_enthymemes(const std::filesystem::path& path) {
  LoadResult<Enthymeme> out;
  out.stats.source = "canonical";
  std::unordered_set<std::string> seen;
  for_each_json_line(path, out.stats, [&](const json& j, std::size_t n) {
    try {
      auto e = enthymeme_from_json(j);
      if (!seen.insert(e.id).second) return out.stats.reject("duplicate_id");
      ++out.stats.loaded_count;
      out.records.push_back(std::move(e));
    } catch (const ValidationError& err) {
      out.stats.malformed(n, err.what());
    }
  });
  return out;
}

json to_json(const AbductivePair& p) {
  json j = {{"id", p.id},
            {"obs1", p.obs1},
            {"obs2", p.obs2},
            {"hypothesis", p.hypothesis},
            {"split", to_string(p.split)}};
  if (p.knowledge_phrase) j["knowledge_phrase"] = *p.knowledge_phrase;
  return j;
}

json to_json(const Enthymeme& e) {
  json j = {{"id", e.id},
            {"stated_premise", e.stated_premise},
            {"stated_claim", e.stated_claim},
            {"gold_premises", e.gold_premises},
            {"source", to_string(e.source)}};
  if (e.scheme) j["scheme"] = *e.scheme;
  if (!e.raw_meta.empty()) j["raw_meta"] = e.raw_meta;
  if (e.knowledge_phrase) j["knowledge_phrase"] = *e.knowledge_phrase;
  return j;
}

json to_json(const CorpusStats& s) {
  return {{"source", s.source},
          {"pre_filter_count", s.pre_filter_count()},
          {"loaded_count", s.loaded_count},
          {"filtered_out_count", s.filtered_out_count},
          {"filter_reasons", s.filter_reasons},
          {"malformed_count", s.malformed_count}};
}

AbductivePair abductive_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("abductive record is not an object");
  AbductivePair p;
  try {
    p.id = j.at("id").get<std::string>();
    p.obs1 = j.at("obs1").get<std::string>();
    p.obs2 = j.at("obs2").get<std::string>();
    p.hypothesis = j.at("hypothesis").get<std::string>();
    p.split = j.contains("split") ? parse_split(j["split"].get<std::string>()) : Split::kTrain;
    if (j.contains("knowledge_phrase")) p.knowledge_phrase = j["knowledge_phrase"].get<std::string>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad abductive record: ") + e.what());
  }
  return p;
}

Enthymeme enthymeme_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("enthymeme record is not an object");
  Enthymeme e;
  try {
    e.id = j.at("id").get<std::string>();
    e.stated_premise = j.at("stated_premise").get<std::string>();
    e.stated_claim = j.at("stated_claim").get<std::string>();
    e.gold_premises = j.at("gold_premises").get<std::vector<std::string>>();
    e.source = parse_source(j.at("source").get<std::string>());
    if (j.contains("scheme") && !j["scheme"].is_null()) e.scheme = j["scheme"].get<std::string>();
    if (j.contains("raw_meta")) e.raw_meta = j["raw_meta"].get<std::map<std::string, std::string>>();
    if (j.contains("knowledge_phrase") && !j["knowledge_phrase"].is_null()) {
      e.knowledge_phrase = j["knowledge_phrase"].get<std::string>();
    }
  } catch (const json::exception& err) {
    throw ValidationError(std::string("bad enthymeme record: ") + err.what());
  }
  return e;
}

std::string to_jsonl(const std::vector<AbductivePair>& records) {
  std::string out;
  for (const auto& r : records) out += to_json(r).dump() + "\n";
  return out;
}

std::string to_jsonl(const std::vector<Enthymeme>& records) {
  std::string out;
  for (const auto& r : records) out += to_json(r).dump() + "\n";
  return out;
}

}  // namespace enthymeme::corpus
