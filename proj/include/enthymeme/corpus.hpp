#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace enthymeme::corpus {

enum class Split { kTrain, kValidation, kTest };
enum class Source { kD1, kD2, kD3 };

std::string_view to_string(Split s);
std::string_view to_string(Source s);
Split parse_split(std::string_view s);
Source parse_source(std::string_view s);

struct AbductivePair {
  std::string id;
  std::string obs1;
  std::string obs2;
  std::string hypothesis;
  Split split = Split::kTrain;
  std::optional<std::string> knowledge_phrase;

  bool operator==(const AbductivePair&) const = default;
};

struct Enthymeme {
  std::string id;
  std::string stated_premise;
  std::string stated_claim;
  std::vector<std::string> gold_premises;
  Source source = Source::kD1;
  std::optional<std::string> scheme;  // D3 only
  std::map<std::string, std::string> raw_meta;
  std::optional<std::string> knowledge_phrase;

  bool operator==(const Enthymeme&) const = default;
};

struct CorpusStats {
  std::string source;
  std::size_t loaded_count = 0;
  std::size_t filtered_out_count = 0;
  std::map<std::string, std::size_t> filter_reasons;
  // Lines that could not be parsed at all; not part of the filter accounting.
  std::size_t malformed_count = 0;
  std::vector<std::string> malformed_lines;

  std::size_t pre_filter_count() const { return loaded_count + filtered_out_count; }
  void reject(const std::string& reason);
  void malformed(std::size_t line_number, const std::string& why);
};

template <class T>
struct LoadResult {
  std::vector<T> records;
  CorpusStats stats;
};

// Raw release layouts accepted by the loaders. `kCanonical` is the
// normalized JSONL every loader can also read back.
enum class Format {
  kCanonical,
  kArtJsonl,   // {"story_id","obs1","obs2","hyp1","hyp2"} + labels, or {"obs1","obs2","hyp"}
  kArctTsv,    // tab-separated with header: #id warrant0 warrant1 correctLabelW0orW1 reason claim ...
  kD2Jsonl,    // {"id","claim","premise","implicit_premises":[...]}
  kD3Jsonl,    // {"id","premise","claim","relation","implicit_premises":[...],"scheme"}
};

Format parse_format(std::string_view s);
std::string_view to_string(Format f);

/// Heuristic full-sentence filter: 3..60 tokens, exactly one sentence, not
/// shouting/noise, and at least one finite-verb candidate (auxiliary, copula,
/// modal, or an -s/-ed/-ing form not directly after a determiner).
bool is_well_formed_sentence(std::string_view text);

LoadResult<AbductivePair> load_art(const std::filesystem::path& path, Split split,
                                   Format format = Format::kCanonical);
LoadResult<Enthymeme> load_d1(const std::filesystem::path& path, Format format = Format::kCanonical);
LoadResult<Enthymeme> load_d2(const std::filesystem::path& path, Format format = Format::kCanonical);
LoadResult<Enthymeme> load_d3(const std::filesystem::path& path, Format format = Format::kCanonical);

// Reads canonical enthymeme JSONL regardless of source (used downstream).
LoadResult<Enthymeme> load_enthymemes(const std::filesystem::path& path);

nlohmann::json to_json(const AbductivePair& p);
nlohmann::json to_json(const Enthymeme& e);
nlohmann::json to_json(const CorpusStats& s);
AbductivePair abductive_from_json(const nlohmann::json& j);
Enthymeme enthymeme_from_json(const nlohmann::json& j);

// One compact JSON object per line, trailing newline.
std::string to_jsonl(const std::vector<AbductivePair>& records);
std::string to_jsonl(const std::vector<Enthymeme>& records);

}  // namespace enthymeme::corpus
