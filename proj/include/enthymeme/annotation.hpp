#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "enthymeme/corpus.hpp"
#include "enthymeme/generator.hpp"
#include "enthymeme/metrics.hpp"

namespace enthymeme::annotation {

struct AnnotationItem {
  std::string item_id;
  std::string enthymeme_id;
  std::string stated_premise;
  std::string stated_claim;
  std::string candidate_premise;
  metrics::System system = metrics::System::kArt;
  corpus::Source dataset = corpus::Source::kD1;
  int required_judges = 3;

  void validate() const;
  bool operator==(const AnnotationItem&) const = default;
};

struct JudgmentRecord {
  std::string item_id;
  std::string annotator_id;
  bool plausible = false;
  std::string submitted_at;

  bool operator==(const JudgmentRecord&) const = default;
};

struct GroupResult {
  corpus::Source dataset = corpus::Source::kD1;
  metrics::System system = metrics::System::kArt;
  double plausible_fraction = 0.0;
  std::size_t n_items = 0;
  std::optional<double> alpha;  // agreement within the group, when defined
};

struct AggregateReport {
  std::vector<GroupResult> groups;  // ordered by (dataset, system)
  std::optional<double> alpha;      // over the full judgment matrix
  std::size_t n_judgments = 0;
};

nlohmann::json to_json(const AnnotationItem& item);
AnnotationItem item_from_json(const nlohmann::json& j);
nlohmann::json to_json(const JudgmentRecord& r);
nlohmann::json to_json(const AggregateReport& r);
std::vector<AnnotationItem> load_batch(const std::filesystem::path& path);
std::string to_jsonl(const std::vector<AnnotationItem>& items);

/// Seeded uniform sample of `sample_size` enthymemes per dataset (without
/// replacement), one item per sampled enthymeme and generating system.
/// Items come back sorted by item_id.
std::vector<AnnotationItem> create_batch(const std::vector<generator::GeneratedPremise>& generations,
                                         const std::vector<corpus::Enthymeme>& enthymemes,
                                         std::size_t sample_size, std::uint64_t seed,
                                         int required_judges = 3);

// Strict majority over an odd, non-empty vote list.
bool majority_vote(std::span<const bool> judgments);

using JudgmentMatrix = std::vector<std::vector<std::optional<bool>>>;  // item x annotator

/// Krippendorff's alpha for nominal data via the coincidence matrix. Units
/// with fewer than two values are not pairable and are ignored.
double krippendorff_alpha(const JudgmentMatrix& judgments);

/// Majority-vote plausibility per (dataset, system) and alpha over the
/// full matrix. With require_complete every item needs required_judges
/// judgments; otherwise incomplete items are left out.
AggregateReport aggregate(const std::vector<AnnotationItem>& batch,
                          const std::vector<JudgmentRecord>& judgments, bool require_complete = true);

std::string format_table(const AggregateReport& report);

struct Ack {
  bool duplicate = false;
  JudgmentRecord record;
};

/// Judgment collection state backed by an append-only JSONL journal
/// ({"type":"served"|"judgment",...}). State is rebuilt by replay on
/// construction. All methods are safe to call concurrently; journal
/// appends happen under a single lock.
class AnnotationStore {
 public:
  AnnotationStore(std::vector<AnnotationItem> batch, std::filesystem::path journal);

  // Unjudged item below its judge cap, least-judged first, ties by item_id.
  std::optional<AnnotationItem> next_item(const std::string& annotator_id);

  // Throws NotFoundError for unknown items, ValidationError when the item was
  // never served to the annotator, ConflictError on a conflicting duplicate or
  // a full item.
  Ack submit_judgment(const JudgmentRecord& record);

  AggregateReport report(bool require_complete = false) const;
  std::vector<JudgmentRecord> judgments() const;
  const std::vector<AnnotationItem>& batch() const { return batch_; }
  std::size_t judgment_count() const;

 private:
  void append(const nlohmann::json& event);
  void apply_served(const std::string& item_id, const std::string& annotator_id);

  std::vector<AnnotationItem> batch_;
  std::map<std::string, std::size_t> index_;
  std::filesystem::path journal_;
  mutable std::mutex mutex_;
  std::map<std::pair<std::string, std::string>, JudgmentRecord> judged_;  // (item, annotator)
  std::map<std::string, std::size_t> counts_;
  std::map<std::pair<std::string, std::string>, bool> served_;
  std::vector<JudgmentRecord> order_;
};

}  // namespace enthymeme::annotation
