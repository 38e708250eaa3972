#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace enthymeme::knowledge {

// The nine social-commonsense relations.
enum class Relation { kXIntent, kXNeed, kXAttr, kXEffect, kXWant, kXReact, kOReact, kOWant, kOEffect };

inline constexpr std::array<Relation, 9> kAllRelations = {
    Relation::kXIntent, Relation::kXNeed,  Relation::kXAttr,  Relation::kXEffect, Relation::kXWant,
    Relation::kXReact,  Relation::kOReact, Relation::kOWant,  Relation::kOEffect};

std::string_view to_string(Relation r);
std::optional<Relation> parse_relation(std::string_view s);

using InferenceKey = std::pair<std::size_t, Relation>;
using InferenceMap = std::map<InferenceKey, std::vector<std::string>>;

// Immutable once built.
class CommonsenseBundle {
 public:
  CommonsenseBundle(std::vector<std::string> discourse, InferenceMap inferences,
                    std::string backend_id, std::string retrieved_at);

  const std::vector<std::string>& discourse() const { return discourse_; }
  const InferenceMap& inferences() const { return inferences_; }
  const std::string& backend_id() const { return backend_id_; }
  const std::string& retrieved_at() const { return retrieved_at_; }

  // Ranked beams for a key, or nullptr when absent.
  const std::vector<std::string>* beams(std::size_t sentence, Relation r) const;

  nlohmann::json to_json() const;
  static CommonsenseBundle from_json(const nlohmann::json& j);

  bool operator==(const CommonsenseBundle&) const = default;

 private:
  std::vector<std::string> discourse_;
  InferenceMap inferences_;
  std::string backend_id_;
  std::string retrieved_at_;
};

class KnowledgeBackend {
 public:
  virtual ~KnowledgeBackend() = default;
  virtual std::string id() const = 0;
  // Raw backend call; validation happens in infer().
  virtual CommonsenseBundle fetch(const std::vector<std::string>& discourse) = 0;
};

/// Validated inference over a discourse: every sentence index the backend
/// returns must carry all nine relations with at least one non-empty beam.
CommonsenseBundle infer(const std::vector<std::string>& discourse, KnowledgeBackend& backend);

/// Top-ranked xIntent beam for the first sentence, sanitized for insertion
/// between delimiters.
std::string select_intent(const CommonsenseBundle& bundle);

// Collapses whitespace, drops delimiter literals and trailing sentence punctuation.
std::string sanitize_phrase(std::string_view phrase);

// Stable cache key: SHA-256 over the whitespace-normalized sentences.
std::string discourse_key(const std::vector<std::string>& discourse);

// Deterministic phrase templates keyed off the sentence content. Test-only.
class StubKnowledgeBackend final : public KnowledgeBackend {
 public:
  std::string id() const override { return "stub"; }
  CommonsenseBundle fetch(const std::vector<std::string>& discourse) override;
};

/// JSONL cache of bundles, one {"key","bundle"} object per line. Lookups
/// are shared; writes (through an optional upstream backend) are serialized
/// and appended to the file.
class CacheKnowledgeBackend final : public KnowledgeBackend {
 public:
  explicit CacheKnowledgeBackend(std::filesystem::path path,
                                 std::unique_ptr<KnowledgeBackend> upstream = nullptr);

  std::string id() const override { return "cache"; }
  CommonsenseBundle fetch(const std::vector<std::string>& discourse) override;

  void put(const CommonsenseBundle& bundle);
  std::size_t size() const;

 private:
  std::filesystem::path path_;
  std::unique_ptr<KnowledgeBackend> upstream_;
  std::mutex upstream_mutex_;
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, CommonsenseBundle> entries_;
};

/// HTTP client: POST {"sentences":[...]} -> {"inferences":{"<idx>":{"<rel>":[...]}}}.
class LiveKnowledgeBackend final : public KnowledgeBackend {
 public:
  explicit LiveKnowledgeBackend(std::string url, int timeout_seconds = 30);
  // Reads KNOWLEDGE_BACKEND_URL; throws BackendError when unset.
  static LiveKnowledgeBackend from_env();

  std::string id() const override { return "live:" + url_; }
  CommonsenseBundle fetch(const std::vector<std::string>& discourse) override;

 private:
  std::string url_;
  int timeout_seconds_;
};

/// "stub", "cache" (requires a cache path) or "live" (KNOWLEDGE_BACKEND_URL;
/// with a cache path the cache is consulted first and filled on misses).
std::unique_ptr<KnowledgeBackend> make_backend(std::string_view kind,
                                               const std::optional<std::filesystem::path>& cache_path);

}  // namespace enthymeme::knowledge
