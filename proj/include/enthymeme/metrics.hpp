#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "enthymeme/corpus.hpp"

namespace enthymeme::generator {
struct GeneratedPremise;
}

namespace enthymeme::metrics {

struct TokenSequence {
  std::vector<std::string> tokens;

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }
  bool operator==(const TokenSequence&) const = default;
};

/// Lowercases, splits on whitespace, then peels leading and trailing
/// punctuation off each word as one-character tokens. Word-internal
/// punctuation ("obama's") and currency/number prefixes ("$1") stay attached.
TokenSequence tokenize(std::string_view text);

/// Sentence-level BLEU with uniform weights over n = 1..max_n (max_n is 1 or 2).
/// Clipping uses the maximum count over references; the brevity penalty uses
/// the closest reference length (shorter on ties) and applies only when the
/// candidate is shorter. Zero matches for n >= 2 are add-one smoothed.
/// An empty candidate scores 0.
double bleu(const TokenSequence& candidate, std::span<const TokenSequence> references, int max_n);

using Vector = std::vector<double>;

class Embedder {
 public:
  virtual ~Embedder() = default;
  virtual std::string id() const = 0;
  // One vector per token.
  virtual std::vector<Vector> embed(const TokenSequence& seq) = 0;
  // Whether embed() may be called from several threads at once.
  virtual bool thread_safe() const { return false; }
};

/// Deterministic static embedder: each token vector is the sum of
/// pseudo-random vectors hashed from the token and its character trigrams,
/// so surface-similar words land close together.
class StaticHashEmbedder final : public Embedder {
 public:
  explicit StaticHashEmbedder(std::size_t dim = 64, std::uint64_t seed = 13);
  std::string id() const override { return "static-hash"; }
  std::vector<Vector> embed(const TokenSequence& seq) override;
  bool thread_safe() const override { return true; }
  Vector embed_token(std::string_view token) const;

 private:
  std::size_t dim_;
  std::uint64_t seed_;
};

/// Contextual-model adapter: POST {"tokens":[...]} -> {"vectors":[[...],...]}
/// to the URL in EMBEDDER_URL.
class HttpEmbedder final : public Embedder {
 public:
  explicit HttpEmbedder(std::string url, int timeout_seconds = 60);
  static HttpEmbedder from_env();
  std::string id() const override { return "model:" + url_; }
  std::vector<Vector> embed(const TokenSequence& seq) override;

 private:
  std::string url_;
  int timeout_seconds_;
};

struct BertScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Cosine similarity clamped to [0, 1]; identical vectors score exactly 1.
double clamped_cosine(const Vector& a, const Vector& b);

/// Greedy matching over precomputed token vectors. Throws ValidationError on
/// empty inputs or mismatched dimensions.
BertScore greedy_match(const std::vector<Vector>& candidate, const std::vector<Vector>& reference);

BertScore bertscore(const TokenSequence& candidate, const TokenSequence& reference, Embedder& embedder);
double bertscore_f1(const TokenSequence& candidate, const TokenSequence& reference, Embedder& embedder);

struct WilcoxonResult {
  double p_value = 1.0;
  double w_plus = 0.0;     // sum of ranks of positive differences
  std::size_t n = 0;       // pairs with non-zero difference
  bool exact = true;
};

/// Two-sided paired Wilcoxon signed-rank test on a - b. Zero differences are
/// dropped and tied magnitudes get midranks. Exact null distribution for
/// n <= 20, normal approximation with tie correction above that.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);

inline constexpr std::size_t kExactWilcoxonLimit = 20;

enum class System { kZeroShot, kArt, kArtParacomet };
std::string_view to_string(System s);
std::string_view display_name(System s);
System parse_system(std::string_view s);

struct ItemScore {
  std::string id;
  double bleu1 = 0.0;
  double bleu2 = 0.0;
  double bertscore_f1 = 0.0;
};

struct ScoreReport {
  corpus::Source dataset = corpus::Source::kD1;
  System system = System::kArt;
  double bleu1 = 0.0;  // percentages, [0, 100]
  double bleu2 = 0.0;
  double bertscore_f1 = 0.0;
  std::size_t n_items = 0;
  std::optional<double> p_value;
};

struct CorpusEvaluation {
  ScoreReport report;
  std::vector<ItemScore> items;  // in enthymeme order
};

/// Scores generations against multi-reference gold. Every enthymeme needs
/// exactly one generation and vice versa; all enthymemes must share a source
/// and all generations a setting.
CorpusEvaluation evaluate(const std::vector<generator::GeneratedPremise>& generations,
                          const std::vector<corpus::Enthymeme>& enthymemes, Embedder& embedder);

ScoreReport evaluate_corpus(const std::vector<generator::GeneratedPremise>& generations,
                            const std::vector<corpus::Enthymeme>& enthymemes, Embedder& embedder);

// Paired Wilcoxon over per-item BERTScore F1, aligned by item id.
double compare_systems(const CorpusEvaluation& a, const CorpusEvaluation& b);

nlohmann::json to_json(const ScoreReport& r);
// Aligned plain-text table, one row per (dataset, system), two decimals.
std::string format_table(const std::vector<ScoreReport>& reports);

}  // namespace enthymeme::metrics
