#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "enthymeme/corpus.hpp"
#include "enthymeme/knowledge.hpp"
#include "enthymeme/sequencing.hpp"

namespace enthymeme::metrics {
enum class System;
}

namespace enthymeme::generator {

enum class Setting { kZeroShot, kFineTuned, kFineTunedKnowledge };

std::string_view to_string(Setting s);
Setting parse_setting(std::string_view s);
metrics::System system_of(Setting s);
sequencing::InputSetting input_setting_for(Setting s);

struct GenerationConfig {
  int beam_width = 5;
  int max_output_tokens = 32;
  Setting setting = Setting::kFineTuned;
  std::string mask_literal = std::string(sequencing::kDefaultMask);
  std::optional<long long> seed;

  void validate() const;
  nlohmann::json to_json() const;
  static GenerationConfig from_json(const nlohmann::json& j);
};

struct GeneratedPremise {
  std::string enthymeme_id;
  Setting setting = Setting::kFineTuned;
  std::string full_argument;
  std::string implicit_premise;
  bool extraction_fallback = false;
  // Set when generation failed for this item; the premise is then empty.
  std::optional<std::string> error;

  bool operator==(const GeneratedPremise&) const = default;
};

nlohmann::json to_json(const GeneratedPremise& g);
GeneratedPremise generated_from_json(const nlohmann::json& j);
std::vector<GeneratedPremise> load_generations(const std::filesystem::path& path);
std::string to_jsonl(const std::vector<GeneratedPremise>& records);

struct TrainingConfig {
  int epochs = 3;
  double learning_rate = 3e-5;
  int batch_size = 8;
  long long seed = 13;
  std::filesystem::path checkpoint_dir;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainingConfig from_json(const nlohmann::json& j);
};

class GenerationBackend {
 public:
  virtual ~GenerationBackend() = default;
  virtual std::string id() const = 0;
  virtual bool loaded() const = 0;
  virtual bool supports(Setting setting) const = 0;
  // Raw decode; use generate() for the checked entry point.
  virtual std::string decode(const sequencing::EncoderInput& input, const GenerationConfig& config) = 0;
};

/// Checked generation: backend must be loaded and the input must satisfy the
/// invariant of its setting.
std::string generate(GenerationBackend& backend, const sequencing::EncoderInput& input,
                     const GenerationConfig& config);

// Throws ValidationError unless the input satisfies its setting's shape.
void check_input(const sequencing::EncoderInput& input, std::string_view mask_literal);

/// Echoes the stated sentences around a fixed "And since stub." premise.
class StubGenerationBackend final : public GenerationBackend {
 public:
  std::string id() const override { return "stub"; }
  bool loaded() const override { return true; }
  bool supports(Setting) const override { return true; }
  std::string decode(const sequencing::EncoderInput& input, const GenerationConfig& config) override;
};

/// Adapter for an external model server (e.g. a pre-trained masked
/// seq2seq model for zero-shot infilling). POST {"input","setting",
/// "beam_width","max_output_tokens","mask_literal","seed"} -> {"output"}.
class HttpGenerationBackend final : public GenerationBackend {
 public:
  explicit HttpGenerationBackend(std::string url, int timeout_seconds = 120);
  static HttpGenerationBackend from_env();  // GENERATION_BACKEND_URL
  std::string id() const override { return "http:" + url_; }
  bool loaded() const override { return true; }
  bool supports(Setting) const override { return true; }
  std::string decode(const sequencing::EncoderInput& input, const GenerationConfig& config) override;

 private:
  std::string url_;
  int timeout_seconds_;
};

/// Desk-scale sequence-to-sequence backend. Copies the stated sentences from
/// the encoder input and decodes the premise with beam search under a
/// mixture of a bigram model over training premises, a unigram model, and a
/// copy distribution over encoder tokens. Mixture weights are fitted by EM,
/// one pass per epoch.
class NgramSeq2SeqBackend final : public GenerationBackend {
 public:
  static constexpr std::size_t kMaxInputTokens = 512;

  NgramSeq2SeqBackend() = default;

  std::string id() const override { return "ngram-seq2seq"; }
  bool loaded() const override { return loaded_; }
  bool supports(Setting) const override { return true; }
  std::string decode(const sequencing::EncoderInput& input, const GenerationConfig& config) override;

  // Learns from (encoder input, decoder target) pairs; returns the mean
  // per-token negative log-likelihood after each epoch.
  std::vector<double> train(const std::vector<std::pair<sequencing::EncoderInput, sequencing::DecoderTarget>>& examples,
                            const TrainingConfig& config);

  void save(const std::filesystem::path& dir) const;
  static NgramSeq2SeqBackend load(const std::filesystem::path& dir);

  // Mixture weights (bigram, unigram, copy).
  const std::array<double, 3>& weights() const { return weights_; }

 private:
  struct Source {
    std::vector<std::string> first;
    std::vector<std::string> middle;  // knowledge phrase tokens, if any
    std::vector<std::string> second;
    std::string first_text;
    std::string second_text;
  };
  static Source parse_input(const sequencing::EncoderInput& input, std::string_view mask_literal);
  double prob(const std::string& prev, const std::string& word,
              const std::unordered_map<std::string, double>& copy) const;
  std::vector<std::string> beam_search(const Source& src, const GenerationConfig& config) const;

  bool loaded_ = false;
  std::array<double, 3> weights_{1.0 / 3, 1.0 / 3, 1.0 / 3};
  std::unordered_map<std::string, std::unordered_map<std::string, double>> bigrams_;
  std::unordered_map<std::string, double> context_totals_;
  std::unordered_map<std::string, double> unigrams_;
  double unigram_total_ = 0.0;
  std::vector<std::string> top_unigrams_;
};

// Training pairs for the (optionally knowledge-augmented) fine-tuning corpus.
// Throws ValidationError naming the first pair id missing from `knowledge`.
std::vector<std::pair<sequencing::EncoderInput, sequencing::DecoderTarget>> training_examples(
    const std::vector<corpus::AbductivePair>& pairs,
    const std::map<std::string, std::string>* knowledge);

/// Trains a backend and writes weights.json + manifest.json into
/// config.checkpoint_dir. The manifest records the config, corpus hash,
/// corpus size and per-epoch loss.
std::unique_ptr<NgramSeq2SeqBackend> fine_tune(const std::vector<corpus::AbductivePair>& pairs,
                                               const std::map<std::string, std::string>* knowledge,
                                               const TrainingConfig& config);

std::string corpus_sha256(const std::vector<corpus::AbductivePair>& pairs);

/// Builds the setting's input for each enthymeme, generates and extracts the
/// premise. Per-item failures become records with `error` set. The knowledge
/// backend is required for the knowledge setting unless every enthymeme
/// already carries a knowledge_phrase, and rejected for other settings.
std::vector<GeneratedPremise> generate_for_corpus(const std::vector<corpus::Enthymeme>& enthymemes,
                                                  GenerationBackend& backend,
                                                  const GenerationConfig& config,
                                                  knowledge::KnowledgeBackend* knowledge_backend);

/// Same, fanned out over `workers` independent backend handles built by the
/// factory; contiguous slices keep output order equal to input order.
std::vector<GeneratedPremise> generate_for_corpus_parallel(
    const std::vector<corpus::Enthymeme>& enthymemes,
    const std::function<std::unique_ptr<GenerationBackend>()>& factory,
    const GenerationConfig& config, knowledge::KnowledgeBackend* knowledge_backend,
    std::size_t workers);

}  // namespace enthymeme::generator
