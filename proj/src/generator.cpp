#include "enthymeme/generator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <set>
#include <thread>

#include "enthymeme/error.hpp"
#include "enthymeme/metrics.hpp"
#include "enthymeme/text.hpp"
#include "http_json.hpp"

namespace enthymeme::generator {

using nlohmann::json;
using sequencing::EncoderInput;
using sequencing::InputSetting;

namespace {

constexpr std::string_view kBos = "<s>";
constexpr std::string_view kEos = "</s>";
constexpr double kUnigramAlpha = 0.1;
constexpr std::size_t kUnigramCandidates = 50;

std::string ensure_period(std::string s) {
  if (!s.empty() && s.back() != '.' && s.back() != '!' && s.back() != '?') s.push_back('.');
  return s;
}

std::vector<std::string> split_on(std::string_view s, std::string_view sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    auto next = s.find(sep, pos);
    out.emplace_back(s.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
    if (next == std::string_view::npos) break;
    pos = next + sep.size();
  }
  return out;
}

bool is_punct_token(const std::string& t) {
  return t.size() == 1 && std::ispunct(static_cast<unsigned char>(t[0])) != 0 && t != "$";
}

std::string detokenize(const std::vector<std::string>& toks) {
  std::string out;
  for (const auto& t : toks) {
    if (!out.empty() && !is_punct_token(t)) out.push_back(' ');
    out += t;
  }
  return out;
}

// Premise tokens of a decoder target: the middle sentence without the marker
// and without trailing sentence punctuation.
std::vector<std::string> target_premise_tokens(const sequencing::DecoderTarget& target) {
  const auto sentences = sequencing::split_sentences(target.text);
  for (const auto& s : sentences) {
    if (text::to_lower(s.substr(0, sequencing::kMarker.size() + 1)) == "and since ") {
      auto toks = metrics::tokenize(s.substr(sequencing::kMarker.size() + 1)).tokens;
      while (!toks.empty() && (toks.back() == "." || toks.back() == "!" || toks.back() == "?")) {
        toks.pop_back();
      }
      return toks;
    }
  }
  throw ValidationError("decoder target lacks the discourse marker: " + target.text);
}

std::unordered_map<std::string, double> copy_distribution(const std::vector<std::string>& a,
                                                          const std::vector<std::string>& b,
                                                          const std::vector<std::string>& c) {
  std::unordered_map<std::string, double> out;
  double total = 0.0;
  for (const auto* side : {&a, &b, &c}) {
    for (const auto& t : *side) {
      out[t] += 1.0;
      total += 1.0;
    }
  }
  if (total > 0.0) {
    for (auto& [_, v] : out) v /= total;
  }
  return out;
}

}  // namespace

std::string_view to_string(Setting s) {
  switch (s) {
    case Setting::kZeroShot: return "zero_shot";
    case Setting::kFineTuned: return "fine_tuned";
    case Setting::kFineTunedKnowledge: return "fine_tuned_knowledge";
  }
  return "fine_tuned";
}

Setting parse_setting(std::string_view s) {
  if (s == "zero_shot") return Setting::kZeroShot;
  if (s == "fine_tuned") return Setting::kFineTuned;
  if (s == "fine_tuned_knowledge") return Setting::kFineTunedKnowledge;
  throw ValidationError("unknown setting: " + std::string(s));
}

metrics::System system_of(Setting s) {
  switch (s) {
    case Setting::kZeroShot: return metrics::System::kZeroShot;
    case Setting::kFineTuned: return metrics::System::kArt;
    case Setting::kFineTunedKnowledge: return metrics::System::kArtParacomet;
  }
  return metrics::System::kArt;
}

InputSetting input_setting_for(Setting s) {
  switch (s) {
    case Setting::kZeroShot: return InputSetting::kZeroShot;
    case Setting::kFineTuned: return InputSetting::kPlain;
    case Setting::kFineTunedKnowledge: return InputSetting::kKnowledge;
  }
  return InputSetting::kPlain;
}

void GenerationConfig::validate() const {
  if (beam_width < 1) throw ValidationError("beam_width must be >= 1");
  if (max_output_tokens < 1) throw ValidationError("max_output_tokens must be >= 1");
  if (mask_literal.empty()) throw ValidationError("mask_literal must be non-empty");
}

json GenerationConfig::to_json() const {
  json j = {{"beam_width", beam_width},
            {"max_output_tokens", max_output_tokens},
            {"setting", generator::to_string(setting)},
            {"mask_literal", mask_literal}};
  j["seed"] = seed ? json(*seed) : json(nullptr);
  return j;
}

GenerationConfig GenerationConfig::from_json(const json& j) {
  GenerationConfig c;
  c.beam_width = j.value("beam_width", c.beam_width);
  c.max_output_tokens = j.value("max_output_tokens", c.max_output_tokens);
  if (j.contains("setting")) c.setting = parse_setting(j["setting"].get<std::string>());
  c.mask_literal = j.value("mask_literal", c.mask_literal);
  if (j.contains("seed") && !j["seed"].is_null()) c.seed = j["seed"].get<long long>();
  c.validate();
  return c;
}

json to_json(const GeneratedPremise& g) {
  json j = {{"enthymeme_id", g.enthymeme_id},
            {"setting", to_string(g.setting)},
            {"full_argument", g.full_argument},
            {"implicit_premise", g.implicit_premise},
            {"extraction_fallback", g.extraction_fallback}};
  if (g.error) j["error"] = *g.error;
  return j;
}

GeneratedPremise generated_from_json(const json& j) {
  GeneratedPremise g;
  try {
    g.enthymeme_id = j.at("enthymeme_id").get<std::string>();
    g.setting = parse_setting(j.at("setting").get<std::string>());
    g.full_argument = j.value("full_argument", std::string());
    g.implicit_premise = j.value("implicit_premise", std::string());
    g.extraction_fallback = j.value("extraction_fallback", false);
    if (j.contains("error") && !j["error"].is_null()) g.error = j["error"].get<std::string>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad generation record: ") + e.what());
  }
  if (!g.error && g.implicit_premise.empty()) {
    throw ValidationError("generation record " + g.enthymeme_id + " has an empty premise");
  }
  return g;
}

std::vector<GeneratedPremise> load_generations(const std::filesystem::path& path) {
  std::vector<GeneratedPremise> out;
  text::for_each_line(path, [&](const std::string& line, std::size_t n) {
    if (text::trim(line).empty()) return;
    try {
      out.push_back(generated_from_json(json::parse(line)));
    } catch (const json::parse_error& e) {
      throw ValidationError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  });
  return out;
}

std::string to_jsonl(const std::vector<GeneratedPremise>& records) {
  std::string out;
  for (const auto& r : records) out += to_json(r).dump() + "\n";
  return out;
}

void TrainingConfig::validate() const {
  if (epochs < 1) throw ValidationError("epochs must be positive");
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
  if (batch_size < 1) throw ValidationError("batch_size must be positive");
  if (checkpoint_dir.empty()) throw ValidationError("checkpoint_dir must be set");
}

json TrainingConfig::to_json() const {
  return {{"epochs", epochs},
          {"learning_rate", learning_rate},
          {"batch_size", batch_size},
          {"seed", seed},
          {"checkpoint_dir", checkpoint_dir.string()}};
}

TrainingConfig TrainingConfig::from_json(const json& j) {
  TrainingConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  if (j.contains("checkpoint_dir")) c.checkpoint_dir = j["checkpoint_dir"].get<std::string>();
  return c;
}

void check_input(const EncoderInput& input, std::string_view mask_literal) {
  const auto seps = text::count_occurrences(input.text, sequencing::kDelimiter);
  switch (input.setting) {
    case InputSetting::kPlain:
      if (seps != 1) throw ValidationError("plain input must contain exactly one delimiter");
      break;
    case InputSetting::kKnowledge:
      if (seps != 2) throw ValidationError("knowledge input must contain exactly two delimiters");
      break;
    case InputSetting::kZeroShot: {
      const std::string slot = " " + std::string(sequencing::kMarker) + " " + std::string(mask_literal) + ". ";
      if (text::count_occurrences(input.text, mask_literal) != 1 ||
          input.text.find(slot) == std::string::npos) {
        throw ValidationError("zero-shot input must contain the masked marker slot exactly once");
      }
      break;
    }
  }
}

std::string generate(GenerationBackend& backend, const EncoderInput& input, const GenerationConfig& config) {
  if (!backend.loaded()) throw LifecycleError("generation backend " + backend.id() + " is not loaded");
  config.validate();
  if (input.setting != input_setting_for(config.setting)) {
    throw ValidationError("input setting " + std::string(sequencing::to_string(input.setting)) +
                          " does not match " + std::string(to_string(config.setting)));
  }
  check_input(input, config.mask_literal);
  return backend.decode(input, config);
}

std::string StubGenerationBackend::decode(const EncoderInput& input, const GenerationConfig& config) {
  std::string first, second;
  if (input.setting == InputSetting::kZeroShot) {
    const std::string slot = " " + std::string(sequencing::kMarker) + " " + config.mask_literal + ". ";
    const auto pos = input.text.find(slot);
    first = input.text.substr(0, pos);
    second = input.text.substr(pos + slot.size());
  } else {
    const auto parts = split_on(input.text, " " + std::string(sequencing::kDelimiter) + " ");
    first = parts.front();
    second = parts.back();
  }
  return ensure_period(first) + " And since stub. " + second;
}

HttpGenerationBackend::HttpGenerationBackend(std::string url, int timeout_seconds)
    : url_(std::move(url)), timeout_seconds_(timeout_seconds) {}

HttpGenerationBackend HttpGenerationBackend::from_env() {
  const char* url = std::getenv("GENERATION_BACKEND_URL");
  if (url == nullptr || *url == '\0') throw BackendError("GENERATION_BACKEND_URL is not set", false);
  return HttpGenerationBackend(url);
}

std::string HttpGenerationBackend::decode(const EncoderInput& input, const GenerationConfig& config) {
  json body = config.to_json();
  body["input"] = input.text;
  const auto reply = detail::post_json(url_, body, timeout_seconds_);
  if (!reply.is_object() || !reply.contains("output") || !reply["output"].is_string()) {
    throw BackendError("generation backend reply lacks \"output\"", false);
  }
  return reply["output"].get<std::string>();
}

// --- NgramSeq2SeqBackend -------------------------------------------------

NgramSeq2SeqBackend::Source NgramSeq2SeqBackend::parse_input(const EncoderInput& input,
                                                             std::string_view mask_literal) {
  Source src;
  std::vector<std::string> parts;
  if (input.setting == InputSetting::kZeroShot) {
    const std::string slot = " " + std::string(sequencing::kMarker) + " " + std::string(mask_literal) + ". ";
    const auto pos = input.text.find(slot);
    if (pos == std::string::npos) throw ValidationError("zero-shot input lacks the mask slot");
    parts = {input.text.substr(0, pos), input.text.substr(pos + slot.size())};
  } else {
    parts = split_on(input.text, " " + std::string(sequencing::kDelimiter) + " ");
  }
  if (parts.size() < 2 || parts.size() > 3) throw ValidationError("unexpected encoder input shape");
  src.first_text = text::trim(parts.front());
  src.second_text = text::trim(parts.back());
  src.first = metrics::tokenize(src.first_text).tokens;
  src.second = metrics::tokenize(src.second_text).tokens;
  if (parts.size() == 3) src.middle = metrics::tokenize(parts[1]).tokens;
  const auto length = src.first.size() + src.middle.size() + src.second.size();
  if (length > kMaxInputTokens) {
    throw TruncationError("encoder input has " + std::to_string(length) + " tokens, limit " +
                              std::to_string(kMaxInputTokens),
                          length);
  }
  return src;
}

double NgramSeq2SeqBackend::prob(const std::string& prev, const std::string& word,
                                 const std::unordered_map<std::string, double>& copy) const {
  double bi = 0.0;
  if (auto ctx = bigrams_.find(prev); ctx != bigrams_.end()) {
    if (auto it = ctx->second.find(word); it != ctx->second.end()) {
      bi = it->second / context_totals_.at(prev);
    }
  }
  const double vocab = static_cast<double>(unigrams_.size()) + 1.0;
  double uni_count = 0.0;
  if (auto it = unigrams_.find(word); it != unigrams_.end()) uni_count = it->second;
  const double uni = (uni_count + kUnigramAlpha) / (unigram_total_ + kUnigramAlpha * vocab);
  double cp = 0.0;
  if (auto it = copy.find(word); it != copy.end()) cp = it->second;
  return weights_[0] * bi + weights_[1] * uni + weights_[2] * cp;
}

std::vector<double> NgramSeq2SeqBackend::train(
    const std::vector<std::pair<EncoderInput, sequencing::DecoderTarget>>& examples,
    const TrainingConfig& config) {
  if (config.epochs < 1) throw ValidationError("epochs must be positive");
  if (examples.empty()) throw ValidationError("training corpus is empty");

  struct Prepared {
    std::vector<std::string> target;  // <s> w1 .. wn </s>
    std::unordered_map<std::string, double> copy;
  };
  std::vector<Prepared> data;
  bigrams_.clear();
  unigrams_.clear();
  context_totals_.clear();
  unigram_total_ = 0.0;
  for (const auto& [input, target] : examples) {
    const auto src = parse_input(input, sequencing::kDefaultMask);
    Prepared p;
    p.target.emplace_back(kBos);
    for (auto& t : target_premise_tokens(target)) p.target.push_back(std::move(t));
    p.target.emplace_back(kEos);
    p.copy = copy_distribution(src.first, src.middle, src.second);
    for (std::size_t i = 1; i < p.target.size(); ++i) {
      bigrams_[p.target[i - 1]][p.target[i]] += 1.0;
      context_totals_[p.target[i - 1]] += 1.0;
      unigrams_[p.target[i]] += 1.0;
      unigram_total_ += 1.0;
    }
    data.push_back(std::move(p));
  }

  // Deleted (leave-one-out) estimates keep EM from handing all mass to the
  // in-sample bigram counts.
  const double vocab = static_cast<double>(unigrams_.size()) + 1.0;
  auto components = [&](const std::string& prev, const std::string& word,
                        const std::unordered_map<std::string, double>& copy) {
    std::array<double, 3> c{0.0, 0.0, 0.0};
    const double ctx = context_totals_.at(prev) - 1.0;
    if (ctx > 0.0) c[0] = (bigrams_.at(prev).at(word) - 1.0) / ctx;
    c[1] = (unigrams_.at(word) - 1.0 + kUnigramAlpha) / (unigram_total_ - 1.0 + kUnigramAlpha * vocab);
    if (auto it = copy.find(word); it != copy.end()) c[2] = it->second;
    return c;
  };
  auto loss_at = [&](const std::array<double, 3>& w) {
    double nll = 0.0;
    for (const auto& p : data) {
      for (std::size_t i = 1; i < p.target.size(); ++i) {
        const auto c = components(p.target[i - 1], p.target[i], p.copy);
        nll -= std::log(w[0] * c[0] + w[1] * c[1] + w[2] * c[2]);
      }
    }
    return nll / unigram_total_;
  };

  weights_ = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  std::vector<double> losses;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::array<double, 3> resp{0.0, 0.0, 0.0};
    for (const auto& p : data) {
      for (std::size_t i = 1; i < p.target.size(); ++i) {
        const auto c = components(p.target[i - 1], p.target[i], p.copy);
        const double mix = weights_[0] * c[0] + weights_[1] * c[1] + weights_[2] * c[2];
        for (int k = 0; k < 3; ++k) resp[k] += weights_[k] * c[k] / mix;
      }
    }
    for (int k = 0; k < 3; ++k) weights_[k] = resp[k] / unigram_total_;
    losses.push_back(loss_at(weights_));
  }

  std::vector<std::pair<double, std::string>> ranked;
  for (const auto& [w, c] : unigrams_) {
    if (w != kEos) ranked.emplace_back(-c, w);
  }
  std::sort(ranked.begin(), ranked.end());
  top_unigrams_.clear();
  for (std::size_t i = 0; i < ranked.size() && i < kUnigramCandidates; ++i) {
    top_unigrams_.push_back(ranked[i].second);
  }
  loaded_ = true;
  return losses;
}

std::vector<std::string> NgramSeq2SeqBackend::beam_search(const Source& src,
                                                          const GenerationConfig& config) const {
  struct Hyp {
    std::vector<std::string> toks;  // excludes <s>
    double logp = 0.0;
  };
  const auto copy = copy_distribution(src.first, src.middle, src.second);
  std::set<std::string> copy_words;
  for (const auto& [w, _] : copy) copy_words.insert(w);

  const auto width = static_cast<std::size_t>(config.beam_width);
  std::vector<Hyp> active{Hyp{}};
  std::vector<Hyp> finished;
  auto normalized = [](const Hyp& h) { return h.logp / static_cast<double>(h.toks.size() + 1); };

  for (int step = 0; step < config.max_output_tokens && !active.empty(); ++step) {
    std::vector<std::pair<Hyp, bool>> expansions;
    for (const auto& h : active) {
      const std::string prev = h.toks.empty() ? std::string(kBos) : h.toks.back();
      std::set<std::string> candidates(copy_words.begin(), copy_words.end());
      candidates.insert(top_unigrams_.begin(), top_unigrams_.end());
      if (auto ctx = bigrams_.find(prev); ctx != bigrams_.end()) {
        for (const auto& [w, _] : ctx->second) candidates.insert(w);
      }
      candidates.erase(std::string(kBos));
      if (h.toks.size() < 2) candidates.erase(std::string(kEos));
      else candidates.insert(std::string(kEos));

      for (const auto& w : candidates) {
        // No stuttering and no repeated bigrams within a hypothesis.
        bool repeats = !h.toks.empty() && w == prev;
        for (std::size_t i = 0; i + 1 < h.toks.size() && !repeats; ++i) {
          repeats = h.toks[i] == prev && h.toks[i + 1] == w;
        }
        if (repeats) continue;
        const double p = prob(prev, w, copy);
        if (p <= 0.0) continue;
        Hyp next = h;
        next.logp += std::log(p);
        const bool done = w == kEos;
        if (!done) next.toks.push_back(w);
        expansions.emplace_back(std::move(next), done);
      }
    }
    std::sort(expansions.begin(), expansions.end(), [](const auto& a, const auto& b) {
      if (a.first.logp != b.first.logp) return a.first.logp > b.first.logp;
      if (a.second != b.second) return a.second;
      return a.first.toks < b.first.toks;
    });
    active.clear();
    for (std::size_t i = 0; i < expansions.size() && i < width; ++i) {
      auto& [h, done] = expansions[i];
      if (done) finished.push_back(std::move(h));
      else active.push_back(std::move(h));
    }
    if (finished.size() >= width) break;
  }
  auto& pool = finished.empty() ? active : finished;
  if (pool.empty()) return {};
  const auto best = std::max_element(pool.begin(), pool.end(), [&](const Hyp& a, const Hyp& b) {
    const double na = normalized(a), nb = normalized(b);
    if (na != nb) return na < nb;
    return a.toks > b.toks;
  });
  return best->toks;
}

std::string NgramSeq2SeqBackend::decode(const EncoderInput& input, const GenerationConfig& config) {
  if (!loaded_) throw LifecycleError("ngram backend has no trained weights");
  const auto src = parse_input(input, config.mask_literal);
  auto toks = beam_search(src, config);
  if (toks.empty()) toks = {"it", "follows"};
  return ensure_period(src.first_text) + " And since " + detokenize(toks) + ". " + src.second_text;
}

void NgramSeq2SeqBackend::save(const std::filesystem::path& dir) const {
  if (!loaded_) throw LifecycleError("cannot save an untrained backend");
  json bigrams = json::object();
  for (const auto& [prev, nexts] : bigrams_) {
    json row = json::object();
    for (const auto& [w, c] : nexts) row[w] = c;
    bigrams[prev] = std::move(row);
  }
  json unigrams = json::object();
  for (const auto& [w, c] : unigrams_) unigrams[w] = c;
  const json weights = {{"format", "ngram-seq2seq/1"},
                        {"mixture", weights_},
                        {"unigrams", std::move(unigrams)},
                        {"bigrams", std::move(bigrams)}};
  text::write_file_atomic(dir / "weights.json", weights.dump() + "\n");
}

NgramSeq2SeqBackend NgramSeq2SeqBackend::load(const std::filesystem::path& dir) {
  const auto path = dir / "weights.json";
  json j;
  try {
    j = json::parse(text::read_file(path));
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  if (j.value("format", std::string()) != "ngram-seq2seq/1") {
    throw ValidationError(path.string() + ": unsupported checkpoint format");
  }
  NgramSeq2SeqBackend b;
  try {
    b.weights_ = j.at("mixture").get<std::array<double, 3>>();
    for (const auto& [w, c] : j.at("unigrams").items()) {
      b.unigrams_[w] = c.get<double>();
      b.unigram_total_ += c.get<double>();
    }
    for (const auto& [prev, row] : j.at("bigrams").items()) {
      for (const auto& [w, c] : row.items()) {
        b.bigrams_[prev][w] = c.get<double>();
        b.context_totals_[prev] += c.get<double>();
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  std::vector<std::pair<double, std::string>> ranked;
  for (const auto& [w, c] : b.unigrams_) {
    if (w != kEos) ranked.emplace_back(-c, w);
  }
  std::sort(ranked.begin(), ranked.end());
  for (std::size_t i = 0; i < ranked.size() && i < kUnigramCandidates; ++i) {
    b.top_unigrams_.push_back(ranked[i].second);
  }
  b.loaded_ = true;
  return b;
}

// --- training harness ----------------------------------------------------

std::vector<std::pair<EncoderInput, sequencing::DecoderTarget>> training_examples(
    const std::vector<corpus::AbductivePair>& pairs, const std::map<std::string, std::string>* knowledge) {
  std::vector<std::pair<EncoderInput, sequencing::DecoderTarget>> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    std::optional<std::string> phrase;
    if (knowledge != nullptr) {
      auto it = knowledge->find(p.id);
      if (it == knowledge->end()) throw ValidationError("knowledge map does not cover pair id " + p.id);
      phrase = knowledge::sanitize_phrase(it->second);
    }
    auto input = phrase ? sequencing::build_encoder_input(p.obs1, p.obs2, std::string_view(*phrase))
                        : sequencing::build_encoder_input(p.obs1, p.obs2);
    out.emplace_back(std::move(input), sequencing::build_decoder_target(p.obs1, p.hypothesis, p.obs2));
  }
  return out;
}

std::string corpus_sha256(const std::vector<corpus::AbductivePair>& pairs) {
  return text::sha256_hex(corpus::to_jsonl(pairs));
}

std::unique_ptr<NgramSeq2SeqBackend> fine_tune(const std::vector<corpus::AbductivePair>& pairs,
                                               const std::map<std::string, std::string>* knowledge,
                                               const TrainingConfig& config) {
  config.validate();
  if (pairs.empty()) throw ValidationError("training corpus is empty");
  const auto examples = training_examples(pairs, knowledge);

  std::error_code ec;
  std::filesystem::create_directories(config.checkpoint_dir, ec);
  if (ec || !std::filesystem::is_directory(config.checkpoint_dir)) {
    throw IoError("checkpoint_dir is not writable: " + config.checkpoint_dir.string());
  }
  {
    const auto probe = config.checkpoint_dir / ".write-probe";
    std::ofstream out(probe);
    if (!out) throw IoError("checkpoint_dir is not writable: " + config.checkpoint_dir.string());
    out.close();
    std::filesystem::remove(probe, ec);
  }

  auto backend = std::make_unique<NgramSeq2SeqBackend>();
  const auto losses = backend->train(examples, config);
  backend->save(config.checkpoint_dir);

  const json manifest = {{"backend", backend->id()},
                         {"config", config.to_json()},
                         {"corpus_sha256", corpus_sha256(pairs)},
                         {"corpus_size", pairs.size()},
                         {"knowledge", knowledge != nullptr},
                         {"mixture_weights", backend->weights()},
                         {"loss", losses},
                         {"created_at", text::utc_timestamp()}};
  text::write_file_atomic(config.checkpoint_dir / "manifest.json", manifest.dump(2) + "\n");
  return backend;
}

// --- pipeline ------------------------------------------------------------

std::vector<GeneratedPremise> generate_for_corpus(const std::vector<corpus::Enthymeme>& enthymemes,
                                                  GenerationBackend& backend,
                                                  const GenerationConfig& config,
                                                  knowledge::KnowledgeBackend* knowledge_backend) {
  config.validate();
  if (!backend.supports(config.setting)) {
    throw ValidationError("backend " + backend.id() + " does not support setting " +
                          std::string(to_string(config.setting)));
  }
  if (!backend.loaded()) throw LifecycleError("generation backend " + backend.id() + " is not loaded");
  const bool needs_knowledge = config.setting == Setting::kFineTunedKnowledge;
  if (!needs_knowledge && knowledge_backend != nullptr) {
    throw ValidationError("a knowledge backend is only valid for the knowledge setting");
  }
  if (needs_knowledge && knowledge_backend == nullptr) {
    const bool all_precomputed = std::all_of(enthymemes.begin(), enthymemes.end(),
                                             [](const corpus::Enthymeme& e) { return e.knowledge_phrase.has_value(); });
    if (!all_precomputed) throw ValidationError("knowledge setting requires a knowledge backend");
  }

  std::vector<GeneratedPremise> out;
  out.reserve(enthymemes.size());
  for (const auto& e : enthymemes) {
    GeneratedPremise g;
    g.enthymeme_id = e.id;
    g.setting = config.setting;
    try {
      EncoderInput input;
      switch (config.setting) {
        case Setting::kZeroShot:
          input = sequencing::build_zero_shot_prompt(e.stated_premise, e.stated_claim, config.mask_literal);
          break;
        case Setting::kFineTuned:
          input = sequencing::build_encoder_input(e.stated_premise, e.stated_claim);
          break;
        case Setting::kFineTunedKnowledge: {
          std::string phrase;
          if (e.knowledge_phrase) {
            phrase = knowledge::sanitize_phrase(*e.knowledge_phrase);
          } else {
            phrase = knowledge::select_intent(
                knowledge::infer({e.stated_premise, e.stated_claim}, *knowledge_backend));
          }
          input = sequencing::build_encoder_input(e.stated_premise, e.stated_claim, std::string_view(phrase));
          break;
        }
      }
      g.full_argument = generate(backend, input, config);
      auto extraction = sequencing::extract_implicit_premise(g.full_argument, {e.stated_premise, e.stated_claim});
      g.implicit_premise = std::move(extraction.premise);
      g.extraction_fallback = extraction.fallback;
    } catch (const Error& err) {
      g.implicit_premise.clear();
      g.extraction_fallback = false;
      g.error = err.what();
    }
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<GeneratedPremise> generate_for_corpus_parallel(
    const std::vector<corpus::Enthymeme>& enthymemes,
    const std::function<std::unique_ptr<GenerationBackend>()>& factory, const GenerationConfig& config,
    knowledge::KnowledgeBackend* knowledge_backend, std::size_t workers) {
  workers = std::max<std::size_t>(1, std::min(workers, std::max<std::size_t>(1, enthymemes.size())));
  std::vector<std::vector<GeneratedPremise>> parts(workers);
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t chunk = (enthymemes.size() + workers - 1) / workers;
  {
    std::vector<std::jthread> threads;
    for (std::size_t w = 0; w < workers; ++w) {
      threads.emplace_back([&, w] {
        try {
          const auto begin = std::min(enthymemes.size(), w * chunk);
          const auto end = std::min(enthymemes.size(), begin + chunk);
          std::vector<corpus::Enthymeme> slice(enthymemes.begin() + static_cast<std::ptrdiff_t>(begin),
                                               enthymemes.begin() + static_cast<std::ptrdiff_t>(end));
          auto backend = factory();
          parts[w] = generate_for_corpus(slice, *backend, config, knowledge_backend);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<GeneratedPremise> out;
  out.reserve(enthymemes.size());
  for (auto& p : parts) {
    for (auto& g : p) out.push_back(std::move(g));
  }
  return out;
}

}  // namespace enthymeme::generator
