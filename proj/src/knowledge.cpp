#include "enthymeme/knowledge.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <mutex>

#include "enthymeme/error.hpp"
#include "enthymeme/sequencing.hpp"
#include "enthymeme/text.hpp"
#include "http_json.hpp"

namespace enthymeme::knowledge {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, 9> kRelationNames = {
    "xIntent", "xNeed", "xAttr", "xEffect", "xWant", "xReact", "oReact", "oWant", "oEffect"};

InferenceMap inferences_from_json(const json& j, std::size_t discourse_size) {
  if (!j.is_object()) throw BackendError("inferences must be an object", false);
  InferenceMap out;
  for (const auto& [idx_text, relations] : j.items()) {
    std::size_t idx = 0;
    try {
      std::size_t consumed = 0;
      idx = std::stoul(idx_text, &consumed);
      if (consumed != idx_text.size()) throw std::invalid_argument(idx_text);
    } catch (const std::exception&) {
      throw BackendError("bad sentence index: " + idx_text, false);
    }
    if (idx >= discourse_size) {
      throw BackendError("sentence index " + idx_text + " out of range", false);
    }
    if (!relations.is_object()) throw BackendError("relations must be an object", false);
    for (const auto& [name, beams] : relations.items()) {
      auto rel = parse_relation(name);
      if (!rel) continue;  // unknown relations are ignored
      std::vector<std::string> list;
      if (beams.is_array()) {
        for (const auto& b : beams) {
          if (b.is_string()) list.push_back(b.get<std::string>());
        }
      }
      out[{idx, *rel}] = std::move(list);
    }
  }
  return out;
}

// Last alphabetic word of at least four letters, lowercased.
std::string keyword(std::string_view sentence) {
  std::string best;
  for (const auto& tok : text::split_whitespace(sentence)) {
    std::string w;
    for (char c : tok) {
      if (std::isalpha(static_cast<unsigned char>(c))) {
        w.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
      }
    }
    if (w.size() >= 4) best = w;
  }
  return best.empty() ? "situation" : best;
}

}  // namespace

std::string_view to_string(Relation r) { return kRelationNames[static_cast<std::size_t>(r)]; }

std::optional<Relation> parse_relation(std::string_view s) {
  for (std::size_t i = 0; i < kRelationNames.size(); ++i) {
    if (kRelationNames[i] == s) return static_cast<Relation>(i);
  }
  return std::nullopt;
}

CommonsenseBundle::CommonsenseBundle(std::vector<std::string> discourse, InferenceMap inferences,
                                     std::string backend_id, std::string retrieved_at)
    : discourse_(std::move(discourse)),
      inferences_(std::move(inferences)),
      backend_id_(std::move(backend_id)),
      retrieved_at_(std::move(retrieved_at)) {}

const std::vector<std::string>* CommonsenseBundle::beams(std::size_t sentence, Relation r) const {
  auto it = inferences_.find({sentence, r});
  return it == inferences_.end() ? nullptr : &it->second;
}

json CommonsenseBundle::to_json() const {
  json inf = json::object();
  for (const auto& [key, beams] : inferences_) {
    inf[std::to_string(key.first)][std::string(knowledge::to_string(key.second))] = beams;
  }
  return {{"discourse", discourse_},
          {"inferences", inf},
          {"backend_id", backend_id_},
          {"retrieved_at", retrieved_at_}};
}

CommonsenseBundle CommonsenseBundle::from_json(const json& j) {
  try {
    auto discourse = j.at("discourse").get<std::vector<std::string>>();
    auto inferences = inferences_from_json(j.at("inferences"), discourse.size());
    return CommonsenseBundle(std::move(discourse), std::move(inferences),
                             j.value("backend_id", std::string("unknown")),
                             j.value("retrieved_at", std::string()));
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad bundle: ") + e.what());
  }
}

std::string sanitize_phrase(std::string_view phrase) {
  std::string s(phrase);
  for (auto pos = s.find(sequencing::kDelimiter); pos != std::string::npos;
       pos = s.find(sequencing::kDelimiter)) {
    s.replace(pos, sequencing::kDelimiter.size(), " ");
  }
  s = text::collapse_whitespace(s);
  while (!s.empty() && (s.back() == '.' || s.back() == '!' || s.back() == '?' || s.back() == ' ')) {
    s.pop_back();
  }
  return s;
}

std::string discourse_key(const std::vector<std::string>& discourse) {
  std::string joined;
  for (const auto& s : discourse) {
    joined += text::collapse_whitespace(s);
    joined.push_back('\n');
  }
  return text::sha256_hex(joined);
}

CommonsenseBundle infer(const std::vector<std::string>& discourse, KnowledgeBackend& backend) {
  if (discourse.empty()) throw ValidationError("discourse must contain at least one sentence");
  std::vector<std::string> normalized;
  for (const auto& s : discourse) {
    auto t = text::collapse_whitespace(s);
    if (t.empty()) throw ValidationError("discourse sentences must be non-empty");
    normalized.push_back(std::move(t));
  }

  auto raw = backend.fetch(normalized);
  InferenceMap cleaned;
  std::vector<std::size_t> indices;
  for (const auto& [key, beams] : raw.inferences()) {
    if (key.first >= normalized.size()) {
      throw BackendError("backend returned out-of-range sentence index", false);
    }
    std::vector<std::string> list;
    for (const auto& b : beams) {
      auto t = text::collapse_whitespace(b);
      if (!t.empty()) list.push_back(std::move(t));
    }
    if (list.empty()) {
      throw MissingInferenceError("no beams for sentence " + std::to_string(key.first) + " " +
                                  std::string(to_string(key.second)));
    }
    if (indices.empty() || indices.back() != key.first) indices.push_back(key.first);
    cleaned[key] = std::move(list);
  }
  for (auto idx : indices) {
    for (auto rel : kAllRelations) {
      if (cleaned.count({idx, rel}) == 0) {
        throw MissingInferenceError("backend omitted " + std::string(to_string(rel)) +
                                    " for sentence " + std::to_string(idx));
      }
    }
  }
  return CommonsenseBundle(std::move(normalized), std::move(cleaned), raw.backend_id(),
                           raw.retrieved_at());
}

std::string select_intent(const CommonsenseBundle& bundle) {
  const auto* beams = bundle.beams(0, Relation::kXIntent);
  if (beams == nullptr || beams->empty()) {
    throw MissingInferenceError("bundle has no xIntent inference for the first sentence");
  }
  auto phrase = sanitize_phrase(beams->front());
  if (phrase.empty()) throw MissingInferenceError("top xIntent beam is empty after sanitizing");
  return phrase;
}

CommonsenseBundle StubKnowledgeBackend::fetch(const std::vector<std::string>& discourse) {
  InferenceMap inf;
  for (std::size_t i = 0; i < discourse.size(); ++i) {
    const auto kw = keyword(discourse[i]);
    inf[{i, Relation::kXIntent}] = {"to deal with the " + kw, "to learn more"};
    inf[{i, Relation::kXNeed}] = {"to know about the " + kw};
    inf[{i, Relation::kXAttr}] = {"curious"};
    inf[{i, Relation::kXEffect}] = {"thinks about the " + kw};
    inf[{i, Relation::kXWant}] = {"to find out more"};
    inf[{i, Relation::kXReact}] = {"interested"};
    inf[{i, Relation::kOReact}] = {"none"};
    inf[{i, Relation::kOWant}] = {"none"};
    inf[{i, Relation::kOEffect}] = {"none"};
  }
  return CommonsenseBundle(discourse, std::move(inf), id(), "1970-01-01T00:00:00Z");
}

CacheKnowledgeBackend::CacheKnowledgeBackend(std::filesystem::path path,
                                             std::unique_ptr<KnowledgeBackend> upstream)
    : path_(std::move(path)), upstream_(std::move(upstream)) {
  std::error_code ec;
  if (!std::filesystem::exists(path_, ec)) {
    if (!upstream_) throw IoError("knowledge cache not found: " + path_.string());
    return;
  }
  text::for_each_line(path_, [&](const std::string& line, std::size_t n) {
    if (text::trim(line).empty()) return;
    try {
      auto j = json::parse(line);
      auto bundle = CommonsenseBundle::from_json(j.at("bundle"));
      entries_.insert_or_assign(j.at("key").get<std::string>(), std::move(bundle));
    } catch (const std::exception& e) {
      throw ValidationError(path_.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  });
}

CommonsenseBundle CacheKnowledgeBackend::fetch(const std::vector<std::string>& discourse) {
  const auto key = discourse_key(discourse);
  {
    std::shared_lock lock(mutex_);
    if (auto it = entries_.find(key); it != entries_.end()) return it->second;
  }
  if (!upstream_) {
    throw MissingInferenceError("no cached inference for discourse key " + key);
  }
  CommonsenseBundle fresh = [&] {
    std::lock_guard guard(upstream_mutex_);
    return upstream_->fetch(discourse);
  }();
  put(fresh);
  return fresh;
}

void CacheKnowledgeBackend::put(const CommonsenseBundle& bundle) {
  const auto key = discourse_key(bundle.discourse());
  std::unique_lock lock(mutex_);
  if (entries_.count(key) != 0) return;
  std::ofstream out(path_, std::ios::app | std::ios::binary);
  if (!out) throw IoError("cannot append to knowledge cache " + path_.string());
  out << json{{"key", key}, {"bundle", bundle.to_json()}}.dump() << '\n';
  out.flush();
  if (!out) throw IoError("write failed on knowledge cache " + path_.string());
  entries_.insert_or_assign(key, bundle);
}

std::size_t CacheKnowledgeBackend::size() const {
  std::shared_lock lock(mutex_);
  return entries_.size();
}

LiveKnowledgeBackend::LiveKnowledgeBackend(std::string url, int timeout_seconds)
    : url_(std::move(url)), timeout_seconds_(timeout_seconds) {}

LiveKnowledgeBackend LiveKnowledgeBackend::from_env() {
  const char* url = std::getenv("KNOWLEDGE_BACKEND_URL");
  if (url == nullptr || *url == '\0') {
    throw BackendError("KNOWLEDGE_BACKEND_URL is not set", false);
  }
  return LiveKnowledgeBackend(url);
}

CommonsenseBundle LiveKnowledgeBackend::fetch(const std::vector<std::string>& discourse) {
  const auto reply = detail::post_json(url_, json{{"sentences", discourse}}, timeout_seconds_);
  if (!reply.is_object() || !reply.contains("inferences")) {
    throw BackendError("knowledge backend reply lacks \"inferences\"", false);
  }
  return CommonsenseBundle(discourse, inferences_from_json(reply["inferences"], discourse.size()),
                           id(), text::utc_timestamp());
}

std::unique_ptr<KnowledgeBackend> make_backend(std::string_view kind,
                                               const std::optional<std::filesystem::path>& cache_path) {
  if (kind == "stub") return std::make_unique<StubKnowledgeBackend>();
  if (kind == "cache") {
    if (!cache_path) throw ValidationError("cache backend requires a cache path");
    return std::make_unique<CacheKnowledgeBackend>(*cache_path);
  }
  if (kind == "live") {
    auto live = std::make_unique<LiveKnowledgeBackend>(LiveKnowledgeBackend::from_env());
    if (!cache_path) return live;
    return std::make_unique<CacheKnowledgeBackend>(*cache_path, std::move(live));
  }
  throw ValidationError("unknown knowledge backend: " + std::string(kind));
}

}  // namespace enthymeme::knowledge
