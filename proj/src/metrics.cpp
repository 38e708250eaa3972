#include "enthymeme/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <iomanip>
#include <map>
#include <sstream>
#include <unordered_map>

#include "enthymeme/error.hpp"
#include "enthymeme/generator.hpp"
#include "enthymeme/text.hpp"
#include "http_json.hpp"

namespace enthymeme::metrics {

namespace {

bool is_detachable(unsigned char c) {
  switch (c) {
    case '.': case ',': case ';': case ':': case '!': case '?': case '"': case '\'':
    case '(': case ')': case '[': case ']': case '{': case '}': case '`':
      return true;
    default:
      return false;
  }
}

using Ngram = std::vector<std::string>;

std::map<Ngram, std::size_t> ngram_counts(const std::vector<std::string>& toks, std::size_t n) {
  std::map<Ngram, std::size_t> out;
  if (toks.size() < n) return out;
  for (std::size_t i = 0; i + n <= toks.size(); ++i) {
    ++out[Ngram(toks.begin() + static_cast<std::ptrdiff_t>(i),
                toks.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return out;
}

double fixed2(double x) { return std::round(x * 100.0) / 100.0; }

}  // namespace

TokenSequence tokenize(std::string_view input) {
  TokenSequence out;
  for (const auto& word : text::split_whitespace(text::to_lower(input))) {
    std::size_t b = 0;
    std::size_t e = word.size();
    std::vector<std::string> trailing;
    while (b < e && is_detachable(static_cast<unsigned char>(word[b]))) {
      out.tokens.emplace_back(1, word[b]);
      ++b;
    }
    while (e > b && is_detachable(static_cast<unsigned char>(word[e - 1]))) {
      trailing.emplace_back(1, word[e - 1]);
      --e;
    }
    if (e > b) out.tokens.push_back(word.substr(b, e - b));
    out.tokens.insert(out.tokens.end(), trailing.rbegin(), trailing.rend());
  }
  return out;
}

double bleu(const TokenSequence& candidate, std::span<const TokenSequence> references, int max_n) {
  if (references.empty()) throw ValidationError("bleu needs at least one reference");
  if (max_n != 1 && max_n != 2) throw ValidationError("bleu order must be 1 or 2");
  if (candidate.empty()) return 0.0;

  const std::size_t c = candidate.size();
  double product = 1.0;
  for (int order = 1; order <= max_n; ++order) {
    const auto n = static_cast<std::size_t>(order);
    const auto cand = ngram_counts(candidate.tokens, n);
    std::map<Ngram, std::size_t> max_ref;
    for (const auto& ref : references) {
      for (const auto& [g, k] : ngram_counts(ref.tokens, n)) {
        auto& slot = max_ref[g];
        slot = std::max(slot, k);
      }
    }
    std::size_t matched = 0;
    for (const auto& [g, k] : cand) {
      auto it = max_ref.find(g);
      if (it != max_ref.end()) matched += std::min(k, it->second);
    }
    const std::size_t total = c >= n ? c - n + 1 : 0;
    double p;
    if (order == 1) {
      p = static_cast<double>(matched) / static_cast<double>(total);
    } else if (matched == 0) {
      p = 1.0 / static_cast<double>(total + 1);
    } else {
      p = static_cast<double>(matched) / static_cast<double>(total);
    }
    if (p == 0.0) return 0.0;
    product *= p;
  }
  const double geo = std::pow(product, 1.0 / static_cast<double>(max_n));

  std::size_t r = references.front().size();
  for (const auto& ref : references) {
    const auto d = ref.size() > c ? ref.size() - c : c - ref.size();
    const auto best = r > c ? r - c : c - r;
    if (d < best || (d == best && ref.size() < r)) r = ref.size();
  }
  const double bp = c < r ? std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c)) : 1.0;
  return geo * bp;
}

StaticHashEmbedder::StaticHashEmbedder(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim_ == 0) throw ValidationError("embedding dimension must be positive");
}

Vector StaticHashEmbedder::embed_token(std::string_view token) const {
  Vector v(dim_, 0.0);
  auto add = [&](std::string_view feature, double weight) {
    std::uint64_t state = text::fnv1a(feature) ^ seed_;
    for (auto& x : v) {
      const auto r = text::splitmix64(state);
      x += weight * (static_cast<double>(r >> 11) * 0x1.0p-53 * 2.0 - 1.0);
    }
  };
  add(std::string("w:") + std::string(token), 1.0);
  const std::string padded = "<" + std::string(token) + ">";
  if (padded.size() >= 5) {
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i) add("t:" + padded.substr(i, 3), 0.5);
  }
  return v;
}

std::vector<Vector> StaticHashEmbedder::embed(const TokenSequence& seq) {
  std::vector<Vector> out;
  out.reserve(seq.size());
  for (const auto& t : seq.tokens) out.push_back(embed_token(t));
  return out;
}

HttpEmbedder::HttpEmbedder(std::string url, int timeout_seconds)
    : url_(std::move(url)), timeout_seconds_(timeout_seconds) {}

HttpEmbedder HttpEmbedder::from_env() {
  const char* url = std::getenv("EMBEDDER_URL");
  if (url == nullptr || *url == '\0') throw BackendError("EMBEDDER_URL is not set", false);
  return HttpEmbedder(url);
}

std::vector<Vector> HttpEmbedder::embed(const TokenSequence& seq) {
  const auto reply = detail::post_json(url_, nlohmann::json{{"tokens", seq.tokens}}, timeout_seconds_);
  try {
    auto vectors = reply.at("vectors").get<std::vector<Vector>>();
    if (vectors.size() != seq.size()) {
      throw BackendError("embedder returned " + std::to_string(vectors.size()) + " vectors for " +
                             std::to_string(seq.size()) + " tokens",
                         false);
    }
    return vectors;
  } catch (const nlohmann::json::exception& e) {
    throw BackendError(std::string("embedder reply malformed: ") + e.what(), false);
  }
}

double clamped_cosine(const Vector& a, const Vector& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  if (a == b) return 1.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), 0.0, 1.0);
}

BertScore greedy_match(const std::vector<Vector>& candidate, const std::vector<Vector>& reference) {
  if (candidate.empty() || reference.empty()) {
    throw ValidationError("bertscore needs non-empty candidate and reference");
  }
  const auto dim = candidate.front().size();
  for (const auto* side : {&candidate, &reference}) {
    for (const auto& v : *side) {
      if (v.size() != dim) throw ValidationError("embedding dimension mismatch");
    }
  }
  std::vector<double> best_c(candidate.size(), 0.0);
  std::vector<double> best_r(reference.size(), 0.0);
  for (std::size_t i = 0; i < candidate.size(); ++i) {
    for (std::size_t j = 0; j < reference.size(); ++j) {
      const double s = clamped_cosine(candidate[i], reference[j]);
      best_c[i] = std::max(best_c[i], s);
      best_r[j] = std::max(best_r[j], s);
    }
  }
  BertScore out;
  for (double s : best_c) out.precision += s;
  for (double s : best_r) out.recall += s;
  out.precision /= static_cast<double>(candidate.size());
  out.recall /= static_cast<double>(reference.size());
  const double denom = out.precision + out.recall;
  out.f1 = denom > 0.0 ? 2.0 * out.precision * out.recall / denom : 0.0;
  return out;
}

BertScore bertscore(const TokenSequence& candidate, const TokenSequence& reference, Embedder& embedder) {
  if (candidate.empty() || reference.empty()) {
    throw ValidationError("bertscore needs non-empty candidate and reference");
  }
  return greedy_match(embedder.embed(candidate), embedder.embed(reference));
}

double bertscore_f1(const TokenSequence& candidate, const TokenSequence& reference, Embedder& embedder) {
  return bertscore(candidate, reference, embedder).f1;
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("wilcoxon needs paired samples of equal length");
  if (a.size() < 5) throw ValidationError("wilcoxon needs at least 5 pairs");

  std::vector<double> diffs;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    if (d != 0.0) diffs.push_back(d);
  }
  if (diffs.empty()) throw UndefinedStatisticError("all paired differences are zero");

  const std::size_t n = diffs.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return std::abs(diffs[x]) < std::abs(diffs[y]); });

  // Doubled midranks keep everything integral.
  std::vector<std::uint64_t> rank2(n);
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::abs(diffs[order[j + 1]]) == std::abs(diffs[order[i]])) ++j;
    const std::uint64_t r2 = (i + 1) + (j + 1);
    for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = r2;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }

  std::uint64_t w2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (diffs[i] > 0.0) w2 += rank2[i];
  }

  WilcoxonResult out;
  out.n = n;
  out.w_plus = static_cast<double>(w2) / 2.0;

  if (n <= kExactWilcoxonLimit) {
    const std::uint64_t total = static_cast<std::uint64_t>(n) * (n + 1);
    std::vector<std::uint64_t> counts(total + 1, 0);
    counts[0] = 1;
    std::uint64_t reach = 0;
    for (auto r : rank2) {
      for (std::uint64_t s = reach + 1; s-- > 0;) {
        if (counts[s] != 0) counts[s + r] += counts[s];
      }
      reach += r;
    }
    std::uint64_t le = 0, ge = 0;
    for (std::uint64_t s = 0; s <= total; ++s) {
      if (s <= w2) le += counts[s];
      if (s >= w2) ge += counts[s];
    }
    const double all = std::ldexp(1.0, static_cast<int>(n));
    out.p_value = std::min(1.0, 2.0 * static_cast<double>(std::min(le, ge)) / all);
    out.exact = true;
    return out;
  }

  const double nn = static_cast<double>(n);
  const double mean = nn * (nn + 1.0) / 4.0;
  const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
  const double z = var > 0.0 ? (out.w_plus - mean) / std::sqrt(var) : 0.0;
  out.p_value = std::min(1.0, std::erfc(std::abs(z) / std::sqrt(2.0)));
  out.exact = false;
  return out;
}

std::string_view to_string(System s) {
  switch (s) {
    case System::kZeroShot: return "zero_shot";
    case System::kArt: return "art";
    case System::kArtParacomet: return "art_paracomet";
  }
  return "art";
}

std::string_view display_name(System s) {
  switch (s) {
    case System::kZeroShot: return "ZeroShot";
    case System::kArt: return "ART";
    case System::kArtParacomet: return "+PARA-COMET";
  }
  return "ART";
}

System parse_system(std::string_view s) {
  if (s == "zero_shot") return System::kZeroShot;
  if (s == "art") return System::kArt;
  if (s == "art_paracomet") return System::kArtParacomet;
  throw ValidationError("unknown system: " + std::string(s));
}

CorpusEvaluation evaluate(const std::vector<generator::GeneratedPremise>& generations,
                          const std::vector<corpus::Enthymeme>& enthymemes, Embedder& embedder) {
  if (enthymemes.empty()) throw ValidationError("cannot evaluate an empty corpus");

  std::unordered_map<std::string, const generator::GeneratedPremise*> by_id;
  for (const auto& g : generations) {
    if (!by_id.emplace(g.enthymeme_id, &g).second) {
      throw ValidationError("duplicate generation for id " + g.enthymeme_id);
    }
  }
  std::vector<std::string> missing;
  std::unordered_map<std::string, bool> gold_ids;
  for (const auto& e : enthymemes) {
    gold_ids[e.id] = true;
    if (by_id.count(e.id) == 0) missing.push_back(e.id);
  }
  std::vector<std::string> extra;
  for (const auto& g : generations) {
    if (gold_ids.count(g.enthymeme_id) == 0) extra.push_back(g.enthymeme_id);
  }
  if (!missing.empty() || !extra.empty()) {
    std::string msg = "generations do not align with gold";
    if (!missing.empty()) {
      msg += "; missing ids:";
      for (const auto& id : missing) msg += " " + id;
    }
    if (!extra.empty()) {
      msg += "; unknown ids:";
      for (const auto& id : extra) msg += " " + id;
    }
    throw ValidationError(msg);
  }

  const auto dataset = enthymemes.front().source;
  const auto setting = generations.front().setting;
  for (const auto& e : enthymemes) {
    if (e.source != dataset) throw ValidationError("evaluate expects a single dataset per report");
  }
  for (const auto& g : generations) {
    if (g.setting != setting) throw ValidationError("evaluate expects a single system per report");
  }

  CorpusEvaluation out;
  out.report.dataset = dataset;
  out.report.system = generator::system_of(setting);
  for (const auto& e : enthymemes) {
    const auto& g = *by_id.at(e.id);
    ItemScore item{e.id};
    const auto cand = tokenize(g.error ? std::string() : g.implicit_premise);
    std::vector<TokenSequence> refs;
    for (const auto& gold : e.gold_premises) refs.push_back(tokenize(gold));
    if (!cand.empty()) {
      item.bleu1 = bleu(cand, refs, 1);
      item.bleu2 = bleu(cand, refs, 2);
      const auto cand_vec = embedder.embed(cand);
      for (const auto& ref : refs) {
        if (ref.empty()) continue;
        item.bertscore_f1 = std::max(item.bertscore_f1, greedy_match(cand_vec, embedder.embed(ref)).f1);
      }
    }
    out.items.push_back(item);
  }
  for (const auto& item : out.items) {
    out.report.bleu1 += item.bleu1;
    out.report.bleu2 += item.bleu2;
    out.report.bertscore_f1 += item.bertscore_f1;
  }
  const double n = static_cast<double>(out.items.size());
  out.report.bleu1 = 100.0 * out.report.bleu1 / n;
  out.report.bleu2 = 100.0 * out.report.bleu2 / n;
  out.report.bertscore_f1 = 100.0 * out.report.bertscore_f1 / n;
  out.report.n_items = out.items.size();
  return out;
}

ScoreReport evaluate_corpus(const std::vector<generator::GeneratedPremise>& generations,
                            const std::vector<corpus::Enthymeme>& enthymemes, Embedder& embedder) {
  return evaluate(generations, enthymemes, embedder).report;
}

double compare_systems(const CorpusEvaluation& a, const CorpusEvaluation& b) {
  std::unordered_map<std::string, double> other;
  for (const auto& item : b.items) other[item.id] = item.bertscore_f1;
  std::vector<double> xs, ys;
  for (const auto& item : a.items) {
    auto it = other.find(item.id);
    if (it == other.end()) throw ValidationError("compared systems differ on item " + item.id);
    xs.push_back(item.bertscore_f1);
    ys.push_back(it->second);
  }
  if (xs.size() != b.items.size()) throw ValidationError("compared systems cover different items");
  return wilcoxon_signed_rank(xs, ys).p_value;
}

nlohmann::json to_json(const ScoreReport& r) {
  nlohmann::json j = {{"dataset", corpus::to_string(r.dataset)},
                      {"system", to_string(r.system)},
                      {"bleu1", fixed2(r.bleu1)},
                      {"bleu2", fixed2(r.bleu2)},
                      {"bertscore_f1", fixed2(r.bertscore_f1)},
                      {"n_items", r.n_items}};
  j["p_value"] = r.p_value ? nlohmann::json(*r.p_value) : nlohmann::json(nullptr);
  return j;
}

std::string format_table(const std::vector<ScoreReport>& reports) {
  auto sorted = reports;
  std::stable_sort(sorted.begin(), sorted.end(), [](const ScoreReport& x, const ScoreReport& y) {
    if (x.dataset != y.dataset) return x.dataset < y.dataset;
    return x.system < y.system;
  });
  const bool with_p = std::any_of(sorted.begin(), sorted.end(),
                                  [](const ScoreReport& r) { return r.p_value.has_value(); });
  std::ostringstream os;
  os << std::left << std::setw(6) << "Data" << std::setw(14) << "System" << std::right
     << std::setw(8) << "BLEU1" << std::setw(8) << "BLEU2" << std::setw(8) << "BS"
     << std::setw(7) << "N";
  if (with_p) os << std::setw(10) << "p";
  os << "\n";
  std::optional<corpus::Source> last;
  os << std::fixed << std::setprecision(2);
  for (const auto& r : sorted) {
    const std::string data = last == r.dataset ? "" : std::string(corpus::to_string(r.dataset));
    last = r.dataset;
    os << std::left << std::setw(6) << data << std::setw(14) << display_name(r.system) << std::right
       << std::setw(8) << r.bleu1 << std::setw(8) << r.bleu2 << std::setw(8) << r.bertscore_f1
       << std::setw(7) << r.n_items;
    if (with_p) {
      if (r.p_value) {
        os << std::setw(10) << std::setprecision(4) << *r.p_value << std::setprecision(2);
      } else {
        os << std::setw(10) << "-";
      }
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace enthymeme::metrics
