#include "enthymeme/annotation.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <memory>
#include <set>
#include <sstream>
#include <unordered_map>

#include "enthymeme/error.hpp"
#include "enthymeme/text.hpp"

namespace enthymeme::annotation {

using nlohmann::json;

void AnnotationItem::validate() const {
  if (item_id.empty()) throw ValidationError("annotation item needs an id");
  if (required_judges < 1 || required_judges % 2 == 0) {
    throw ValidationError("required_judges must be a positive odd number");
  }
}

json to_json(const AnnotationItem& item) {
  return {{"item_id", item.item_id},
          {"enthymeme_id", item.enthymeme_id},
          {"stated_premise", item.stated_premise},
          {"stated_claim", item.stated_claim},
          {"candidate_premise", item.candidate_premise},
          {"system", metrics::to_string(item.system)},
          {"dataset", corpus::to_string(item.dataset)},
          {"required_judges", item.required_judges}};
}

AnnotationItem item_from_json(const json& j) {
  AnnotationItem item;
  try {
    item.item_id = j.at("item_id").get<std::string>();
    item.enthymeme_id = j.value("enthymeme_id", std::string());
    item.stated_premise = j.at("stated_premise").get<std::string>();
    item.stated_claim = j.at("stated_claim").get<std::string>();
    item.candidate_premise = j.at("candidate_premise").get<std::string>();
    item.system = metrics::parse_system(j.at("system").get<std::string>());
    item.dataset = corpus::parse_source(j.at("dataset").get<std::string>());
    item.required_judges = j.value("required_judges", 3);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad annotation item: ") + e.what());
  }
  item.validate();
  return item;
}

json to_json(const JudgmentRecord& r) {
  return {{"item_id", r.item_id},
          {"annotator_id", r.annotator_id},
          {"plausible", r.plausible},
          {"submitted_at", r.submitted_at}};
}

json to_json(const AggregateReport& r) {
  json groups = json::array();
  for (const auto& g : r.groups) {
    groups.push_back({{"dataset", corpus::to_string(g.dataset)},
                      {"system", metrics::to_string(g.system)},
                      {"plausible_fraction", g.plausible_fraction},
                      {"n_items", g.n_items},
                      {"alpha", g.alpha ? json(*g.alpha) : json(nullptr)}});
  }
  return {{"groups", groups},
          {"alpha", r.alpha ? json(*r.alpha) : json(nullptr)},
          {"n_judgments", r.n_judgments}};
}

std::vector<AnnotationItem> load_batch(const std::filesystem::path& path) {
  std::vector<AnnotationItem> out;
  std::set<std::string> seen;
  text::for_each_line(path, [&](const std::string& line, std::size_t n) {
    if (text::trim(line).empty()) return;
    try {
      auto item = item_from_json(json::parse(line));
      if (!seen.insert(item.item_id).second) throw ValidationError("duplicate item id " + item.item_id);
      out.push_back(std::move(item));
    } catch (const json::parse_error& e) {
      throw ValidationError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  });
  return out;
}

std::string to_jsonl(const std::vector<AnnotationItem>& items) {
  std::string out;
  for (const auto& i : items) out += to_json(i).dump() + "\n";
  return out;
}

std::vector<AnnotationItem> create_batch(const std::vector<generator::GeneratedPremise>& generations,
                                         const std::vector<corpus::Enthymeme>& enthymemes,
                                         std::size_t sample_size, std::uint64_t seed, int required_judges) {
  std::unordered_map<std::string, std::vector<const generator::GeneratedPremise*>> by_id;
  for (const auto& g : generations) {
    if (!g.error && !g.implicit_premise.empty()) by_id[g.enthymeme_id].push_back(&g);
  }
  std::map<corpus::Source, std::vector<const corpus::Enthymeme*>> pools;
  for (const auto& e : enthymemes) {
    if (by_id.count(e.id) != 0) pools[e.source].push_back(&e);
  }

  std::vector<AnnotationItem> out;
  for (auto& [source, pool] : pools) {
    if (sample_size > pool.size()) {
      throw ValidationError("sample size " + std::to_string(sample_size) + " exceeds the " +
                            std::to_string(pool.size()) + " generated items of " +
                            std::string(corpus::to_string(source)));
    }
    std::sort(pool.begin(), pool.end(), [](auto* a, auto* b) { return a->id < b->id; });
    // Per-dataset stream so adding a dataset does not reshuffle the others.
    text::SeededRng rng(seed ^ (0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(source) + 1)));
    for (std::size_t i = 0; i < sample_size; ++i) {
      const auto j = i + rng.below(pool.size() - i);
      std::swap(pool[i], pool[j]);
    }
    for (std::size_t i = 0; i < sample_size; ++i) {
      const auto& e = *pool[i];
      for (const auto* g : by_id.at(e.id)) {
        AnnotationItem item;
        item.enthymeme_id = e.id;
        item.stated_premise = e.stated_premise;
        item.stated_claim = e.stated_claim;
        item.candidate_premise = g->implicit_premise;
        item.system = generator::system_of(g->setting);
        item.dataset = source;
        item.required_judges = required_judges;
        item.item_id = std::string(corpus::to_string(source)) + "-" + e.id + "-" +
                       std::string(metrics::to_string(item.system));
        item.validate();
        out.push_back(std::move(item));
      }
    }
  }
  std::sort(out.begin(), out.end(),
            [](const AnnotationItem& a, const AnnotationItem& b) { return a.item_id < b.item_id; });
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i].item_id == out[i - 1].item_id) {
      throw ValidationError("duplicate generation for item " + out[i].item_id);
    }
  }
  return out;
}

bool majority_vote(std::span<const bool> judgments) {
  if (judgments.empty() || judgments.size() % 2 == 0) {
    throw ValidationError("majority vote needs an odd, non-empty number of judgments");
  }
  const auto yes = static_cast<std::size_t>(std::count(judgments.begin(), judgments.end(), true));
  return 2 * yes > judgments.size();
}

double krippendorff_alpha(const JudgmentMatrix& judgments) {
  double o[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
  std::size_t pairable = 0;
  for (const auto& unit : judgments) {
    std::size_t counts[2] = {0, 0};
    for (const auto& v : unit) {
      if (v) ++counts[*v ? 1 : 0];
    }
    const std::size_t m = counts[0] + counts[1];
    if (m < 2) continue;
    ++pairable;
    const double w = 1.0 / static_cast<double>(m - 1);
    for (int c = 0; c < 2; ++c) {
      for (int k = 0; k < 2; ++k) {
        const double nc = static_cast<double>(counts[c]);
        const double pairs = c == k ? nc * std::max(nc - 1.0, 0.0) : nc * static_cast<double>(counts[k]);
        o[c][k] += pairs * w;
      }
    }
  }
  if (pairable < 2) throw ValidationError("alpha needs at least two items with two or more judgments");
  const double n0 = o[0][0] + o[0][1];
  const double n1 = o[1][0] + o[1][1];
  const double n = n0 + n1;
  const double expected = 2.0 * n0 * n1;  // sum over c != k of n_c n_k
  if (expected == 0.0) throw UndefinedStatisticError("alpha is undefined when only one label occurs");
  const double observed = o[0][1] + o[1][0];
  return 1.0 - (n - 1.0) * observed / expected;
}

AggregateReport aggregate(const std::vector<AnnotationItem>& batch, const std::vector<JudgmentRecord>& judgments,
                          bool require_complete) {
  std::map<std::string, std::map<std::string, bool>> by_item;  // item -> annotator -> label
  std::set<std::string> annotators;
  std::map<std::string, const AnnotationItem*> items;
  for (const auto& item : batch) items[item.item_id] = &item;
  for (const auto& j : judgments) {
    if (items.count(j.item_id) == 0) throw ValidationError("judgment for unknown item " + j.item_id);
    auto [it, inserted] = by_item[j.item_id].emplace(j.annotator_id, j.plausible);
    if (!inserted && it->second != j.plausible) {
      throw ConflictError("conflicting judgments by " + j.annotator_id + " on " + j.item_id);
    }
    annotators.insert(j.annotator_id);
  }

  AggregateReport report;
  struct Acc {
    std::size_t plausible = 0;
    std::size_t n = 0;
    JudgmentMatrix matrix;
  };
  std::map<std::pair<corpus::Source, metrics::System>, Acc> groups;
  JudgmentMatrix full;
  for (const auto& [id, item] : items) {
    const auto it = by_item.find(id);
    const std::size_t have = it == by_item.end() ? 0 : it->second.size();
    if (have > static_cast<std::size_t>(item->required_judges)) {
      throw ValidationError("item " + id + " has more than " + std::to_string(item->required_judges) + " judgments");
    }
    if (have < static_cast<std::size_t>(item->required_judges)) {
      if (require_complete) {
        throw ValidationError("item " + id + " has " + std::to_string(have) + " of " +
                              std::to_string(item->required_judges) + " judgments");
      }
      continue;
    }
    std::vector<bool> votes;
    std::vector<std::optional<bool>> row;
    for (const auto& a : annotators) {
      auto v = it->second.find(a);
      if (v == it->second.end()) {
        row.emplace_back(std::nullopt);
      } else {
        row.emplace_back(v->second);
        votes.push_back(v->second);
      }
    }
    auto& acc = groups[{item->dataset, item->system}];
    // vector<bool> is packed, so hand majority_vote a plain array.
    std::unique_ptr<bool[]> flat(new bool[votes.size()]);
    for (std::size_t i = 0; i < votes.size(); ++i) flat[i] = votes[i];
    if (majority_vote(std::span<const bool>(flat.get(), votes.size()))) ++acc.plausible;
    ++acc.n;
    acc.matrix.push_back(row);
    full.push_back(std::move(row));
    report.n_judgments += votes.size();
  }

  auto try_alpha = [](const JudgmentMatrix& m) -> std::optional<double> {
    try {
      return krippendorff_alpha(m);
    } catch (const Error&) {
      return std::nullopt;
    }
  };
  for (auto& [key, acc] : groups) {
    GroupResult g;
    g.dataset = key.first;
    g.system = key.second;
    g.n_items = acc.n;
    g.plausible_fraction = static_cast<double>(acc.plausible) / static_cast<double>(acc.n);
    g.alpha = try_alpha(acc.matrix);
    report.groups.push_back(g);
  }
  report.alpha = try_alpha(full);
  return report;
}

std::string format_table(const AggregateReport& report) {
  std::ostringstream os;
  os << std::left << std::setw(6) << "Data" << std::setw(14) << "System" << std::right << std::setw(14)
     << "Plausibility" << std::setw(7) << "N" << "\n";
  std::optional<corpus::Source> last;
  for (const auto& g : report.groups) {
    const std::string data = last == g.dataset ? "" : std::string(corpus::to_string(g.dataset));
    last = g.dataset;
    std::ostringstream pct;
    pct << std::fixed << std::setprecision(2) << 100.0 * g.plausible_fraction << "%";
    os << std::left << std::setw(6) << data << std::setw(14) << metrics::display_name(g.system) << std::right
       << std::setw(14) << pct.str() << std::setw(7) << g.n_items << "\n";
  }
  os << "Krippendorff's alpha: ";
  if (report.alpha) {
    os << std::fixed << std::setprecision(2) << *report.alpha;
  } else {
    os << "undefined";
  }
  os << " (" << report.n_judgments << " judgments)\n";
  return os.str();
}

// --- AnnotationStore -----------------------------------------------------

AnnotationStore::AnnotationStore(std::vector<AnnotationItem> batch, std::filesystem::path journal)
    : batch_(std::move(batch)), journal_(std::move(journal)) {
  for (std::size_t i = 0; i < batch_.size(); ++i) {
    batch_[i].validate();
    if (!index_.emplace(batch_[i].item_id, i).second) {
      throw ValidationError("duplicate item id " + batch_[i].item_id);
    }
  }
  std::error_code ec;
  if (!std::filesystem::exists(journal_, ec)) return;
  text::for_each_line(journal_, [&](const std::string& line, std::size_t n) {
    if (text::trim(line).empty()) return;
    json e;
    try {
      e = json::parse(line);
    } catch (const json::parse_error& err) {
      throw ValidationError(journal_.string() + ":" + std::to_string(n) + ": " + err.what());
    }
    const auto type = e.value("type", std::string());
    const auto item = e.value("item_id", std::string());
    const auto annotator = e.value("annotator_id", std::string());
    if (index_.count(item) == 0) {
      throw ValidationError(journal_.string() + ":" + std::to_string(n) + ": unknown item " + item);
    }
    if (type == "served") {
      apply_served(item, annotator);
    } else if (type == "judgment") {
      JudgmentRecord r{item, annotator, e.value("plausible", false), e.value("submitted_at", std::string())};
      const auto key = std::make_pair(item, annotator);
      if (judged_.count(key) != 0) return;
      served_[key] = true;
      judged_[key] = r;
      ++counts_[item];
      order_.push_back(r);
    }
  });
}

void AnnotationStore::apply_served(const std::string& item_id, const std::string& annotator_id) {
  served_[{item_id, annotator_id}] = true;
}

void AnnotationStore::append(const json& event) {
  std::ofstream out(journal_, std::ios::app | std::ios::binary);
  if (!out) throw IoError("cannot append to journal " + journal_.string());
  out << event.dump() << '\n';
  out.flush();
  if (!out) throw IoError("journal write failed: " + journal_.string());
}

std::optional<AnnotationItem> AnnotationStore::next_item(const std::string& annotator_id) {
  if (annotator_id.empty()) throw ValidationError("annotator id must be non-empty");
  std::lock_guard lock(mutex_);
  const AnnotationItem* best = nullptr;
  std::size_t best_count = 0;
  for (const auto& [id, idx] : index_) {  // ordered by item_id
    const auto& item = batch_[idx];
    if (judged_.count({id, annotator_id}) != 0) continue;
    const auto it = counts_.find(id);
    const std::size_t have = it == counts_.end() ? 0 : it->second;
    if (have >= static_cast<std::size_t>(item.required_judges)) continue;
    if (best == nullptr || have < best_count) {
      best = &item;
      best_count = have;
    }
  }
  if (best == nullptr) return std::nullopt;
  const auto key = std::make_pair(best->item_id, annotator_id);
  if (served_.count(key) == 0) {
    append({{"type", "served"}, {"item_id", best->item_id}, {"annotator_id", annotator_id},
            {"at", text::utc_timestamp()}});
    apply_served(best->item_id, annotator_id);
  }
  return *best;
}

Ack AnnotationStore::submit_judgment(const JudgmentRecord& record) {
  if (record.annotator_id.empty()) throw ValidationError("annotator id must be non-empty");
  std::lock_guard lock(mutex_);
  const auto idx = index_.find(record.item_id);
  if (idx == index_.end()) throw NotFoundError("unknown item " + record.item_id);
  const auto key = std::make_pair(record.item_id, record.annotator_id);
  if (auto prior = judged_.find(key); prior != judged_.end()) {
    if (prior->second.plausible != record.plausible) {
      throw ConflictError("annotator " + record.annotator_id + " already judged " + record.item_id +
                          " differently");
    }
    return Ack{true, prior->second};
  }
  if (served_.count(key) == 0) {
    throw ValidationError("item " + record.item_id + " was not served to " + record.annotator_id);
  }
  const auto& item = batch_[idx->second];
  if (counts_[record.item_id] >= static_cast<std::size_t>(item.required_judges)) {
    throw ConflictError("item " + record.item_id + " already has " + std::to_string(item.required_judges) +
                        " judgments");
  }
  JudgmentRecord stored = record;
  if (stored.submitted_at.empty()) stored.submitted_at = text::utc_timestamp();
  auto event = to_json(stored);
  event["type"] = "judgment";
  append(event);
  judged_[key] = stored;
  ++counts_[record.item_id];
  order_.push_back(stored);
  return Ack{false, stored};
}

AggregateReport AnnotationStore::report(bool require_complete) const {
  std::lock_guard lock(mutex_);
  return aggregate(batch_, order_, require_complete);
}

std::vector<JudgmentRecord> AnnotationStore::judgments() const {
  std::lock_guard lock(mutex_);
  return order_;
}

std::size_t AnnotationStore::judgment_count() const {
  std::lock_guard lock(mutex_);
  return order_.size();
}

}  // namespace enthymeme::annotation
