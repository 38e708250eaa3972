#pragma once

// Reference implementations written straight from the definitions, kept
// apart from the library code they check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "enthymeme/annotation.hpp"
#include "enthymeme/metrics.hpp"

namespace oracle {

using Tokens = std::vector<std::string>;
using enthymeme::annotation::JudgmentMatrix;
using enthymeme::metrics::BertScore;
using enthymeme::metrics::Vector;

inline std::size_t count_ngram(const Tokens& hay, const Tokens& g) {
  std::size_t c = 0;
  for (std::size_t i = 0; i + g.size() <= hay.size(); ++i) {
    if (std::equal(g.begin(), g.end(), hay.begin() + static_cast<std::ptrdiff_t>(i))) ++c;
  }
  return c;
}

inline double bleu(const Tokens& c, const std::vector<Tokens>& refs, int max_n) {
  if (c.empty()) return 0.0;
  double product = 1.0;
  for (int n = 1; n <= max_n; ++n) {
    const std::size_t total = c.size() >= static_cast<std::size_t>(n) ? c.size() - n + 1 : 0;
    std::vector<Tokens> done;
    double matched = 0;
    for (std::size_t i = 0; i + n <= c.size(); ++i) {
      Tokens g(c.begin() + static_cast<std::ptrdiff_t>(i), c.begin() + static_cast<std::ptrdiff_t>(i + n));
      if (std::find(done.begin(), done.end(), g) != done.end()) continue;
      done.push_back(g);
      std::size_t best = 0;
      for (const auto& r : refs) best = std::max(best, count_ngram(r, g));
      matched += static_cast<double>(std::min(count_ngram(c, g), best));
    }
    double p;
    if (n >= 2 && matched == 0) {
      p = 1.0 / static_cast<double>(total + 1);
    } else {
      p = matched / static_cast<double>(total);
    }
    if (p == 0.0) return 0.0;
    product *= p;
  }
  std::size_t r = refs[0].size();
  for (const auto& ref : refs) {
    const auto d = std::llabs(static_cast<long long>(ref.size()) - static_cast<long long>(c.size()));
    const auto best = std::llabs(static_cast<long long>(r) - static_cast<long long>(c.size()));
    if (d < best || (d == best && ref.size() < r)) r = ref.size();
  }
  const double bp = c.size() < r ? std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c.size())) : 1.0;
  return bp * std::pow(product, 1.0 / max_n);
}

inline BertScore bertscore(const std::vector<Vector>& c, const std::vector<Vector>& r) {
  auto cosine = [](const Vector& a, const Vector& b) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      dot += a[i] * b[i];
      na += a[i] * a[i];
      nb += b[i] * b[i];
    }
    if (na == 0 || nb == 0) return 0.0;
    return std::clamp(dot / std::sqrt(na * nb), 0.0, 1.0);
  };
  BertScore s;
  for (const auto& x : c) {
    double best = 0;
    for (const auto& y : r) best = std::max(best, cosine(x, y));
    s.precision += best / static_cast<double>(c.size());
  }
  for (const auto& y : r) {
    double best = 0;
    for (const auto& x : c) best = std::max(best, cosine(x, y));
    s.recall += best / static_cast<double>(r.size());
  }
  s.f1 = s.precision + s.recall == 0 ? 0 : 2 * s.precision * s.recall / (s.precision + s.recall);
  return s;
}

// Two-sided exact p by listing every sign assignment over midranks.
inline double wilcoxon(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] - b[i] != 0.0) d.push_back(a[i] - b[i]);
  }
  const std::size_t n = d.size();
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n; ++i) {
    double below = 0, equal = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (std::fabs(d[j]) < std::fabs(d[i])) ++below;
      if (std::fabs(d[j]) == std::fabs(d[i])) ++equal;
    }
    ranks[i] = below + (equal + 1) / 2.0;
  }
  double w = 0;
  for (std::size_t i = 0; i < n; ++i) w += d[i] > 0 ? ranks[i] : 0;
  double le = 0, ge = 0;
  for (std::uint64_t mask = 0; mask < (1ULL << n); ++mask) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) s += (mask >> i) & 1 ? ranks[i] : 0;
    le += s <= w ? 1 : 0;
    ge += s >= w ? 1 : 0;
  }
  return std::min(1.0, 2.0 * std::min(le, ge) / std::ldexp(1.0, static_cast<int>(n)));
}

// Alpha by enumerating every ordered pair of values inside each unit.
inline double alpha(const JudgmentMatrix& m) {
  double o[2][2] = {{0, 0}, {0, 0}};
  for (const auto& unit : m) {
    std::vector<int> v;
    for (const auto& x : unit) {
      if (x) v.push_back(*x ? 1 : 0);
    }
    if (v.size() < 2) continue;
    for (std::size_t i = 0; i < v.size(); ++i) {
      for (std::size_t j = 0; j < v.size(); ++j) {
        if (i != j) o[v[i]][v[j]] += 1.0 / static_cast<double>(v.size() - 1);
      }
    }
  }
  const double n0 = o[0][0] + o[0][1];
  const double n1 = o[1][0] + o[1][1];
  const double n = n0 + n1;
  const double d_o = (o[0][1] + o[1][0]) / n;
  const double d_e = (n0 * n1 + n1 * n0) / (n * (n - 1));
  return 1.0 - d_o / d_e;
}

}  // namespace oracle
