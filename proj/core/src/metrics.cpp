#include "dims/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "dims/data.hpp"

namespace dims::metrics {

namespace {

RougeComponent make_component(double overlap, double cand_total, double ref_total) {
  RougeComponent c;
  c.precision = cand_total > 0 ? overlap / cand_total : 0.0;
  c.recall = ref_total > 0 ? overlap / ref_total : 0.0;
  const double denom = c.precision + c.recall;
  c.f1 = denom > 0 ? 2.0 * c.precision * c.recall / denom : 0.0;
  return c;
}

std::map<std::vector<std::string>, std::size_t> ngram_counts(std::span<const std::string> tokens,
                                                              std::size_t n) {
  std::map<std::vector<std::string>, std::size_t> counts;
  if (tokens.size() < n) return counts;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    ++counts[std::vector<std::string>(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                      tokens.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

}  // namespace

RougeComponent rouge_n(std::span<const std::string> candidate,
                       std::span<const std::string> reference, std::size_t n) {
  if (n == 0) throw ContractError("rouge_n: n must be positive");
  auto cand = ngram_counts(candidate, n);
  auto ref = ngram_counts(reference, n);
  std::size_t overlap = 0;
  for (const auto& [gram, count] : cand) {
    auto it = ref.find(gram);
    if (it != ref.end()) overlap += std::min(count, it->second);
  }
  const double cand_total = candidate.size() >= n ? static_cast<double>(candidate.size() - n + 1) : 0.0;
  const double ref_total = reference.size() >= n ? static_cast<double>(reference.size() - n + 1) : 0.0;
  return make_component(static_cast<double>(overlap), cand_total, ref_total);
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

RougeComponent rouge_l(std::span<const std::string> candidate,
                       std::span<const std::string> reference) {
  if (candidate.empty() || reference.empty()) return {};
  const auto lcs = static_cast<double>(lcs_length(candidate, reference));
  return make_component(lcs, static_cast<double>(candidate.size()),
                        static_cast<double>(reference.size()));
}

RougeScore rouge(std::span<const std::string> candidate, std::span<const std::string> reference) {
  return {rouge_n(candidate, reference, 1), rouge_n(candidate, reference, 2),
          rouge_l(candidate, reference)};
}

std::vector<std::size_t> ranking_order(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

std::size_t positive_rank(const RankingResult& ranking) {
  if (ranking.positive >= ranking.scores.size()) {
    throw DataError("ranking has no positive candidate (index " +
                    std::to_string(ranking.positive) + " of " +
                    std::to_string(ranking.scores.size()) + ")");
  }
  const double p = ranking.scores[ranking.positive];
  std::size_t rank = 1;
  for (std::size_t j = 0; j < ranking.scores.size(); ++j) {
    if (ranking.scores[j] > p || (ranking.scores[j] == p && j < ranking.positive)) ++rank;
  }
  return rank;
}

double map_score(std::span<const RankingResult> rankings) {
  if (rankings.empty()) throw ContractError("map_score: no rankings");
  double total = 0;
  for (const auto& r : rankings) total += 1.0 / static_cast<double>(positive_rank(r));
  return total / static_cast<double>(rankings.size());
}

double recall_at_k(std::span<const RankingResult> rankings, std::size_t n, std::size_t k) {
  if (k > n) {
    throw ContractError("recall_at_k: k=" + std::to_string(k) + " exceeds n=" + std::to_string(n));
  }
  if (rankings.empty()) throw ContractError("recall_at_k: no rankings");
  std::size_t hits = 0;
  for (const auto& r : rankings) {
    if (r.scores.size() != n) {
      throw ContractError("recall_at_k: sample has " + std::to_string(r.scores.size()) +
                          " candidates, expected " + std::to_string(n));
    }
    if (positive_rank(r) <= k) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(rankings.size());
}

double cosine_similarity(std::span<const Real> a, std::span<const Real> b, bool* zero_vector) {
  if (a.size() != b.size()) throw DimensionError("cosine_similarity: length mismatch");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * static_cast<double>(b[i]);
    na += static_cast<double>(a[i]) * static_cast<double>(a[i]);
    nb += static_cast<double>(b[i]) * static_cast<double>(b[i]);
  }
  if (zero_vector) *zero_vector = na == 0 || nb == 0;
  if (na == 0 || nb == 0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

}  // namespace dims::metrics
