#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dims/tensor.hpp"

namespace dims::metrics {

struct RougeComponent {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

struct RougeScore {
  RougeComponent rouge1;
  RougeComponent rouge2;
  RougeComponent rougeL;
};

/// Clipped n-gram overlap, full length.
RougeComponent rouge_n(std::span<const std::string> candidate,
                       std::span<const std::string> reference, std::size_t n);
/// Longest-common-subsequence F measure.
RougeComponent rouge_l(std::span<const std::string> candidate,
                       std::span<const std::string> reference);
RougeScore rouge(std::span<const std::string> candidate, std::span<const std::string> reference);

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

/// Scores for every candidate of one sample plus the index of the positive.
struct RankingResult {
  std::vector<double> scores;
  std::size_t positive = 0;
};

/// Candidate indices best-first; equal scores keep ascending index order.
std::vector<std::size_t> ranking_order(std::span<const double> scores);
/// 1-based rank of the positive under ranking_order.
std::size_t positive_rank(const RankingResult& ranking);

/// Mean over samples of 1 / rank(positive).
double map_score(std::span<const RankingResult> rankings);
/// Fraction of samples whose positive is within the top k of n candidates.
double recall_at_k(std::span<const RankingResult> rankings, std::size_t n, std::size_t k);

/// a.b / (|a||b|); 0 when either vector is zero (and *zero_vector is set).
double cosine_similarity(std::span<const Real> a, std::span<const Real> b,
                         bool* zero_vector = nullptr);

}  // namespace dims::metrics
