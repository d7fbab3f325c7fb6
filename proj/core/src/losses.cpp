#include "dims/losses.hpp"

#include <string>

#include "dims/ops.hpp"

namespace dims {

Tensor seq_loss(std::span<const Tensor> step_distributions, std::span<const std::size_t> targets,
                Real prob_floor) {
  if (step_distributions.size() != targets.size() || targets.empty()) {
    throw ContractError("seq_loss needs one distribution per target (got " +
                        std::to_string(step_distributions.size()) + " and " +
                        std::to_string(targets.size()) + ")");
  }
  std::vector<Tensor> picked;
  picked.reserve(targets.size());
  for (std::size_t t = 0; t < targets.size(); ++t) {
    const auto& dist = step_distributions[t];
    if (targets[t] >= dist.size()) {
      throw ContractError("target id " + std::to_string(targets[t]) + " outside distribution of size " +
                          std::to_string(dist.size()));
    }
    picked.push_back(pick(dist, targets[t]));
  }
  return Real{-1} * sum(log_floor(concat(picked, 0), prob_floor));
}

Tensor hinge_loss(const Tensor& scores, std::size_t positive, Real margin,
                  std::span<const std::size_t> negatives) {
  const auto n = scores.size();
  if (positive >= n) throw ContractError("positive index out of range");
  std::vector<std::size_t> neg(negatives.begin(), negatives.end());
  if (neg.empty()) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j != positive) neg.push_back(j);
    }
  }
  if (neg.empty()) return Tensor::scalar(0);
  for (auto j : neg) {
    if (j >= n || j == positive) throw ContractError("invalid negative index");
  }
  if (scores.rank() != 2 || (scores.cols() != 1 && scores.rows() != 1)) {
    throw DimensionError("hinge_loss expects a score vector, got " + shape_str(scores.shape()));
  }
  auto column = scores.cols() == 1 ? scores : transpose(scores);
  auto neg_scores = gather_rows(column, neg);  // k x 1
  auto pos_score = pick(scores, positive);
  // max(0, y_neg - y_pos + margin) with a broadcast scalar.
  auto diff = sub(neg_scores, pos_score) + margin;
  return sum(relu(diff));
}

}  // namespace dims
