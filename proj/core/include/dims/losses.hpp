#pragma once

#include <span>
#include <vector>

#include "dims/tensor.hpp"

namespace dims {

struct LossBreakdown {
  Tensor seq;    // summed over decoding steps
  Tensor pic;    // summed over negatives
  Tensor total;  // seq + pic
};

/// -sum_t log P_t(target_t); each P_t is a 1 x extended distribution.
/// Probabilities are floored before the log.
Tensor seq_loss(std::span<const Tensor> step_distributions, std::span<const std::size_t> targets,
                Real prob_floor = Real{1e-12});

/// sum over negatives of max(0, y_neg - y_pos + margin). `scores` holds one
/// score per candidate. An empty `negatives` means every other candidate.
Tensor hinge_loss(const Tensor& scores, std::size_t positive, Real margin,
                  std::span<const std::size_t> negatives = {});

}  // namespace dims
