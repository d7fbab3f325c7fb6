#pragma once

#include <cstdint>
#include <vector>

#include "dims/config.hpp"
#include "dims/data.hpp"
#include "dims/grad_check.hpp"

namespace dims {

/// Tiny dimensions for finite-difference checks: d = 8, 4 frames in
/// segments of 2, a 20-word vocabulary.
RunConfig tiny_check_config();

struct CheckBatch {
  Vocabulary vocab;
  std::vector<Sample> samples;  // two samples, 6-token articles, one OOV copy target
};
CheckBatch tiny_check_batch(const RunConfig& config, std::uint64_t seed = 7);

/// Finite-difference check of the joint loss averaged over `batch`, for
/// every parameter of a model built from `config`.
GradCheckReport check_model_gradients(const RunConfig& config, const CheckBatch& batch,
                                      const GradCheckOptions& options = {},
                                      const GradHook& hook = {});

}  // namespace dims
