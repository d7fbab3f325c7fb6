#pragma once

#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dims/parameter_store.hpp"
#include "dims/tensor.hpp"

namespace dims {

struct GradCheckOptions {
  Real eps = Real{1e-4};
  Real tol = Real{1e-4};
  /// Denominator floor for the relative error so that near-zero gradients
  /// are compared on an absolute scale.
  Real abs_floor = Real{1e-6};
};

struct ParamGradCheck {
  std::string name;
  Real max_rel_error = 0;
  std::size_t worst_index = 0;
  Real analytic = 0;
  Real numeric = 0;
};

struct GradCheckReport {
  bool passed = false;
  Real max_rel_error = 0;
  std::string worst_param;
  std::size_t worst_index = 0;
  std::vector<ParamGradCheck> params;
  std::string diagnostics;
};

using NamedTensor = std::pair<std::string, Tensor>;
/// Called on the analytic gradient before comparison; lets tests simulate a
/// broken backward rule.
using GradHook = std::function<void(const std::string& name, std::span<Real> grad)>;

/// Compares reverse-mode gradients of the scalar `f` with central
/// differences at the current values of `params`.
GradCheckReport grad_check(const std::function<Tensor()>& f, std::span<const NamedTensor> params,
                           const GradCheckOptions& options = {}, const GradHook& hook = {});

GradCheckReport grad_check(const std::function<Tensor()>& f, ParameterStore& store,
                           const GradCheckOptions& options = {}, const GradHook& hook = {});

}  // namespace dims
