#pragma once

#include <map>
#include <string>
#include <vector>

#include "dims/parameter_store.hpp"

namespace dims {

/// Clamps every gradient entry to [lo, hi].
void clip_gradient_values(ParameterStore& store, Real lo, Real hi);
/// Rescales all gradients so their joint L2 norm is at most max_norm.
/// Returns the norm before clipping.
Real clip_gradient_norm(ParameterStore& store, Real max_norm);
Real gradient_norm(const ParameterStore& store);

/// acc += g^2; p -= lr * g / (sqrt(acc) + eps). Accumulators are keyed by
/// parameter name and created on first use.
class Adagrad {
 public:
  Adagrad(Real learning_rate, Real eps, Real initial_accumulator);

  void step(ParameterStore& store);

  const std::map<std::string, std::vector<Real>>& accumulators() const { return accumulators_; }
  void set_accumulator(const std::string& name, std::vector<Real> values);

  Real learning_rate() const { return lr_; }

 private:
  Real lr_;
  Real eps_;
  Real init_;
  std::map<std::string, std::vector<Real>> accumulators_;
};

}  // namespace dims
