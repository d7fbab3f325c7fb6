#include "dims/optimizer.hpp"

#include <algorithm>
#include <cmath>

namespace dims {

void clip_gradient_values(ParameterStore& store, Real lo, Real hi) {
  for (auto& [name, param] : store) {
    if (!param.has_grad()) continue;
    for (auto& g : param.mutable_grad()) g = std::clamp(g, lo, hi);
  }
}

Real gradient_norm(const ParameterStore& store) {
  Real total = 0;
  for (const auto& [name, param] : store) {
    if (!param.has_grad()) continue;
    for (auto g : param.grad()) total += g * g;
  }
  return std::sqrt(total);
}

Real clip_gradient_norm(ParameterStore& store, Real max_norm) {
  const auto norm = gradient_norm(store);
  if (norm > max_norm && norm > 0) {
    const auto scale = max_norm / norm;
    for (auto& [name, param] : store) {
      if (!param.has_grad()) continue;
      for (auto& g : param.mutable_grad()) g *= scale;
    }
  }
  return norm;
}

Adagrad::Adagrad(Real learning_rate, Real eps, Real initial_accumulator)
    : lr_(learning_rate), eps_(eps), init_(initial_accumulator) {}

void Adagrad::step(ParameterStore& store) {
  for (auto& [name, param] : store) {
    if (!param.has_grad()) continue;
    auto& acc = accumulators_[name];
    if (acc.empty()) acc.assign(param.size(), init_);
    auto g = param.grad();
    auto p = param.mutable_values();
    for (std::size_t i = 0; i < p.size(); ++i) {
      acc[i] += g[i] * g[i];
      p[i] -= lr_ * g[i] / (std::sqrt(acc[i]) + eps_);
    }
  }
}

void Adagrad::set_accumulator(const std::string& name, std::vector<Real> values) {
  accumulators_[name] = std::move(values);
}

}  // namespace dims
