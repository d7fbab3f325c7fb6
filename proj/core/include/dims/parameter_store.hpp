#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dims/tensor.hpp"

namespace dims {

/// Named trainable tensors in creation order. Every entry requires grad.
class ParameterStore {
 public:
  using Entry = std::pair<std::string, Tensor>;

  ParameterStore() = default;
  explicit ParameterStore(std::uint64_t seed, Real init_std = Real{0.05})
      : rng_(seed), init_std_(init_std) {}

  /// Gaussian(0, init_std^2) initialised parameter.
  Tensor create(const std::string& name, Shape shape);
  /// Parameter initialised to a constant (used for layer-norm gains).
  Tensor create_constant(const std::string& name, Shape shape, Real value);
  /// Registers an existing tensor; it is marked as requiring grad.
  Tensor add(const std::string& name, Tensor tensor);

  bool contains(const std::string& name) const { return index_.contains(name); }
  const Tensor& at(const std::string& name) const;
  Tensor& at(const std::string& name);

  std::size_t size() const { return entries_.size(); }
  std::size_t scalar_count() const;
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }

  void zero_grad();
  Real init_std() const { return init_std_; }

 private:
  std::vector<Entry> entries_;
  std::unordered_map<std::string, std::size_t> index_;
  std::mt19937_64 rng_{0};
  Real init_std_ = Real{0.05};
};

}  // namespace dims
