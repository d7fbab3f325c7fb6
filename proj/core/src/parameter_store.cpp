#include "dims/parameter_store.hpp"

namespace dims {

Tensor ParameterStore::create(const std::string& name, Shape shape) {
  std::normal_distribution<double> dist(0.0, static_cast<double>(init_std_));
  std::vector<Real> values(shape_size(shape));
  for (auto& v : values) v = static_cast<Real>(dist(rng_));
  return add(name, Tensor(std::move(shape), std::move(values)));
}

Tensor ParameterStore::create_constant(const std::string& name, Shape shape, Real value) {
  auto n = shape_size(shape);
  return add(name, Tensor(std::move(shape), std::vector<Real>(n, value)));
}

Tensor ParameterStore::add(const std::string& name, Tensor tensor) {
  if (index_.contains(name)) throw ContractError("duplicate parameter name: " + name);
  tensor.node().requires_grad = true;
  index_.emplace(name, entries_.size());
  entries_.emplace_back(name, tensor);
  return tensor;
}

const Tensor& ParameterStore::at(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter: " + name);
  return entries_[it->second].second;
}

Tensor& ParameterStore::at(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter: " + name);
  return entries_[it->second].second;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& [name, t] : entries_) n += t.size();
  return n;
}

void ParameterStore::zero_grad() {
  for (auto& [name, t] : entries_) t.zero_grad();
}

}  // namespace dims
