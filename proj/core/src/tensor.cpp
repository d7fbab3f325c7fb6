#include "dims/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace dims {

namespace {

thread_local Tape* g_active_tape = nullptr;
thread_local bool g_finite_check = true;

void check_shape(const Shape& shape) {
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + shape_str(shape));
  }
}

}  // namespace

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

std::span<Real> GradContext::input_grad(std::size_t i) const {
  auto& node = inputs[i].node();
  if (!node.requires_grad) return {};
  node.ensure_grad();
  return node.grad;
}

Tensor::Tensor(Shape shape, std::vector<Real> values, bool requires_grad) {
  check_shape(shape);
  if (shape_size(shape) != values.size()) {
    throw DimensionError("shape " + shape_str(shape) + " does not match " +
                         std::to_string(values.size()) + " values");
  }
  node_ = std::make_shared<detail::Node>();
  node_->shape = std::move(shape);
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<Real>(n, Real{0}), requires_grad);
}

Tensor Tensor::full(Shape shape, Real value) {
  auto n = shape_size(shape);
  return Tensor(std::move(shape), std::vector<Real>(n, value));
}

Tensor Tensor::scalar(Real value) { return Tensor({1}, {value}); }

Tensor Tensor::row(std::vector<Real> values) {
  auto n = values.size();
  return Tensor({1, n}, std::move(values));
}

Tensor Tensor::op_result(Shape shape, std::vector<Real> values, std::vector<Tensor> inputs,
                         BackwardFn backward) {
  if (g_finite_check) {
    for (auto v : values) {
      if (!std::isfinite(v)) {
        throw NumericError("non-finite value produced by op with output shape " +
                           shape_str(shape));
      }
    }
  }
  Tensor out(std::move(shape), std::move(values));
  bool needs_grad = false;
  for (const auto& in : inputs) needs_grad = needs_grad || in.requires_grad();
  if (needs_grad && g_active_tape != nullptr) {
    auto& node = *out.node_;
    node.requires_grad = true;
    node.leaf = false;
    node.inputs = std::move(inputs);
    node.backward = std::move(backward);
    g_active_tape->record(out);
  }
  return out;
}

const Shape& Tensor::shape() const { return node().shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) throw DimensionError("axis out of range for shape " + shape_str(s));
  return s[axis];
}

std::size_t Tensor::size() const { return node().value.size(); }

std::size_t Tensor::rows() const {
  if (rank() != 2) throw DimensionError("expected a matrix, got " + shape_str(shape()));
  return shape()[0];
}

std::size_t Tensor::cols() const {
  if (rank() != 2) throw DimensionError("expected a matrix, got " + shape_str(shape()));
  return shape()[1];
}

std::span<const Real> Tensor::values() const { return node().value; }
std::span<Real> Tensor::mutable_values() { return node().value; }

Real Tensor::item() const {
  if (size() != 1) throw ContractError("item() on tensor of shape " + shape_str(shape()));
  return node().value[0];
}

Real Tensor::at(std::size_t r, std::size_t c) const {
  return node().value[r * cols() + c];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
bool Tensor::is_leaf() const { return node().leaf; }
bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<const Real> Tensor::grad() const { return node().grad; }

std::span<Real> Tensor::mutable_grad() {
  node().ensure_grad();
  return node().grad;
}

void Tensor::zero_grad() {
  auto& n = node();
  std::fill(n.grad.begin(), n.grad.end(), Real{0});
}

Tensor Tensor::detach() const { return Tensor(shape(), node().value); }

Tensor Tensor::clone() const { return Tensor(shape(), node().value, requires_grad() && is_leaf()); }

detail::Node& Tensor::node() const {
  if (!node_) throw ContractError("use of an undefined tensor");
  return *node_;
}

void Tape::record(const Tensor& result) { nodes_.push_back(result.node_); }

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ContractError("backward requires a scalar loss, got " +
                        (loss.defined() ? shape_str(loss.shape()) : std::string("undefined")));
  }
  if (!loss.requires_grad()) {
    throw ContractError("loss does not depend on any tensor that requires grad");
  }
  for (auto& node : nodes_) {
    if (!node->grad.empty()) std::fill(node->grad.begin(), node->grad.end(), Real{0});
  }
  auto& root = loss.node();
  root.ensure_grad();
  root.grad[0] += Real{1};
  if (root.leaf) return;

  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    auto& node = **it;
    if (node.grad.empty() || !node.backward) continue;
    GradContext ctx{node.value, node.grad, node.inputs};
    node.backward(ctx);
  }
}

void Tape::clear() { nodes_.clear(); }

TapeScope::TapeScope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
TapeScope::~TapeScope() { g_active_tape = previous_; }

Tape* active_tape() { return g_active_tape; }

void backward(const Tensor& loss) {
  if (g_active_tape == nullptr) throw ContractError("backward called without an active tape");
  g_active_tape->backward(loss);
}

void set_finite_check(bool enabled) { g_finite_check = enabled; }
bool finite_check_enabled() { return g_finite_check; }

}  // namespace dims
