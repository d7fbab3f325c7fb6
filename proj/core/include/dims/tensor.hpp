#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dims {

#if defined(DIMS_REAL_FLOAT)
using Real = float;
#else
using Real = double;
#endif

using Shape = std::vector<std::size_t>;

/// Shapes of operands do not fit the operation.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A caller broke an API precondition (e.g. backward on a non-scalar).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A forward op produced NaN or Inf.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tensor;

/// View handed to a backward rule. `input_grad(i)` is empty when input i
/// does not take part in differentiation.
struct GradContext {
  std::span<const Real> out_value;
  std::span<const Real> out_grad;
  std::span<const Tensor> inputs;

  std::span<Real> input_grad(std::size_t i) const;
};

using BackwardFn = std::function<void(const GradContext&)>;

namespace detail {

struct Node {
  Shape shape;
  std::vector<Real> value;
  std::vector<Real> grad;
  bool requires_grad = false;
  bool leaf = true;
  std::vector<Tensor> inputs;
  BackwardFn backward;

  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), Real{0});
  }
};

}  // namespace detail

/// Dense row-major tensor with a shared payload. Copies are shallow; op
/// results are never mutated after construction except for their grad slot.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<Real> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, Real value);
  static Tensor scalar(Real value);
  /// 1 x n row vector.
  static Tensor row(std::vector<Real> values);

  /// Builds the output of a differentiable op. When a tape is active and any
  /// input requires grad, the node is recorded together with `backward`.
  static Tensor op_result(Shape shape, std::vector<Real> values,
                          std::vector<Tensor> inputs, BackwardFn backward);

  bool defined() const { return node_ != nullptr; }
  explicit operator bool() const { return defined(); }

  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const;
  /// Rank-2 accessors.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const Real> values() const;
  /// Writable payload. Only parameters and freshly built constants should be
  /// written through this.
  std::span<Real> mutable_values();
  Real item() const;
  Real operator[](std::size_t flat) const { return values()[flat]; }
  Real at(std::size_t r, std::size_t c) const;

  bool requires_grad() const;
  bool is_leaf() const;
  bool has_grad() const;
  /// Empty span if no gradient has been accumulated.
  std::span<const Real> grad() const;
  std::span<Real> mutable_grad();
  void zero_grad();

  /// Same values, no history, does not require grad.
  Tensor detach() const;
  /// Deep copy of values (and requires_grad flag) into a fresh leaf.
  Tensor clone() const;

  detail::Node& node() const;
  bool same_node(const Tensor& other) const { return node_ == other.node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;

  friend class Tape;
};

/// Ordered record of differentiable ops executed while the tape is active.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  void record(const Tensor& result);
  /// Reverse-mode sweep from a scalar loss. Intermediate gradients are reset
  /// first, so leaves accumulate across repeated calls.
  void backward(const Tensor& loss);
  void clear();
  std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<std::shared_ptr<detail::Node>> nodes_;
};

/// Makes a tape the active recorder for the current thread.
class TapeScope {
 public:
  explicit TapeScope(Tape& tape);
  ~TapeScope();
  TapeScope(const TapeScope&) = delete;
  TapeScope& operator=(const TapeScope&) = delete;

 private:
  Tape* previous_;
};

Tape* active_tape();

/// Runs backward on the active tape.
void backward(const Tensor& loss);

/// Enables or disables the NaN/Inf check on op outputs (thread-local, on by
/// default).
void set_finite_check(bool enabled);
bool finite_check_enabled();

}  // namespace dims
