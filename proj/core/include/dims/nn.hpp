#pragma once

#include <span>
#include <string>
#include <vector>

#include "dims/ops.hpp"
#include "dims/parameter_store.hpp"

namespace dims::nn {

/// y = x W + b, W is in x out.
class Linear {
 public:
  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out);

  Tensor operator()(const Tensor& x) const { return linear(x, weight_, bias_); }

  const Tensor& weight() const { return weight_; }
  const Tensor& bias() const { return bias_; }
  std::size_t in_features() const { return weight_.rows(); }
  std::size_t out_features() const { return weight_.cols(); }

 private:
  Tensor weight_;
  Tensor bias_;
};

class Embedding {
 public:
  Embedding() = default;
  Embedding(ParameterStore& store, const std::string& name, std::size_t vocab, std::size_t dim);

  /// One row per id. Ids must be < vocab size.
  Tensor operator()(std::span<const std::size_t> ids) const { return gather_rows(table_, ids); }

  std::size_t vocab_size() const { return table_.rows(); }
  std::size_t dim() const { return table_.cols(); }
  const Tensor& table() const { return table_; }

 private:
  Tensor table_;
};

struct LstmState {
  Tensor hidden;  // 1 x h
  Tensor cell;    // 1 x h
};

/// Standard LSTM cell with gate order (input, forget, candidate, output).
class LstmCell {
 public:
  LstmCell() = default;
  LstmCell(ParameterStore& store, const std::string& name, std::size_t input, std::size_t hidden);

  LstmState step(const Tensor& x, const LstmState& prev) const;
  LstmState zero_state() const;
  std::size_t hidden_size() const { return recurrent_.rows(); }
  std::size_t input_size() const { return input_.weight().rows(); }

 private:
  Linear input_;
  Tensor recurrent_;
};

struct BiLstmOutput {
  Tensor states;  // T x 2h, row t = [forward_t ; backward_t]
  Tensor final;   // 1 x 2h = [forward_{T-1} ; backward_0]
};

/// Bidirectional LSTM over the rows of a T x in matrix. With `tied`, both
/// directions share one cell.
class BiLstm {
 public:
  BiLstm() = default;
  BiLstm(ParameterStore& store, const std::string& name, std::size_t input, std::size_t hidden,
         bool tied = false);

  BiLstmOutput operator()(const Tensor& inputs) const;
  std::size_t output_size() const { return 2 * forward_.hidden_size(); }

 private:
  LstmCell forward_;
  LstmCell backward_;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(ParameterStore& store, const std::string& name, std::size_t dim, Real eps);

  Tensor operator()(const Tensor& x) const { return layer_norm(x, gain_, bias_, eps_); }

 private:
  Tensor gain_;
  Tensor bias_;
  Real eps_ = Real{1e-5};
};

}  // namespace dims::nn
