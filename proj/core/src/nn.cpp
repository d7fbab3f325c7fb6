#include "dims/nn.hpp"

namespace dims::nn {

Linear::Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out)
    : weight_(store.create(name + "/weight", {in, out})),
      bias_(store.create(name + "/bias", {1, out})) {}

Embedding::Embedding(ParameterStore& store, const std::string& name, std::size_t vocab,
                     std::size_t dim)
    : table_(store.create(name + "/table", {vocab, dim})) {}

LstmCell::LstmCell(ParameterStore& store, const std::string& name, std::size_t input,
                   std::size_t hidden)
    : input_(store, name + "/input", input, 4 * hidden),
      recurrent_(store.create(name + "/recurrent", {hidden, 4 * hidden})) {}

LstmState LstmCell::step(const Tensor& x, const LstmState& prev) const {
  const auto h = hidden_size();
  auto z = input_(x) + matmul(prev.hidden, recurrent_);
  auto in_gate = sigmoid(slice(z, 1, 0, h));
  auto forget_gate = sigmoid(slice(z, 1, h, 2 * h));
  auto candidate = tanh(slice(z, 1, 2 * h, 3 * h));
  auto out_gate = sigmoid(slice(z, 1, 3 * h, 4 * h));
  auto cell = forget_gate * prev.cell + in_gate * candidate;
  return {out_gate * tanh(cell), cell};
}

LstmState LstmCell::zero_state() const {
  return {Tensor::zeros({1, hidden_size()}), Tensor::zeros({1, hidden_size()})};
}

BiLstm::BiLstm(ParameterStore& store, const std::string& name, std::size_t input,
               std::size_t hidden, bool tied)
    : forward_(store, tied ? name + "/cell" : name + "/forward", input, hidden),
      backward_(tied ? forward_ : LstmCell(store, name + "/backward", input, hidden)) {}

BiLstmOutput BiLstm::operator()(const Tensor& inputs) const {
  const auto steps = inputs.rows();
  std::vector<Tensor> fwd(steps), bwd(steps);
  auto state = forward_.zero_state();
  for (std::size_t t = 0; t < steps; ++t) {
    state = forward_.step(row_of(inputs, t), state);
    fwd[t] = state.hidden;
  }
  state = backward_.zero_state();
  for (std::size_t t = steps; t-- > 0;) {
    state = backward_.step(row_of(inputs, t), state);
    bwd[t] = state.hidden;
  }
  auto states = concat({stack_rows(fwd), stack_rows(bwd)}, 1);
  auto final = concat({fwd.back(), bwd.front()}, 1);
  return {states, final};
}

LayerNorm::LayerNorm(ParameterStore& store, const std::string& name, std::size_t dim, Real eps)
    : gain_(store.create_constant(name + "/gain", {1, dim}, Real{1})),
      bias_(store.create_constant(name + "/bias", {1, dim}, Real{0})),
      eps_(eps) {}

}  // namespace dims::nn
