#include "dims/dual_interaction.hpp"

#include <cmath>

namespace dims {

SelfAttentionLayer::SelfAttentionLayer(ParameterStore& store, const std::string& name,
                                       std::size_t dim, std::size_t ffn_dim, Real layer_norm_eps,
                                       ScalePosition scale)
    : query_(store, name + "/query", dim, dim),
      key_(store, name + "/key", dim, dim),
      value_(store, name + "/value", dim, dim),
      ffn_in_(store, name + "/ffn_in", dim, ffn_dim),
      ffn_out_(store, name + "/ffn_out", ffn_dim, dim),
      attention_norm_(store, name + "/attention_norm", dim, layer_norm_eps),
      ffn_norm_(store, name + "/ffn_norm", dim, layer_norm_eps),
      scale_(scale),
      dim_(dim) {}

SelfAttentionLayer::Output SelfAttentionLayer::forward(const Tensor& segments) const {
  const Real inv_sqrt_d = Real{1} / std::sqrt(static_cast<Real>(dim_));
  auto q = query_(segments);
  auto k = key_(segments);
  auto v = value_(segments);
  auto logits = matmul(q, transpose(k));
  if (scale_ == ScalePosition::kLogits) logits = inv_sqrt_d * logits;
  auto weights = softmax(logits, 1);
  auto attended = matmul(weights, v);
  if (scale_ == ScalePosition::kValues) attended = inv_sqrt_d * attended;
  auto hidden = attention_norm_(segments + attended);
  auto output = ffn_norm_(hidden + ffn_out_(relu(ffn_in_(hidden))));
  return {attended, weights, output};
}

ConditionGate::ConditionGate(ParameterStore& store, const std::string& name, std::size_t dim)
    : project_(store, name + "/project", dim, 1) {}

Tensor ConditionGate::logits(const Tensor& summaries, const Tensor& article_final) const {
  return project_(mul_rowvec(summaries, article_final));
}

Tensor ConditionGate::operator()(const Tensor& summaries, const Tensor& article_final) const {
  return sigmoid(logits(summaries, article_final));
}

ConditionalSelfAttention::ConditionalSelfAttention(ParameterStore& store, const std::string& name,
                                                   std::size_t dim, std::size_t ffn_dim,
                                                   std::size_t layers, Real layer_norm_eps,
                                                   ScalePosition scale)
    : gate_(store, name + "/gate", dim) {
  for (std::size_t l = 0; l < layers; ++l) {
    layers_.emplace_back(store, name + "/layer" + std::to_string(l), dim, ffn_dim, layer_norm_eps,
                         scale);
  }
}

ConditionalAttentionOutput ConditionalSelfAttention::operator()(const Tensor& summaries,
                                                                const Tensor& article_final) const {
  ConditionalAttentionOutput out;
  Tensor h = summaries;
  for (const auto& layer : layers_) {
    auto step = layer.forward(h);
    out.layer_weights.push_back(step.weights);
    h = step.output;
  }
  out.gates = gate_(summaries, article_final);
  out.conditional = scale_rows(h, out.gates);
  return out;
}

GlobalAttention::GlobalAttention(ParameterStore& store, const std::string& name, std::size_t dim,
                                 GlobalNormalization normalization)
    : text_proj_(store, name + "/text_proj", dim, dim),
      video_proj_(store, name + "/video_proj", dim, dim),
      normalization_(normalization) {}

GlobalAttentionOutput GlobalAttention::operator()(const Tensor& article_states,
                                                  const Tensor& summaries) const {
  GlobalAttentionOutput out;
  out.scores = matmul(text_proj_(article_states), transpose(video_proj_(summaries)));
  if (normalization_ == GlobalNormalization::kSoftmax) {
    out.row_weights = softmax(out.scores, 1);
    out.column_weights = softmax(out.scores, 0);
    out.video_aware_article = matmul(out.row_weights, summaries);
    out.article_aware_video = matmul(transpose(out.column_weights), article_states);
  } else {
    out.video_aware_article = matmul(out.scores, summaries);
    out.article_aware_video = matmul(transpose(out.scores), article_states);
  }
  return out;
}

DualInteraction::DualInteraction(ParameterStore& store, const std::string& name, std::size_t dim,
                                 std::size_t ffn_dim, std::size_t layers, Real layer_norm_eps,
                                 ScalePosition scale, GlobalNormalization normalization,
                                 InteractionSwitches switches)
    : switches_(switches) {
  if (switches_.conditional_self_attention) {
    conditional_ = ConditionalSelfAttention(store, name + "/conditional", dim, ffn_dim, layers,
                                            layer_norm_eps, scale);
  }
  if (switches_.global_attention) {
    global_ = GlobalAttention(store, name + "/global", dim, normalization);
  }
}

InteractionOutput DualInteraction::operator()(const Tensor& article_states,
                                              const Tensor& article_final,
                                              const Tensor& summaries) const {
  InteractionOutput out;
  if (switches_.conditional_self_attention) {
    auto cond = conditional_(summaries, article_final);
    out.conditional_segments = cond.conditional;
    out.gates = cond.gates;
  } else {
    out.conditional_segments = summaries;
  }
  if (switches_.global_attention) {
    auto global = global_(article_states, summaries);
    out.scores = global.scores;
    out.video_aware_article = global.video_aware_article;
    out.article_aware_video = global.article_aware_video;
    out.row_weights = global.row_weights;
    out.column_weights = global.column_weights;
  } else {
    out.video_aware_article = article_states;
    out.article_aware_video = out.conditional_segments;
  }
  return out;
}

}  // namespace dims
