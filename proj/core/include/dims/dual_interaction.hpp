#pragma once

#include <string>
#include <vector>

#include "dims/nn.hpp"

namespace dims {

enum class ScalePosition { kValues, kLogits };
enum class GlobalNormalization { kSoftmax, kRaw };

/// Single-head self-attention over segment summaries followed by the
/// residual/layer-norm and position-wise feed-forward sublayers.
class SelfAttentionLayer {
 public:
  SelfAttentionLayer() = default;
  SelfAttentionLayer(ParameterStore& store, const std::string& name, std::size_t dim,
                     std::size_t ffn_dim, Real layer_norm_eps, ScalePosition scale);

  struct Output {
    Tensor attended;  // sum_j alpha_ij V_j, scaled by 1/sqrt(d) (before the sublayers)
    Tensor weights;   // T_s x T_s, alpha
    Tensor output;    // T_s x d
  };

  Output forward(const Tensor& segments) const;
  Tensor operator()(const Tensor& segments) const { return forward(segments).output; }

 private:
  nn::Linear query_, key_, value_;
  nn::Linear ffn_in_, ffn_out_;
  nn::LayerNorm attention_norm_, ffn_norm_;
  ScalePosition scale_ = ScalePosition::kValues;
  std::size_t dim_ = 0;
};

/// Article-conditioned gate beta_i = sigmoid(F_s(S_i * h_final)) with an
/// elementwise product.
class ConditionGate {
 public:
  ConditionGate() = default;
  ConditionGate(ParameterStore& store, const std::string& name, std::size_t dim);

  /// T_s x 1 gates.
  Tensor operator()(const Tensor& summaries, const Tensor& article_final) const;
  /// Pre-sigmoid argument, exposed for monotonicity checks.
  Tensor logits(const Tensor& summaries, const Tensor& article_final) const;

 private:
  nn::Linear project_;
};

struct ConditionalAttentionOutput {
  Tensor conditional;  // T_s x d, beta_i * S_hat_i
  Tensor gates;        // T_s x 1
  std::vector<Tensor> layer_weights;
};

class ConditionalSelfAttention {
 public:
  ConditionalSelfAttention() = default;
  ConditionalSelfAttention(ParameterStore& store, const std::string& name, std::size_t dim,
                           std::size_t ffn_dim, std::size_t layers, Real layer_norm_eps,
                           ScalePosition scale);

  ConditionalAttentionOutput operator()(const Tensor& summaries, const Tensor& article_final) const;
  std::size_t depth() const { return layers_.size(); }

 private:
  std::vector<SelfAttentionLayer> layers_;
  ConditionGate gate_;
};

struct GlobalAttentionOutput {
  Tensor scores;              // E, T_d x T_s
  Tensor video_aware_article; // T_d x d
  Tensor article_aware_video; // T_s x d
  Tensor row_weights;         // softmax of E over segments (undefined in raw mode)
  Tensor column_weights;      // softmax of E over tokens (undefined in raw mode)
};

/// Two-way attention E = F_h(h) F_t(S)^T between tokens and segments.
class GlobalAttention {
 public:
  GlobalAttention() = default;
  GlobalAttention(ParameterStore& store, const std::string& name, std::size_t dim,
                  GlobalNormalization normalization);

  GlobalAttentionOutput operator()(const Tensor& article_states, const Tensor& summaries) const;

 private:
  nn::Linear text_proj_, video_proj_;
  GlobalNormalization normalization_ = GlobalNormalization::kSoftmax;
};

struct InteractionOutput {
  Tensor conditional_segments;  // S^c
  Tensor scores;                // E (undefined when global attention is off)
  Tensor video_aware_article;   // h_hat
  Tensor article_aware_video;   // S_hat^c
  Tensor gates;                 // beta (undefined when conditional attention is off)
  Tensor row_weights;
  Tensor column_weights;
};

struct InteractionSwitches {
  bool conditional_self_attention = true;
  bool global_attention = true;
};

/// Conditional self-attention plus global attention, each of which can be
/// switched off for ablations.
class DualInteraction {
 public:
  DualInteraction() = default;
  DualInteraction(ParameterStore& store, const std::string& name, std::size_t dim,
                  std::size_t ffn_dim, std::size_t layers, Real layer_norm_eps, ScalePosition scale,
                  GlobalNormalization normalization, InteractionSwitches switches);

  InteractionOutput operator()(const Tensor& article_states, const Tensor& article_final,
                               const Tensor& summaries) const;
  const InteractionSwitches& switches() const { return switches_; }

 private:
  ConditionalSelfAttention conditional_;
  GlobalAttention global_;
  InteractionSwitches switches_;
};

}  // namespace dims
