#pragma once

#include <span>
#include <string>
#include <vector>

#include "dims/nn.hpp"

namespace dims {

enum class EditingGateMode { kScalar, kVector };

/// gamma_e = sigmoid(F_d(d_t)); g_i = gamma_e h_i + (1 - gamma_e) h_hat_i.
class EditingGate {
 public:
  EditingGate() = default;
  EditingGate(ParameterStore& store, const std::string& name, std::size_t dim, EditingGateMode mode);

  /// 1 x 1 (scalar mode) or 1 x d (vector mode).
  Tensor gate(const Tensor& decoder_hidden) const { return sigmoid(project_(decoder_hidden)); }
  Tensor operator()(const Tensor& decoder_hidden, const Tensor& article_states,
                    const Tensor& video_aware_article) const;
  Tensor apply(const Tensor& gate, const Tensor& article_states,
               const Tensor& video_aware_article) const;

 private:
  nn::Linear project_;
  EditingGateMode mode_ = EditingGateMode::kScalar;
};

/// Additive attention: v^T tanh(W_g g_i + W_d d_t + b), normalised over i.
class ContextAttention {
 public:
  ContextAttention() = default;
  ContextAttention(ParameterStore& store, const std::string& name, std::size_t dim,
                   std::size_t attention_dim);

  /// 1 x T_d weights.
  Tensor operator()(const Tensor& memory, const Tensor& decoder_hidden) const;

 private:
  nn::Linear memory_proj_;
  Tensor query_proj_;
  Tensor score_;
};

/// p_gen * [P_v, 0...] + (1 - p_gen) * scatter(attention onto source ids).
Tensor pointer_mix(const Tensor& vocab_dist, const Tensor& attention, const Tensor& p_gen,
                   std::span<const std::size_t> source_ext_ids, std::size_t extended_size);

struct DecoderState {
  nn::LstmState lstm;  // d_t
  Tensor context;      // h^c_t, 1 x d
};

/// Per-sample inputs the decoder attends over.
struct DecoderMemory {
  Tensor article_states;        // h^x
  Tensor video_aware_article;   // h_hat^x
  std::vector<std::size_t> source_ext_ids;
  std::size_t extended_size = 0;
};

struct DecodeStep {
  DecoderState state;
  Tensor edit_gate;
  Tensor edited;      // g
  Tensor attention;   // delta, 1 x T_d
  Tensor vocab_dist;  // P_v, 1 x V
  Tensor p_gen;       // 1 x 1
  Tensor final_dist;  // 1 x extended
};

/// LSTM decoder with the editing gate, context attention and pointer.
class SummaryDecoder {
 public:
  SummaryDecoder() = default;
  SummaryDecoder(ParameterStore& store, const std::string& name, nn::Embedding embedding,
                 std::size_t dim, std::size_t attention_dim, EditingGateMode gate_mode);

  /// d_0 = tanh(W h_final + b), zero cell and zero context.
  DecoderState initial_state(const Tensor& article_final) const;
  /// One step fed with the previous token; extended ids map to UNK.
  DecodeStep step(const DecoderState& state, std::size_t prev_token, const DecoderMemory& memory) const;

  std::size_t vocab_size() const { return embedding_.vocab_size(); }

 private:
  nn::Embedding embedding_;
  nn::Linear init_;
  nn::LstmCell cell_;
  EditingGate gate_;
  ContextAttention attention_;
  nn::Linear pre_output_;
  nn::Linear output_;
  nn::Linear generate_;
};

struct CoverScores {
  Tensor scores;         // N x 1, y^c in (0, 1)
  Tensor fused;          // N x d, p^i_j
  Tensor segment_gate;   // gamma^1_f
  Tensor video_gate;     // gamma^2_f
};

/// p = g1 S^c_i + g2 S_hat^c_i + (1 - g1 - g2) M^i_j, y = sigmoid(F_c(p)).
class CoverSelector {
 public:
  CoverSelector() = default;
  CoverSelector(ParameterStore& store, const std::string& name, std::size_t dim);

  CoverScores operator()(const Tensor& frame_features, std::span<const std::size_t> segment_of_frame,
                         const Tensor& conditional_segments, const Tensor& article_aware_video,
                         const Tensor& article_final) const;

 private:
  nn::Linear segment_gate_, video_gate_, score_;
};

/// Argmax; ties go to the lowest index.
std::size_t select_cover(std::span<const Real> scores);

}  // namespace dims
