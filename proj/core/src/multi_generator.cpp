#include "dims/multi_generator.hpp"

#include "dims/data.hpp"
#include "dims/encoders.hpp"

namespace dims {

EditingGate::EditingGate(ParameterStore& store, const std::string& name, std::size_t dim,
                         EditingGateMode mode)
    : project_(store, name + "/project", dim, mode == EditingGateMode::kScalar ? 1 : dim),
      mode_(mode) {}

Tensor EditingGate::apply(const Tensor& gate, const Tensor& article_states,
                          const Tensor& video_aware_article) const {
  if (mode_ == EditingGateMode::kScalar) {
    return gate * article_states + (Real{1} - gate) * video_aware_article;
  }
  return mul_rowvec(article_states, gate) + mul_rowvec(video_aware_article, Real{1} - gate);
}

Tensor EditingGate::operator()(const Tensor& decoder_hidden, const Tensor& article_states,
                               const Tensor& video_aware_article) const {
  return apply(gate(decoder_hidden), article_states, video_aware_article);
}

ContextAttention::ContextAttention(ParameterStore& store, const std::string& name, std::size_t dim,
                                   std::size_t attention_dim)
    : memory_proj_(store, name + "/memory_proj", dim, attention_dim),
      query_proj_(store.create(name + "/query_proj", {dim, attention_dim})),
      score_(store.create(name + "/score", {attention_dim, 1})) {}

Tensor ContextAttention::operator()(const Tensor& memory, const Tensor& decoder_hidden) const {
  auto features = tanh(add_rowvec(memory_proj_(memory), matmul(decoder_hidden, query_proj_)));
  return softmax(transpose(matmul(features, score_)), 1);
}

Tensor pointer_mix(const Tensor& vocab_dist, const Tensor& attention, const Tensor& p_gen,
                   std::span<const std::size_t> source_ext_ids, std::size_t extended_size) {
  if (attention.size() != source_ext_ids.size()) {
    throw DimensionError("pointer_mix: attention and source ids differ in length");
  }
  auto generated = p_gen * pad_cols(vocab_dist, extended_size);
  auto copied = (Real{1} - p_gen) * scatter_add(attention, source_ext_ids, extended_size);
  return generated + copied;
}

SummaryDecoder::SummaryDecoder(ParameterStore& store, const std::string& name,
                               nn::Embedding embedding, std::size_t dim, std::size_t attention_dim,
                               EditingGateMode gate_mode)
    : embedding_(std::move(embedding)),
      init_(store, name + "/init", dim, dim),
      cell_(store, name + "/cell", embedding_.dim() + dim, dim),
      gate_(store, name + "/edit_gate", dim, gate_mode),
      attention_(store, name + "/attention", dim, attention_dim),
      pre_output_(store, name + "/pre_output", 2 * dim, dim),
      output_(store, name + "/output", dim, embedding_.vocab_size()),
      generate_(store, name + "/p_gen", 2 * dim + embedding_.dim(), 1) {}

DecoderState SummaryDecoder::initial_state(const Tensor& article_final) const {
  const auto d = cell_.hidden_size();
  return {{tanh(init_(article_final)), Tensor::zeros({1, d})}, Tensor::zeros({1, d})};
}

DecodeStep SummaryDecoder::step(const DecoderState& state, std::size_t prev_token,
                                const DecoderMemory& memory) const {
  const std::size_t input_id = prev_token < vocab_size() ? prev_token : Vocabulary::kUnk;
  const std::size_t ids[] = {input_id};
  auto embedded = embedding_(ids);

  DecodeStep out;
  out.state.lstm = cell_.step(concat({embedded, state.context}, 1), state.lstm);
  const auto& hidden = out.state.lstm.hidden;
  out.edit_gate = gate_.gate(hidden);
  out.edited = gate_.apply(out.edit_gate, memory.article_states, memory.video_aware_article);
  out.attention = attention_(out.edited, hidden);
  out.state.context = matmul(out.attention, out.edited);
  auto readout = sigmoid(pre_output_(concat({hidden, out.state.context}, 1)));
  out.vocab_dist = softmax(output_(readout), 1);
  out.p_gen = sigmoid(generate_(concat({out.state.context, hidden, embedded}, 1)));
  out.final_dist = pointer_mix(out.vocab_dist, out.attention, out.p_gen, memory.source_ext_ids,
                               memory.extended_size);
  return out;
}

CoverSelector::CoverSelector(ParameterStore& store, const std::string& name, std::size_t dim)
    : segment_gate_(store, name + "/segment_gate", dim, 1),
      video_gate_(store, name + "/video_gate", dim, 1),
      score_(store, name + "/score", dim, 1) {}

CoverScores CoverSelector::operator()(const Tensor& frame_features,
                                      std::span<const std::size_t> segment_of_frame,
                                      const Tensor& conditional_segments,
                                      const Tensor& article_aware_video,
                                      const Tensor& article_final) const {
  if (segment_of_frame.size() != frame_features.rows()) {
    throw DimensionError("score_frames: one segment index per frame required");
  }
  CoverScores out;
  out.segment_gate = sigmoid(segment_gate_(article_final));
  out.video_gate = sigmoid(video_gate_(article_final));
  auto frame_weight = Real{1} - (out.segment_gate + out.video_gate);
  out.fused = out.segment_gate * gather_rows(conditional_segments, segment_of_frame) +
              out.video_gate * gather_rows(article_aware_video, segment_of_frame) +
              frame_weight * frame_features;
  out.scores = sigmoid(score_(out.fused));
  return out;
}

std::size_t select_cover(std::span<const Real> scores) {
  if (scores.empty()) throw InputError("no candidate frames to select from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = i;
  }
  return best;
}

}  // namespace dims
