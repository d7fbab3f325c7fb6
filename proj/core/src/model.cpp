#include "dims/model.hpp"

#include <algorithm>
#include <numeric>

#include "dims/ops.hpp"

namespace dims {

namespace {

std::size_t as_size(std::int64_t v) { return static_cast<std::size_t>(v); }

std::shared_ptr<const FrameFeaturizer> make_featurizer(ParameterStore& store,
                                                       const RunConfig& config) {
  if (config.frame_featurizer == "conv") {
    return std::make_shared<ConvFeaturizer>(store, "video/featurizer", as_size(config.frame_height),
                                            as_size(config.frame_width),
                                            as_size(config.frame_channels),
                                            as_size(config.frame_feature_dim));
  }
  return std::make_shared<PassthroughFeaturizer>(as_size(config.frame_feature_dim));
}

ScalePosition scale_of(const RunConfig& c) {
  return c.scale_position == "logits" ? ScalePosition::kLogits : ScalePosition::kValues;
}

GlobalNormalization normalization_of(const RunConfig& c) {
  return c.global_attention_normalize == "raw" ? GlobalNormalization::kRaw
                                               : GlobalNormalization::kSoftmax;
}

EditingGateMode gate_mode_of(const RunConfig& c) {
  return c.editing_gate == "vector" ? EditingGateMode::kVector : EditingGateMode::kScalar;
}

}  // namespace

DimsModel::DimsModel(const RunConfig& config, std::size_t vocab_size)
    : config_(config),
      vocab_size_(vocab_size),
      store_(static_cast<std::uint64_t>(config.seed), static_cast<Real>(config.init_std)) {
  config_.validate();
  if (vocab_size_ <= Vocabulary::kSpecialCount) {
    throw ConfigError("vocab_size", "vocabulary must contain more than the special tokens");
  }
  const auto d = as_size(config_.hidden_dim);
  embedding_ = nn::Embedding(store_, "embedding", vocab_size_, as_size(config_.embed_dim));
  article_encoder_ = ArticleEncoder(store_, "article", embedding_, d, as_size(config_.encode_steps));
  video_encoder_ = VideoEncoder(store_, "video", make_featurizer(store_, config_), d,
                                as_size(config_.segment_len));
  InteractionSwitches switches{!config_.disable_conditional_self_attention,
                               !config_.disable_global_attention};
  interaction_ = DualInteraction(store_, "interaction", d, as_size(config_.ffn_dim),
                                 as_size(config_.attn_layers),
                                 static_cast<Real>(config_.layer_norm_eps), scale_of(config_),
                                 normalization_of(config_), switches);
  decoder_ = SummaryDecoder(store_, "decoder", embedding_, d, as_size(config_.attention_dim),
                            gate_mode_of(config_));
  cover_selector_ = CoverSelector(store_, "cover", d);
}

void DimsModel::check_compatible(const Sample& sample) const {
  const auto& f = video_encoder_.featurizer();
  if (sample.frames.kind != f.accepts()) {
    throw InputError("sample " + sample.id + " has " + to_string(sample.frames.kind) +
                     " frames but the model expects " + to_string(f.accepts()) + " frames");
  }
  if (sample.frames.count() == 0) throw InputError("sample " + sample.id + " has no frames");
  if (f.accepts() == FrameKind::kFeature && sample.frames.frame_size() != f.output_size()) {
    throw InputError("sample " + sample.id + " has frame features of size " +
                     std::to_string(sample.frames.frame_size()) + ", expected " +
                     std::to_string(f.output_size()));
  }
}

ModelEncoding DimsModel::encode(const Sample& sample, const EncodedSample& ids) const {
  check_compatible(sample);
  ModelEncoding enc;
  enc.article = article_encoder_.encode(ids.article_ids);
  enc.video = video_encoder_.encode(sample.frames);
  enc.interaction = interaction_(enc.article.states, enc.article.final, enc.video.summaries);
  enc.cover = cover_selector_(enc.video.frame_features, enc.video.segment_of_frame,
                              enc.interaction.conditional_segments,
                              enc.interaction.article_aware_video, enc.article.final);
  enc.memory.article_states = enc.article.states;
  enc.memory.video_aware_article = enc.interaction.video_aware_article;
  enc.memory.source_ext_ids = ids.article_ext_ids;
  enc.memory.extended_size = ids.extended_size;
  return enc;
}

std::vector<DecodeStep> DimsModel::teacher_forced(const ModelEncoding& enc,
                                                  const EncodedSample& ids) const {
  std::vector<DecodeStep> steps;
  steps.reserve(ids.target_ids.size());
  auto state = decoder_.initial_state(enc.article.final);
  std::size_t prev = Vocabulary::kStart;
  for (auto target : ids.target_ids) {
    steps.push_back(decoder_.step(state, prev, enc.memory));
    state = steps.back().state;
    prev = target;
  }
  return steps;
}

LossBreakdown DimsModel::loss(const Sample& sample, const EncodedSample& ids,
                              std::mt19937_64* rng) const {
  if (ids.target_ids.empty()) throw InputError("sample " + sample.id + " has no target");
  auto enc = encode(sample, ids);
  auto steps = teacher_forced(enc, ids);
  std::vector<Tensor> dists;
  dists.reserve(steps.size());
  for (const auto& s : steps) dists.push_back(s.final_dist);

  LossBreakdown out;
  out.seq = seq_loss(dists, ids.target_ids, static_cast<Real>(config_.prob_floor));

  const auto n = enc.cover.scores.size();
  if (sample.positive >= n) throw InputError("positive cover index out of range in " + sample.id);
  std::vector<std::size_t> negatives;
  for (std::size_t j = 0; j < n; ++j) {
    if (j != sample.positive) negatives.push_back(j);
  }
  const auto k = static_cast<std::size_t>(config_.negatives);
  if (k > 0 && k < negatives.size()) {
    if (rng != nullptr) {
      std::shuffle(negatives.begin(), negatives.end(), *rng);
    }
    negatives.resize(k);
    std::sort(negatives.begin(), negatives.end());
  }
  if (negatives.empty()) {
    out.pic = Tensor::scalar(0);
    out.total = out.seq;
    return out;
  }
  out.pic = hinge_loss(enc.cover.scores, sample.positive, static_cast<Real>(config_.margin),
                       negatives);
  out.total = out.seq + out.pic;
  return out;
}

BeamOptions DimsModel::beam_options(std::size_t beam_size) const {
  BeamOptions o;
  o.beam_size = beam_size;
  o.min_len = as_size(config_.min_decode);
  o.max_len = as_size(config_.max_decode);
  o.start_token = Vocabulary::kStart;
  o.eos_token = Vocabulary::kEos;
  o.banned = {Vocabulary::kPad, Vocabulary::kStart};
  return o;
}

Prediction DimsModel::predict(const Sample& sample, const EncodedSample& ids,
                              const Vocabulary& vocab, std::size_t beam_size) const {
  auto enc = encode(sample, ids);
  auto step = [&](const DecoderState& s, std::size_t prev) {
    auto out = decoder_.step(s, prev, enc.memory);
    auto probs = out.final_dist.values();
    return std::make_pair(std::vector<Real>(probs.begin(), probs.end()), out.state);
  };
  auto result = beam_search(decoder_.initial_state(enc.article.final), step, beam_options(beam_size));
  return finish(enc, std::move(result), ids, vocab);
}

Prediction DimsModel::predict_greedy(const Sample& sample, const EncodedSample& ids,
                                     const Vocabulary& vocab) const {
  auto enc = encode(sample, ids);
  auto step = [&](const DecoderState& s, std::size_t prev) {
    auto out = decoder_.step(s, prev, enc.memory);
    auto probs = out.final_dist.values();
    return std::make_pair(std::vector<Real>(probs.begin(), probs.end()), out.state);
  };
  auto result = greedy_decode(decoder_.initial_state(enc.article.final), step, beam_options(1));
  return finish(enc, std::move(result), ids, vocab);
}

Prediction DimsModel::finish(const ModelEncoding& enc, BeamResult beam, const EncodedSample& ids,
                             const Vocabulary& vocab) const {
  Prediction p;
  p.token_ids = beam.tokens;
  p.summary = decode_tokens(p.token_ids, vocab, ids.oov_tokens);
  auto scores = enc.cover.scores.values();
  p.cover_scores.assign(scores.begin(), scores.end());
  p.cover = select_cover(p.cover_scores);
  p.attention_scores = enc.interaction.scores;
  p.beam = std::move(beam);
  return p;
}

}  // namespace dims
