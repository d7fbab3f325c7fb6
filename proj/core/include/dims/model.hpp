#pragma once

#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "dims/beam_search.hpp"
#include "dims/config.hpp"
#include "dims/data.hpp"
#include "dims/dual_interaction.hpp"
#include "dims/encoders.hpp"
#include "dims/losses.hpp"
#include "dims/multi_generator.hpp"
#include "dims/parameter_store.hpp"

namespace dims {

/// Everything computed from the inputs before summary decoding starts.
struct ModelEncoding {
  ArticleEncoding article;
  VideoEncoding video;
  InteractionOutput interaction;
  CoverScores cover;
  DecoderMemory memory;
};

struct Prediction {
  std::vector<std::size_t> token_ids;  // extended ids, EOS excluded
  std::vector<std::string> summary;
  std::size_t cover = 0;
  std::vector<Real> cover_scores;
  Tensor attention_scores;  // E, T_d x T_s; undefined when global attention is off
  BeamResult beam;
};

/// Full article/video summarizer: encoders, dual interaction and the
/// multi-generator, with parameters owned by one ParameterStore.
class DimsModel {
 public:
  DimsModel(const RunConfig& config, std::size_t vocab_size);

  DimsModel(const DimsModel&) = delete;
  DimsModel& operator=(const DimsModel&) = delete;

  const RunConfig& config() const { return config_; }
  std::size_t vocab_size() const { return vocab_size_; }
  ParameterStore& parameters() { return store_; }
  const ParameterStore& parameters() const { return store_; }

  /// Throws InputError when the frames do not suit the configured featurizer.
  void check_compatible(const Sample& sample) const;

  ModelEncoding encode(const Sample& sample, const EncodedSample& ids) const;

  /// Teacher-forced distributions for every target position.
  std::vector<DecodeStep> teacher_forced(const ModelEncoding& enc, const EncodedSample& ids) const;

  /// Joint loss. `rng` is only used when config.negatives subsamples negatives.
  LossBreakdown loss(const Sample& sample, const EncodedSample& ids,
                     std::mt19937_64* rng = nullptr) const;

  BeamOptions beam_options(std::size_t beam_size) const;
  /// Beam search (beam_size >= 1) plus cover selection.
  Prediction predict(const Sample& sample, const EncodedSample& ids, const Vocabulary& vocab,
                     std::size_t beam_size) const;
  /// Argmax decoding without the beam machinery.
  Prediction predict_greedy(const Sample& sample, const EncodedSample& ids,
                            const Vocabulary& vocab) const;

  const SummaryDecoder& decoder() const { return decoder_; }

 private:
  Prediction finish(const ModelEncoding& enc, BeamResult beam, const EncodedSample& ids,
                    const Vocabulary& vocab) const;

  RunConfig config_;
  std::size_t vocab_size_;
  ParameterStore store_;
  nn::Embedding embedding_;
  ArticleEncoder article_encoder_;
  VideoEncoder video_encoder_;
  DualInteraction interaction_;
  SummaryDecoder decoder_;
  CoverSelector cover_selector_;
};

}  // namespace dims
