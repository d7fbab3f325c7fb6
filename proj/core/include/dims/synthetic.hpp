#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dims/data.hpp"

namespace dims {

/// Parameters of the synthetic corpus. Each sample has a topic; the article
/// mentions the topic keyword `keywords_per_article` times among filler words,
/// the summary is every keyword occurrence followed by its next `follow`
/// words, and exactly one candidate frame carries the topic's feature vector.
struct SyntheticSpec {
  std::int64_t samples = 32;
  std::int64_t topics = 8;
  std::int64_t filler_vocab = 60;
  std::int64_t article_len_min = 20;
  std::int64_t article_len_max = 30;
  std::int64_t keywords_per_article = 2;
  std::int64_t follow = 4;
  std::int64_t feature_dim = 128;
  std::int64_t candidates = 10;
  std::int64_t segment_len = 5;
  /// Frames showing some other topic, placed outside the cover's segment.
  std::int64_t distractors = 1;
  /// Per-entry noise as a fraction of the signal scale (vectors have unit
  /// expected norm).
  double noise = 0.0;
  std::int64_t seed = 1;
  std::string id_prefix = "syn";

  void validate() const;
  std::string to_json() const;
  static SyntheticSpec from_json(const std::string& text);
};

std::string keyword_token(std::int64_t topic);
std::string filler_token(std::int64_t index);

/// Deterministic for a given spec (seed included).
std::vector<Sample> gen_synthetic(const SyntheticSpec& spec);

}  // namespace dims
