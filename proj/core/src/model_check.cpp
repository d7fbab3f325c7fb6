#include "dims/model_check.hpp"

#include <random>

#include "dims/model.hpp"
#include "dims/ops.hpp"

namespace dims {

RunConfig tiny_check_config() {
  RunConfig c;
  c.embed_dim = 8;
  c.hidden_dim = 8;
  c.attention_dim = 8;
  c.ffn_dim = 8;
  c.frame_feature_dim = 8;
  c.segment_len = 2;
  c.candidates = 4;
  c.vocab_size = 20;
  c.min_decode = 1;
  c.max_decode = 6;
  return c;
}

CheckBatch tiny_check_batch(const RunConfig& config, std::uint64_t seed) {
  std::vector<std::string> tokens = {"<pad>", "<unk>", "<s>", "</s>"};
  for (int i = 0; i < 16; ++i) tokens.push_back("t" + std::to_string(i));
  CheckBatch batch{Vocabulary::from_tokens(tokens), {}};

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto dim = static_cast<std::size_t>(config.frame_feature_dim);
  const bool raw = config.frame_featurizer == "conv";
  const Shape raw_shape = {static_cast<std::size_t>(config.frame_height),
                           static_cast<std::size_t>(config.frame_width),
                           static_cast<std::size_t>(config.frame_channels)};

  auto make = [&](std::string id, std::vector<std::string> article,
                  std::vector<std::string> summary, std::size_t positive) {
    Sample s;
    s.id = std::move(id);
    s.article = std::move(article);
    s.summary = std::move(summary);
    s.frames.kind = raw ? FrameKind::kRaw : FrameKind::kFeature;
    s.frames.frame_shape = raw ? raw_shape : Shape{dim};
    for (int f = 0; f < 4; ++f) {
      std::vector<Real> v(s.frames.frame_size());
      for (auto& x : v) x = static_cast<Real>(normal(rng));
      s.frames.frames.push_back(std::move(v));
    }
    s.cover.index = positive;
    s.positive = positive;
    batch.samples.push_back(std::move(s));
  };
  // "zz" is outside the vocabulary, so its summary occurrence is only reachable by copying.
  make("check-0", {"t0", "t1", "zz", "t2", "t3", "t4"}, {"t1", "zz", "t3"}, 2);
  make("check-1", {"t5", "t6", "t7", "t8", "t9", "t10"}, {"t6", "t8"}, 1);
  return batch;
}

GradCheckReport check_model_gradients(const RunConfig& config, const CheckBatch& batch,
                                      const GradCheckOptions& options, const GradHook& hook) {
  DimsModel model(config, batch.vocab.size());
  std::vector<EncodedSample> ids;
  for (const auto& s : batch.samples) ids.push_back(encode_sample(s, batch.vocab));
  const auto scale = Real{1} / static_cast<Real>(batch.samples.size());
  auto objective = [&]() {
    Tensor total;
    for (std::size_t i = 0; i < batch.samples.size(); ++i) {
      auto loss = model.loss(batch.samples[i], ids[i]).total;
      total = total.defined() ? total + loss : loss;
    }
    return scale * total;
  };
  return grad_check(objective, model.parameters(), options, hook);
}

}  // namespace dims
