#include "dims/encoders.hpp"

namespace dims {

ArticleEncoder::ArticleEncoder(ParameterStore& store, const std::string& name,
                               nn::Embedding embedding, std::size_t hidden, std::size_t max_steps,
                               bool tied_directions)
    : embedding_(std::move(embedding)),
      rnn_(store, name + "/rnn", embedding_.dim(), hidden / 2, tied_directions),
      max_steps_(max_steps) {}

ArticleEncoding ArticleEncoder::encode(std::span<const std::size_t> ids) const {
  if (ids.empty()) throw InputError("article is empty");
  if (ids.size() > max_steps_) {
    throw InputError("article has " + std::to_string(ids.size()) + " tokens, limit is " +
                     std::to_string(max_steps_));
  }
  for (auto id : ids) {
    if (id >= embedding_.vocab_size()) {
      throw InputError("token id " + std::to_string(id) + " outside vocabulary of " +
                       std::to_string(embedding_.vocab_size()));
    }
  }
  auto out = rnn_(embedding_(ids));
  return {out.states, out.final};
}

std::vector<Segment> segment_frames(std::size_t frame_count, std::size_t frames_per_segment) {
  if (frame_count == 0) throw InputError("video has no frames");
  if (frames_per_segment == 0) throw InputError("segment length must be positive");
  std::vector<Segment> out;
  for (std::size_t start = 0; start < frame_count; start += frames_per_segment) {
    Segment seg;
    seg.real_count = std::min(frames_per_segment, frame_count - start);
    for (std::size_t j = 0; j < frames_per_segment; ++j) {
      seg.frames.push_back(start + std::min(j, seg.real_count - 1));
    }
    out.push_back(std::move(seg));
  }
  return out;
}

Tensor PassthroughFeaturizer::features(const FrameSet& frames) const {
  if (frames.kind != FrameKind::kFeature) {
    throw InputError("passthrough featurizer needs precomputed feature frames");
  }
  if (frames.frame_size() != dim_) {
    throw InputError("feature frames have " + std::to_string(frames.frame_size()) +
                     " dims, model expects " + std::to_string(dim_));
  }
  std::vector<Real> flat;
  flat.reserve(frames.count() * dim_);
  for (const auto& f : frames.frames) flat.insert(flat.end(), f.begin(), f.end());
  return Tensor({frames.count(), dim_}, std::move(flat));
}

ConvFeaturizer::ConvFeaturizer(ParameterStore& store, const std::string& name, std::size_t height,
                               std::size_t width, std::size_t channels, std::size_t out_dim)
    : frame_shape_{height, width, channels} {
  std::size_t in = channels;
  for (std::size_t b = 0; b < 3; ++b) {
    const auto prefix = name + "/conv" + std::to_string(b);
    blocks_.push_back({store.create(prefix + "/weight", {kChannels[b], in, 3, 3}),
                       store.create(prefix + "/bias", {kChannels[b]})});
    in = kChannels[b];
  }
  head_ = nn::Linear(store, name + "/head", in, out_dim);
}

Tensor ConvFeaturizer::features(const FrameSet& frames) const {
  if (frames.kind != FrameKind::kRaw) throw InputError("conv featurizer needs raw frames");
  if (frames.frame_shape != frame_shape_) {
    throw InputError("raw frames have shape " + shape_str(frames.frame_shape) + ", model expects " +
                     shape_str(frame_shape_));
  }
  const auto H = frame_shape_[0], W = frame_shape_[1], C = frame_shape_[2];
  std::vector<Tensor> rows;
  for (const auto& f : frames.frames) {
    std::vector<Real> chw(f.size());
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x)
        for (std::size_t c = 0; c < C; ++c) chw[(c * H + y) * W + x] = f[(y * W + x) * C + c];
    Tensor h({C, H, W}, std::move(chw));
    for (const auto& block : blocks_) h = relu(conv2d(h, block.weight, block.bias, 2, 1));
    rows.push_back(head_(global_avg_pool(h)));
  }
  return stack_rows(rows);
}

VideoEncoder::VideoEncoder(ParameterStore& store, const std::string& name,
                           std::shared_ptr<const FrameFeaturizer> featurizer, std::size_t hidden,
                           std::size_t frames_per_segment)
    : featurizer_(std::move(featurizer)),
      frame_projection_(store, name + "/frame_projection", featurizer_->output_size(), hidden),
      segment_rnn_(store, name + "/segment_rnn", hidden, hidden / 2),
      frames_per_segment_(frames_per_segment) {}

Tensor VideoEncoder::frame_features(const Tensor& features) const {
  return relu(frame_projection_(features));
}

VideoEncoding VideoEncoder::encode_segments(const Tensor& frame_features) const {
  VideoEncoding out;
  out.frame_features = frame_features;
  out.segments = segment_frames(frame_features.rows(), frames_per_segment_);
  std::vector<Tensor> summaries;
  for (std::size_t i = 0; i < out.segments.size(); ++i) {
    const auto& seg = out.segments[i];
    auto enc = segment_rnn_(gather_rows(frame_features, seg.frames));
    out.frame_states.push_back(enc.states);
    summaries.push_back(enc.final);
    for (std::size_t j = 0; j < seg.real_count; ++j) out.segment_of_frame.push_back(i);
  }
  out.summaries = stack_rows(summaries);
  return out;
}

VideoEncoding VideoEncoder::encode(const FrameSet& frames) const {
  if (frames.count() == 0) throw InputError("video has no frames");
  return encode_segments(frame_features(featurizer_->features(frames)));
}

}  // namespace dims
