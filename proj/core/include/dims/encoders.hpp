#pragma once

#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dims/data.hpp"
#include "dims/nn.hpp"

namespace dims {

/// Input violates an encoder precondition (empty sequence, bad id, ...).
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ArticleEncoding {
  Tensor states;  // T_d x d
  Tensor final;   // 1 x d, [last forward ; last backward]
};

/// Word embeddings followed by a bidirectional LSTM; each direction has d/2 units.
class ArticleEncoder {
 public:
  ArticleEncoder() = default;
  ArticleEncoder(ParameterStore& store, const std::string& name, nn::Embedding embedding,
                 std::size_t hidden, std::size_t max_steps, bool tied_directions = false);

  ArticleEncoding encode(std::span<const std::size_t> ids) const;
  std::size_t output_size() const { return rnn_.output_size(); }

 private:
  nn::Embedding embedding_;
  nn::BiLstm rnn_;
  std::size_t max_steps_ = 100;
};

/// Frame indices of one segment; short final segments repeat their last frame.
struct Segment {
  std::vector<std::size_t> frames;
  std::size_t real_count = 0;
};

std::vector<Segment> segment_frames(std::size_t frame_count, std::size_t frames_per_segment);

/// Produces one feature row per candidate frame.
class FrameFeaturizer {
 public:
  virtual ~FrameFeaturizer() = default;
  virtual Tensor features(const FrameSet& frames) const = 0;
  virtual std::size_t output_size() const = 0;
  virtual FrameKind accepts() const = 0;
};

/// Precomputed feature vectors are used as they are.
class PassthroughFeaturizer final : public FrameFeaturizer {
 public:
  explicit PassthroughFeaturizer(std::size_t dim) : dim_(dim) {}
  Tensor features(const FrameSet& frames) const override;
  std::size_t output_size() const override { return dim_; }
  FrameKind accepts() const override { return FrameKind::kFeature; }

 private:
  std::size_t dim_;
};

/// Three stride-2 3x3 conv blocks (8, 16, 32 channels), global average pool
/// and a linear map, trained with the rest of the model.
class ConvFeaturizer final : public FrameFeaturizer {
 public:
  ConvFeaturizer(ParameterStore& store, const std::string& name, std::size_t height,
                 std::size_t width, std::size_t channels, std::size_t out_dim);
  Tensor features(const FrameSet& frames) const override;
  std::size_t output_size() const override { return head_.out_features(); }
  FrameKind accepts() const override { return FrameKind::kRaw; }

  static constexpr std::size_t kChannels[3] = {8, 16, 32};

 private:
  struct Block {
    Tensor weight;
    Tensor bias;
  };
  std::vector<Block> blocks_;
  nn::Linear head_;
  Shape frame_shape_;
};

struct VideoEncoding {
  Tensor frame_features;              // N x d, M for the real candidates
  std::vector<Tensor> frame_states;   // per segment, T_f x d
  Tensor summaries;                   // T_s x d, final state of each segment
  std::vector<Segment> segments;
  std::vector<std::size_t> segment_of_frame;  // candidate -> segment
};

/// Frame encoder relu(F_v(.)) followed by a per-segment bidirectional LSTM.
class VideoEncoder {
 public:
  VideoEncoder() = default;
  VideoEncoder(ParameterStore& store, const std::string& name,
               std::shared_ptr<const FrameFeaturizer> featurizer, std::size_t hidden,
               std::size_t frames_per_segment);

  VideoEncoding encode(const FrameSet& frames) const;
  /// Frame encoder applied to featurizer output.
  Tensor frame_features(const Tensor& features) const;
  /// Segment encoder over precomputed M rows.
  VideoEncoding encode_segments(const Tensor& frame_features) const;

  const FrameFeaturizer& featurizer() const { return *featurizer_; }
  std::size_t frames_per_segment() const { return frames_per_segment_; }

 private:
  std::shared_ptr<const FrameFeaturizer> featurizer_;
  nn::Linear frame_projection_;
  nn::BiLstm segment_rnn_;
  std::size_t frames_per_segment_ = 5;
};

}  // namespace dims
