#include "dims/preprocess.hpp"

#include "dims/metrics.hpp"

namespace dims {

Image resize_nearest(const Image& image, std::size_t height, std::size_t width) {
  if (image.height == 0 || image.width == 0 || image.channels == 0) {
    throw DataError("cannot resize an empty image");
  }
  Image out{height, width, image.channels, std::vector<Real>(height * width * image.channels)};
  for (std::size_t y = 0; y < height; ++y) {
    const std::size_t sy = y * image.height / height;
    for (std::size_t x = 0; x < width; ++x) {
      const std::size_t sx = x * image.width / width;
      for (std::size_t c = 0; c < image.channels; ++c) {
        out.pixels[(y * width + x) * image.channels + c] = image.at(sy, sx, c);
      }
    }
  }
  return out;
}

std::vector<std::size_t> candidate_indices(std::size_t frame_count, std::size_t stride,
                                           std::size_t target) {
  if (stride == 0) throw ContractError("candidate stride must be positive");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < frame_count && out.size() < target; i += stride) out.push_back(i);
  return out;
}

std::vector<Image> sample_candidates(std::span<const Image> video, const CandidateOptions& options) {
  if (video.empty()) throw DataError("video has no frames");
  std::vector<Image> out;
  for (auto i : candidate_indices(video.size(), options.stride, options.target)) {
    out.push_back(resize_nearest(video[i], options.height, options.width));
  }
  return out;
}

FrameSet to_frame_set(std::span<const Image> frames) {
  FrameSet set;
  set.kind = FrameKind::kRaw;
  if (frames.empty()) return set;
  set.frame_shape = {frames[0].height, frames[0].width, frames[0].channels};
  for (const auto& f : frames) {
    if (f.height != frames[0].height || f.width != frames[0].width ||
        f.channels != frames[0].channels) {
      throw DataError("frames in one video must share a size");
    }
    set.frames.push_back(f.pixels);
  }
  return set;
}

PositiveLabel label_positive(const FrameSet& candidates, std::span<const Real> truth) {
  if (candidates.count() == 0) throw DataError("no candidates to label");
  PositiveLabel label;
  label.similarity = -2.0;
  for (std::size_t i = 0; i < candidates.count(); ++i) {
    if (candidates.frames[i].size() != truth.size()) {
      throw DataError("cover and candidate " + std::to_string(i) + " differ in size");
    }
    bool zero = false;
    const double sim = metrics::cosine_similarity(candidates.frames[i], truth, &zero);
    if (zero) label.warnings.push_back("zero vector while labeling candidate " + std::to_string(i));
    if (sim > label.similarity) {
      label.similarity = sim;
      label.index = i;
    }
  }
  return label;
}

}  // namespace dims
