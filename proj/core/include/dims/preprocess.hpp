#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "dims/data.hpp"

namespace dims {

/// H x W x C pixel array, row-major.
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<Real> pixels;

  Real at(std::size_t y, std::size_t x, std::size_t c) const {
    return pixels[(y * width + x) * channels + c];
  }
};

Image resize_nearest(const Image& image, std::size_t height, std::size_t width);

struct CandidateOptions {
  std::size_t stride = 120;
  std::size_t target = 10;
  std::size_t height = 128;
  std::size_t width = 64;
};

/// Frames at 0, stride, 2*stride, ... (at most `target`), each resized.
std::vector<Image> sample_candidates(std::span<const Image> video,
                                     const CandidateOptions& options = {});
/// Source indices chosen by sample_candidates.
std::vector<std::size_t> candidate_indices(std::size_t frame_count, std::size_t stride,
                                           std::size_t target);

FrameSet to_frame_set(std::span<const Image> frames);

struct PositiveLabel {
  std::size_t index = 0;
  double similarity = 0;
  std::vector<std::string> warnings;
};

/// Candidate with maximum cosine similarity to the truth; ties -> lowest index.
PositiveLabel label_positive(const FrameSet& candidates, std::span<const Real> truth);

}  // namespace dims
