#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "dims/tensor.hpp"

namespace dims {

/// A record violates the dataset schema or a sample invariant.
class DataError : public std::runtime_error {
 public:
  DataError(const std::string& message, std::string id = {}, std::size_t line = 0)
      : std::runtime_error(message), id_(std::move(id)), line_(line) {}
  const std::string& id() const { return id_; }
  std::size_t line() const { return line_; }

 private:
  std::string id_;
  std::size_t line_;
};

enum class FrameKind { kRaw, kFeature };

const char* to_string(FrameKind kind);

/// Ordered candidate frames of one video. Raw frames are H x W x C arrays;
/// feature frames are flat vectors.
struct FrameSet {
  FrameKind kind = FrameKind::kFeature;
  Shape frame_shape;
  std::vector<std::vector<Real>> frames;

  std::size_t count() const { return frames.size(); }
  std::size_t frame_size() const { return shape_size(frame_shape); }
  bool operator==(const FrameSet&) const = default;
};

struct CoverTruth {
  /// Set when the dataset gives the positive candidate directly.
  std::optional<std::size_t> index;
  /// Otherwise the ground-truth cover in the same space as the frames.
  std::vector<Real> payload;
  bool operator==(const CoverTruth&) const = default;
};

struct Sample {
  std::string id;
  std::vector<std::string> article;
  std::vector<std::string> summary;
  FrameSet frames;
  CoverTruth cover;
  /// Free-form JSON object carried through unchanged (e.g. synthetic ground truth).
  std::string meta = "{}";

  /// Resolved at load: candidate with the highest cosine similarity to the cover.
  std::size_t positive = 0;
  Real positive_similarity = 1;

  bool operator==(const Sample&) const = default;
};

struct LoadOptions {
  std::size_t max_article = 100;
  std::size_t max_summary = 30;
  /// Throw on the first bad record instead of skipping it.
  bool strict = false;
};

struct LoadReport {
  std::vector<std::string> errors;
  std::vector<std::string> warnings;
};

/// Parses one manifest line. Relative sidecar paths resolve against base_dir.
Sample parse_sample(std::string_view line, const std::filesystem::path& base_dir,
                    const LoadOptions& options = {}, std::vector<std::string>* warnings = nullptr);

/// Reads a JSONL manifest. Bad records are reported (with line number and id)
/// and skipped unless options.strict; an unreadable sidecar is always fatal.
std::vector<Sample> load_dataset(const std::filesystem::path& path, const LoadOptions& options = {},
                                 LoadReport* report = nullptr);

struct SaveOptions {
  /// When set, raw frame arrays go to this little-endian float32 sidecar
  /// (relative to the manifest directory) instead of inline base64.
  std::optional<std::string> sidecar;
};

std::string format_sample(const Sample& sample, std::vector<char>* sidecar = nullptr,
                          const std::string& sidecar_name = {});
void save_dataset(const std::filesystem::path& path, std::span<const Sample> samples,
                  const SaveOptions& options = {});

/// Token <-> id bijection with the special tokens at fixed ids 0-3.
class Vocabulary {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr std::size_t kStart = 2;
  static constexpr std::size_t kEos = 3;
  static constexpr std::size_t kSpecialCount = 4;
  static constexpr std::size_t kMaxSize = 50000;

  Vocabulary();
  /// Counts article and summary tokens; keeps the most frequent
  /// (max_size - 4), ties by lexicographic order.
  static Vocabulary build(std::span<const Sample> samples, std::size_t max_size = kMaxSize);
  /// Full token list, specials included, as written to a checkpoint.
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  bool contains(std::string_view token) const;
  /// kUnk for unknown tokens.
  std::size_t id(std::string_view token) const;
  const std::string& token(std::size_t id) const;
  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  Vocabulary(std::vector<std::string> tokens, int);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> ids_;
};

/// Model-ready ids for one sample. Article words missing from the vocabulary
/// get extended ids (vocab.size() + k) so the pointer can copy them.
struct EncodedSample {
  std::vector<std::size_t> article_ids;
  std::vector<std::size_t> article_ext_ids;
  std::vector<std::string> oov_tokens;
  /// Summary ids in the extended space followed by EOS.
  std::vector<std::size_t> target_ids;
  std::size_t extended_size = 0;
};

EncodedSample encode_sample(const Sample& sample, const Vocabulary& vocab);

/// Maps decoded extended ids back to strings (EOS and padding dropped).
std::vector<std::string> decode_tokens(std::span<const std::size_t> ids, const Vocabulary& vocab,
                                       std::span<const std::string> oov_tokens);

std::string base64_encode(std::span<const unsigned char> bytes);
std::vector<unsigned char> base64_decode(std::string_view text);

}  // namespace dims
