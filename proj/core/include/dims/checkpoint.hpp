#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>

#include "dims/config.hpp"
#include "dims/data.hpp"
#include "dims/model.hpp"
#include "dims/optimizer.hpp"

namespace dims {

/// Unreadable checkpoint or one that does not match the model being built.
class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A checkpoint is a directory with manifest.json (config, vocabulary, tensor
/// index, step, metrics) and params.bin (little-endian values in index order).
struct CheckpointMeta {
  std::size_t step = 0;
  std::map<std::string, double> metrics;
};

void save_checkpoint(const std::filesystem::path& dir, const DimsModel& model,
                     const Vocabulary& vocab, const Adagrad* optimizer, const CheckpointMeta& meta);

struct LoadedCheckpoint {
  RunConfig config;
  Vocabulary vocab;
  std::unique_ptr<DimsModel> model;
  std::unique_ptr<Adagrad> optimizer;  // null when no accumulators were saved
  CheckpointMeta meta;
};

/// Rebuilds the model from the stored config.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir);
/// Builds the model from `config` instead and requires every tensor to match it.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir, const RunConfig& config);

/// Config stored in a checkpoint, without loading tensors.
RunConfig read_checkpoint_config(const std::filesystem::path& dir);
CheckpointMeta read_checkpoint_meta(const std::filesystem::path& dir);

}  // namespace dims
