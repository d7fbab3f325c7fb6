#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dims/tensor.hpp"

namespace dims {

class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::invalid_argument(message), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// Every hyperparameter of a run. Defaults are the published settings;
/// fields marked "unstated" are our own choices.
struct RunConfig {
  // Model dimensions.
  std::int64_t embed_dim = 128;
  std::int64_t hidden_dim = 128;
  std::int64_t attention_dim = 128;  // unstated
  std::int64_t ffn_dim = 128;        // unstated
  std::int64_t attn_layers = 2;
  std::int64_t segment_len = 5;
  std::int64_t vocab_size = 50000;

  // Sequence limits.
  std::int64_t encode_steps = 100;
  std::int64_t min_decode = 10;
  std::int64_t max_decode = 30;
  std::int64_t beam_size = 4;

  // Frames.
  std::string frame_featurizer = "passthrough";  // conv | passthrough
  std::int64_t frame_feature_dim = 128;
  std::int64_t frame_height = 128;
  std::int64_t frame_width = 64;
  std::int64_t frame_channels = 3;
  std::int64_t frame_stride = 120;
  std::int64_t candidates = 10;

  // Behaviour variants for under-specified parts of the model.
  bool disable_conditional_self_attention = false;
  bool disable_global_attention = false;
  std::string global_attention_normalize = "softmax";  // softmax | raw
  std::string scale_position = "values";               // values | logits
  std::string editing_gate = "scalar";                 // scalar | vector

  // Optimisation.
  std::int64_t batch_size = 16;
  double learning_rate = 0.15;
  double adagrad_eps = 1e-10;
  double adagrad_init = 0.1;
  std::string clip_mode = "value";  // value | norm
  double clip_lo = -2.0;
  double clip_hi = 2.0;
  double margin = 0.1;
  std::int64_t negatives = 0;  // 0 = every non-positive candidate
  double init_std = 0.05;
  double layer_norm_eps = 1e-5;
  double prob_floor = 1e-12;
  std::int64_t seed = 1;

  // Schedule.
  std::int64_t epochs = 10;
  std::int64_t val_every = 0;  // steps; 0 = once per epoch
  std::int64_t keep_best = 5;
  std::int64_t val_beam = 4;

  /// Throws ConfigError naming the first offending key.
  void validate() const;

  std::string to_json() const;
  /// Flat JSON object. Unknown keys and wrong types throw ConfigError.
  static RunConfig from_json(std::string_view text);
  static RunConfig from_file(const std::string& path);

  /// Sets one key from its textual form (as given on a command line).
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static const std::vector<std::string>& keys();

  /// Applies an ablation by name: disable_conditional_self_attention or
  /// disable_global_attention (aliases: dims-s, dims-g).
  void apply_ablation(const std::string& name);
};

}  // namespace dims
