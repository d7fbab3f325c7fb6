#include "dims/config.hpp"

#include <fstream>
#include <functional>
#include <sstream>
#include <variant>

#include "json.hpp"

namespace dims {

namespace {

using json = nlohmann::ordered_json;

using Member = std::variant<std::int64_t RunConfig::*, double RunConfig::*, bool RunConfig::*,
                            std::string RunConfig::*>;

struct Field {
  const char* key;
  Member member;
};

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"embed_dim", &RunConfig::embed_dim},
      {"hidden_dim", &RunConfig::hidden_dim},
      {"attention_dim", &RunConfig::attention_dim},
      {"ffn_dim", &RunConfig::ffn_dim},
      {"attn_layers", &RunConfig::attn_layers},
      {"segment_len", &RunConfig::segment_len},
      {"vocab_size", &RunConfig::vocab_size},
      {"encode_steps", &RunConfig::encode_steps},
      {"min_decode", &RunConfig::min_decode},
      {"max_decode", &RunConfig::max_decode},
      {"beam_size", &RunConfig::beam_size},
      {"frame_featurizer", &RunConfig::frame_featurizer},
      {"frame_feature_dim", &RunConfig::frame_feature_dim},
      {"frame_height", &RunConfig::frame_height},
      {"frame_width", &RunConfig::frame_width},
      {"frame_channels", &RunConfig::frame_channels},
      {"frame_stride", &RunConfig::frame_stride},
      {"candidates", &RunConfig::candidates},
      {"disable_conditional_self_attention", &RunConfig::disable_conditional_self_attention},
      {"disable_global_attention", &RunConfig::disable_global_attention},
      {"global_attention_normalize", &RunConfig::global_attention_normalize},
      {"scale_position", &RunConfig::scale_position},
      {"editing_gate", &RunConfig::editing_gate},
      {"batch_size", &RunConfig::batch_size},
      {"learning_rate", &RunConfig::learning_rate},
      {"adagrad_eps", &RunConfig::adagrad_eps},
      {"adagrad_init", &RunConfig::adagrad_init},
      {"clip_mode", &RunConfig::clip_mode},
      {"clip_lo", &RunConfig::clip_lo},
      {"clip_hi", &RunConfig::clip_hi},
      {"margin", &RunConfig::margin},
      {"negatives", &RunConfig::negatives},
      {"init_std", &RunConfig::init_std},
      {"layer_norm_eps", &RunConfig::layer_norm_eps},
      {"prob_floor", &RunConfig::prob_floor},
      {"seed", &RunConfig::seed},
      {"epochs", &RunConfig::epochs},
      {"val_every", &RunConfig::val_every},
      {"keep_best", &RunConfig::keep_best},
      {"val_beam", &RunConfig::val_beam},
  };
  return table;
}

const Field& find_field(const std::string& key) {
  for (const auto& f : fields()) {
    if (key == f.key) return f;
  }
  throw ConfigError(key, "unknown config key: " + key);
}

void require(bool ok, const char* key, const std::string& message) {
  if (!ok) throw ConfigError(key, std::string(key) + ": " + message);
}

void require_one_of(const std::string& value, const char* key,
                    std::initializer_list<const char*> allowed) {
  for (const auto* a : allowed) {
    if (value == a) return;
  }
  std::string list;
  for (const auto* a : allowed) list += std::string(list.empty() ? "" : ", ") + a;
  throw ConfigError(key, std::string(key) + ": '" + value + "' is not one of {" + list + "}");
}

}  // namespace

void RunConfig::validate() const {
  require(embed_dim > 0, "embed_dim", "must be positive");
  require(hidden_dim > 0 && hidden_dim % 2 == 0, "hidden_dim", "must be positive and even");
  require(attention_dim > 0, "attention_dim", "must be positive");
  require(ffn_dim > 0, "ffn_dim", "must be positive");
  require(attn_layers >= 0, "attn_layers", "must be non-negative");
  require(segment_len > 0, "segment_len", "must be positive");
  require(vocab_size > 4, "vocab_size", "must leave room beyond the 4 special tokens");
  require(encode_steps > 0, "encode_steps", "must be positive");
  require(min_decode >= 0, "min_decode", "must be non-negative");
  require(max_decode > 0 && min_decode <= max_decode, "max_decode", "must be >= min_decode and > 0");
  require(beam_size > 0, "beam_size", "must be positive");
  require_one_of(frame_featurizer, "frame_featurizer", {"conv", "passthrough"});
  require(frame_feature_dim > 0, "frame_feature_dim", "must be positive");
  require(frame_height > 0 && frame_width > 0, "frame_height", "frame size must be positive");
  require(frame_channels > 0, "frame_channels", "must be positive");
  require(frame_stride > 0, "frame_stride", "must be positive");
  require(candidates > 0, "candidates", "must be positive");
  require_one_of(global_attention_normalize, "global_attention_normalize", {"softmax", "raw"});
  require_one_of(scale_position, "scale_position", {"values", "logits"});
  require_one_of(editing_gate, "editing_gate", {"scalar", "vector"});
  require(batch_size > 0, "batch_size", "must be positive");
  require(learning_rate > 0, "learning_rate", "must be positive");
  require(adagrad_eps >= 0, "adagrad_eps", "must be non-negative");
  require(adagrad_init >= 0, "adagrad_init", "must be non-negative");
  require_one_of(clip_mode, "clip_mode", {"value", "norm"});
  require(clip_lo < clip_hi, "clip_lo", "must be below clip_hi");
  require(margin >= 0, "margin", "must be non-negative");
  require(negatives >= 0, "negatives", "must be non-negative");
  require(init_std > 0, "init_std", "must be positive");
  require(layer_norm_eps > 0, "layer_norm_eps", "must be positive");
  require(prob_floor > 0 && prob_floor < 1, "prob_floor", "must be in (0, 1)");
  require(epochs >= 0, "epochs", "must be non-negative");
  require(val_every >= 0, "val_every", "must be non-negative");
  require(keep_best > 0, "keep_best", "must be positive");
  require(val_beam > 0, "val_beam", "must be positive");
}

std::string RunConfig::to_json() const {
  json out = json::object();
  for (const auto& f : fields()) {
    std::visit([&](auto member) { out[f.key] = this->*member; }, f.member);
  }
  return out.dump(2);
}

RunConfig RunConfig::from_json(std::string_view text) {
  json in;
  try {
    in = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("config is not valid JSON: ") + e.what());
  }
  if (!in.is_object()) throw ConfigError("", "config must be a JSON object");
  RunConfig cfg;
  for (const auto& [key, value] : in.items()) {
    const auto& field = find_field(key);
    std::visit(
        [&](auto member) {
          using T = std::remove_reference_t<decltype(cfg.*member)>;
          bool ok = false;
          if constexpr (std::is_same_v<T, bool>) ok = value.is_boolean();
          else if constexpr (std::is_same_v<T, std::int64_t>) ok = value.is_number_integer();
          else if constexpr (std::is_same_v<T, double>) ok = value.is_number();
          else ok = value.is_string();
          if (!ok) throw ConfigError(key, "config key " + key + " has the wrong type");
          cfg.*member = value.get<T>();
        },
        field.member);
  }
  return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot read config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto& field = find_field(key);
  std::visit(
      [&](auto member) {
        using T = std::remove_reference_t<decltype(this->*member)>;
        try {
          if constexpr (std::is_same_v<T, bool>) {
            if (value == "true" || value == "1") this->*member = true;
            else if (value == "false" || value == "0") this->*member = false;
            else throw std::invalid_argument(value);
          } else if constexpr (std::is_same_v<T, std::int64_t>) {
            std::size_t used = 0;
            this->*member = std::stoll(value, &used);
            if (used != value.size()) throw std::invalid_argument(value);
          } else if constexpr (std::is_same_v<T, double>) {
            std::size_t used = 0;
            this->*member = std::stod(value, &used);
            if (used != value.size()) throw std::invalid_argument(value);
          } else {
            this->*member = value;
          }
        } catch (const std::logic_error&) {
          throw ConfigError(key, "invalid value '" + value + "' for config key " + key);
        }
      },
      field.member);
}

std::string RunConfig::get(const std::string& key) const {
  const auto& field = find_field(key);
  return std::visit(
      [&](auto member) { return json(this->*member).dump(); }, field.member);
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& f : fields()) out.emplace_back(f.key);
    return out;
  }();
  return names;
}

void RunConfig::apply_ablation(const std::string& name) {
  if (name == "disable_conditional_self_attention" || name == "dims-s" || name == "DIMS-S") {
    disable_conditional_self_attention = true;
  } else if (name == "disable_global_attention" || name == "dims-g" || name == "DIMS-G") {
    disable_global_attention = true;
  } else {
    throw ConfigError("ablation", "unknown ablation: " + name);
  }
}

}  // namespace dims
