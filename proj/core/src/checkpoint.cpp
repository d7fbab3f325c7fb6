#include "dims/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

namespace dims {

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr const char* kFormat = "dims-checkpoint";
constexpr int kVersion = 1;
constexpr const char* kOptimizerPrefix = "adagrad/";

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little endian");

const char* dtype_name() { return sizeof(Real) == 8 ? "f64" : "f32"; }

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read " + path.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

json read_manifest(const fs::path& dir) {
  json manifest;
  try {
    manifest = json::parse(read_file(dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw CheckpointError("malformed manifest in " + dir.string() + ": " + e.what());
  }
  if (manifest.value("format", "") != kFormat || manifest.value("version", 0) != kVersion) {
    throw CheckpointError(dir.string() + " is not a version " + std::to_string(kVersion) +
                          " checkpoint");
  }
  if (manifest.value("dtype", "") != dtype_name()) {
    throw CheckpointError("checkpoint dtype " + manifest.value("dtype", std::string("?")) +
                          " does not match this build (" + dtype_name() + ")");
  }
  return manifest;
}

struct Entry {
  std::string name;
  Shape shape;
  std::span<const Real> values;
};

}  // namespace

void save_checkpoint(const fs::path& dir, const DimsModel& model, const Vocabulary& vocab,
                     const Adagrad* optimizer, const CheckpointMeta& meta) {
  std::vector<Entry> entries;
  for (const auto& [name, param] : model.parameters()) {
    entries.push_back({name, param.shape(), param.values()});
  }
  if (optimizer != nullptr) {
    for (const auto& [name, acc] : optimizer->accumulators()) {
      entries.push_back({kOptimizerPrefix + name, model.parameters().at(name).shape(), acc});
    }
  }

  json tensors = json::array();
  std::size_t offset = 0;
  for (const auto& e : entries) {
    tensors.push_back({{"name", e.name}, {"shape", e.shape}, {"offset", offset}});
    offset += e.values.size() * sizeof(Real);
  }
  json metrics = json::object();
  for (const auto& [k, v] : meta.metrics) metrics[k] = v;

  json manifest = {
      {"format", kFormat},
      {"version", kVersion},
      {"dtype", dtype_name()},
      {"step", meta.step},
      {"metrics", metrics},
      {"config", json::parse(model.config().to_json())},
      {"vocab", vocab.tokens()},
      {"tensors", tensors},
      {"payload_bytes", offset},
  };

  fs::create_directories(dir);
  {
    std::ofstream out(dir / "params.bin", std::ios::binary | std::ios::trunc);
    for (const auto& e : entries) {
      out.write(reinterpret_cast<const char*>(e.values.data()),
                static_cast<std::streamsize>(e.values.size() * sizeof(Real)));
    }
    if (!out) throw CheckpointError("failed writing " + (dir / "params.bin").string());
  }
  std::ofstream out(dir / "manifest.json", std::ios::trunc);
  out << manifest.dump(2) << '\n';
  if (!out) throw CheckpointError("failed writing " + (dir / "manifest.json").string());
}

RunConfig read_checkpoint_config(const fs::path& dir) {
  auto manifest = read_manifest(dir);
  return RunConfig::from_json(manifest.at("config").dump());
}

CheckpointMeta read_checkpoint_meta(const fs::path& dir) {
  auto manifest = read_manifest(dir);
  CheckpointMeta meta;
  meta.step = manifest.value("step", std::size_t{0});
  for (const auto& [k, v] : manifest.at("metrics").items()) meta.metrics[k] = v.get<double>();
  return meta;
}

LoadedCheckpoint load_checkpoint(const fs::path& dir) {
  return load_checkpoint(dir, read_checkpoint_config(dir));
}

LoadedCheckpoint load_checkpoint(const fs::path& dir, const RunConfig& config) {
  auto manifest = read_manifest(dir);
  LoadedCheckpoint out;
  out.config = config;
  try {
    out.vocab = Vocabulary::from_tokens(manifest.at("vocab").get<std::vector<std::string>>());
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("bad vocabulary in checkpoint: ") + e.what());
  }
  out.meta = read_checkpoint_meta(dir);
  out.model = std::make_unique<DimsModel>(config, out.vocab.size());

  const auto payload = read_file(dir / "params.bin");
  if (payload.size() != manifest.value("payload_bytes", std::size_t{0})) {
    throw CheckpointError("params.bin size does not match the manifest");
  }
  auto& store = out.model->parameters();
  std::set<std::string> seen;
  for (const auto& t : manifest.at("tensors")) {
    const auto name = t.at("name").get<std::string>();
    const auto shape = t.at("shape").get<Shape>();
    const auto offset = t.at("offset").get<std::size_t>();
    const auto count = shape_size(shape);
    if (offset + count * sizeof(Real) > payload.size()) {
      throw CheckpointError("tensor " + name + " lies outside params.bin");
    }
    std::vector<Real> values(count);
    std::memcpy(values.data(), payload.data() + offset, count * sizeof(Real));

    if (name.starts_with(kOptimizerPrefix)) {
      const auto param = name.substr(std::strlen(kOptimizerPrefix));
      if (!store.contains(param) || store.at(param).shape() != shape) {
        throw CheckpointError("optimizer state " + name + " does not match the model");
      }
      if (!out.optimizer) {
        out.optimizer = std::make_unique<Adagrad>(static_cast<Real>(config.learning_rate),
                                                  static_cast<Real>(config.adagrad_eps),
                                                  static_cast<Real>(config.adagrad_init));
      }
      out.optimizer->set_accumulator(param, std::move(values));
      continue;
    }
    if (!store.contains(name)) {
      throw CheckpointError("checkpoint tensor " + name + " has no counterpart in the model");
    }
    auto& param = store.at(name);
    if (param.shape() != shape) {
      throw CheckpointError("tensor " + name + " has shape " + shape_str(shape) +
                            " in the checkpoint but " + shape_str(param.shape()) + " in the model");
    }
    std::copy(values.begin(), values.end(), param.mutable_values().begin());
    seen.insert(name);
  }
  for (const auto& [name, param] : store) {
    if (!seen.contains(name)) throw CheckpointError("checkpoint is missing tensor " + name);
  }
  return out;
}

}  // namespace dims
