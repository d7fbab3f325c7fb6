#include "dims/data.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "dims/preprocess.hpp"
#include "json.hpp"

namespace dims {

namespace {

using json = nlohmann::ordered_json;

constexpr std::string_view kAlphabet =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

static_assert(std::endian::native == std::endian::little,
              "float payload I/O assumes a little-endian host");

std::vector<float> bytes_to_floats(std::span<const unsigned char> bytes) {
  if (bytes.size() % sizeof(float) != 0) throw DataError("float payload has a partial element");
  std::vector<float> out(bytes.size() / sizeof(float));
  std::memcpy(out.data(), bytes.data(), bytes.size());
  return out;
}

void append_floats(std::vector<char>& dst, std::span<const Real> values) {
  for (auto v : values) {
    const auto f = static_cast<float>(v);
    char buf[sizeof(float)];
    std::memcpy(buf, &f, sizeof(float));
    dst.insert(dst.end(), buf, buf + sizeof(float));
  }
}

Shape parse_shape(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw DataError(what + ": shape must be a non-empty array");
  Shape shape;
  for (const auto& d : j) {
    if (!d.is_number_unsigned() || d.get<std::size_t>() == 0) {
      throw DataError(what + ": shape entries must be positive integers");
    }
    shape.push_back(d.get<std::size_t>());
  }
  return shape;
}

std::vector<std::string> parse_tokens(const json& j, const char* field) {
  if (!j.is_array()) throw DataError(std::string(field) + " must be an array of strings");
  std::vector<std::string> out;
  for (const auto& t : j) {
    if (!t.is_string()) throw DataError(std::string(field) + " must contain only strings");
    out.push_back(t.get<std::string>());
  }
  return out;
}

struct FloatBlock {
  Shape shape;
  std::vector<Real> values;
};

// {file, offset, shape} into a little-endian float32 sidecar.
FloatBlock read_ref(const json& ref, const std::filesystem::path& base_dir) {
  if (!ref.is_object() || !ref.contains("file") || !ref["file"].is_string()) {
    throw DataError("ref must be an object with a file name");
  }
  FloatBlock block;
  block.shape = parse_shape(ref.value("shape", json()), "ref");
  std::size_t offset = 0;
  if (ref.contains("offset")) {
    if (!ref["offset"].is_number_unsigned()) throw DataError("ref offset must be a non-negative integer");
    offset = ref["offset"].get<std::size_t>();
  }
  auto path = base_dir / ref["file"].get<std::string>();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open sidecar " + path.string());
  const auto count = shape_size(block.shape);
  std::vector<unsigned char> bytes(count * sizeof(float));
  in.seekg(static_cast<std::streamoff>(offset));
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(in.gcount()) != bytes.size()) {
    throw std::runtime_error("sidecar " + path.string() + " too short for ref at offset " +
                             std::to_string(offset));
  }
  auto floats = bytes_to_floats(bytes);
  block.values.assign(floats.begin(), floats.end());
  return block;
}

FloatBlock read_b64_block(const json& payload) {
  if (!payload.is_object() || !payload.contains("data") || !payload["data"].is_string()) {
    throw DataError("raw payload must be an object with shape and base64 data");
  }
  FloatBlock block;
  block.shape = parse_shape(payload.value("shape", json()), "raw payload");
  auto floats = bytes_to_floats(base64_decode(payload["data"].get<std::string>()));
  if (floats.size() != shape_size(block.shape)) {
    throw DataError("raw payload holds " + std::to_string(floats.size()) + " values, shape needs " +
                    std::to_string(shape_size(block.shape)));
  }
  block.values.assign(floats.begin(), floats.end());
  return block;
}

std::vector<Real> parse_vector(const json& j, const std::string& what) {
  if (!j.is_array() || j.empty()) throw DataError(what + " must be a non-empty array of numbers");
  std::vector<Real> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number()) throw DataError(what + " must contain only numbers");
    out.push_back(v.get<Real>());
  }
  return out;
}

FrameKind parse_kind(const json& obj, const char* field) {
  if (!obj.is_object() || !obj.contains("kind") || !obj["kind"].is_string()) {
    throw DataError(std::string(field) + " must be an object with a kind");
  }
  const auto kind = obj["kind"].get<std::string>();
  if (kind == "raw") return FrameKind::kRaw;
  if (kind == "feat") return FrameKind::kFeature;
  throw DataError(std::string(field) + ".kind must be raw or feat, got " + kind);
}

FrameSet parse_frames(const json& j, const std::filesystem::path& base_dir) {
  FrameSet set;
  set.kind = parse_kind(j, "frames");
  const bool has_payload = j.contains("payload");
  const bool has_ref = j.contains("ref");
  if (has_payload == has_ref) throw DataError("frames needs exactly one of payload or ref");
  if (set.kind == FrameKind::kFeature && has_payload) {
    const auto& payload = j["payload"];
    if (!payload.is_array() || payload.empty()) throw DataError("frames has no candidates");
    for (const auto& f : payload) set.frames.push_back(parse_vector(f, "feature frame"));
    set.frame_shape = {set.frames.front().size()};
  } else {
    auto block = has_ref ? read_ref(j["ref"], base_dir) : read_b64_block(j["payload"]);
    const std::size_t expected_rank = set.kind == FrameKind::kRaw ? 4 : 2;
    if (block.shape.size() != expected_rank) {
      throw DataError(std::string("frames block must have rank ") + std::to_string(expected_rank));
    }
    set.frame_shape.assign(block.shape.begin() + 1, block.shape.end());
    const auto per = shape_size(set.frame_shape);
    for (std::size_t i = 0; i < block.shape[0]; ++i) {
      set.frames.emplace_back(block.values.begin() + static_cast<std::ptrdiff_t>(i * per),
                              block.values.begin() + static_cast<std::ptrdiff_t>((i + 1) * per));
    }
  }
  if (set.frames.empty()) throw DataError("frames has no candidates");
  for (const auto& f : set.frames) {
    if (f.size() != set.frame_size()) throw DataError("frames differ in size");
  }
  return set;
}

CoverTruth parse_cover(const json& j, const FrameSet& frames, const std::filesystem::path& base_dir) {
  if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string()) {
    throw DataError("cover must be an object with a kind");
  }
  CoverTruth cover;
  if (j["kind"] == "index") {
    if (!j.contains("index") || !j["index"].is_number_unsigned()) {
      throw DataError("cover.index must be a non-negative integer");
    }
    cover.index = j["index"].get<std::size_t>();
    if (*cover.index >= frames.count()) throw DataError("cover.index out of range");
    return cover;
  }
  const auto kind = parse_kind(j, "cover");
  if (kind != frames.kind) throw DataError("cover kind differs from frame kind");
  if (j.contains("ref")) {
    cover.payload = read_ref(j["ref"], base_dir).values;
  } else if (!j.contains("payload")) {
    throw DataError("cover needs a payload, ref or index");
  } else if (kind == FrameKind::kFeature) {
    cover.payload = parse_vector(j["payload"], "cover payload");
  } else {
    cover.payload = read_b64_block(j["payload"]).values;
  }
  if (cover.payload.size() != frames.frame_size()) throw DataError("cover size differs from frame size");
  return cover;
}

json floats_payload(std::span<const Real> values, const Shape& shape) {
  std::vector<char> bytes;
  append_floats(bytes, values);
  return json{{"shape", shape},
              {"data", base64_encode({reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size()})}};
}

}  // namespace

const char* to_string(FrameKind kind) { return kind == FrameKind::kRaw ? "raw" : "feat"; }

Sample parse_sample(std::string_view line, const std::filesystem::path& base_dir,
                    const LoadOptions& options, std::vector<std::string>* warnings) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw DataError(std::string("invalid JSON: ") + e.what());
  }
  if (!j.is_object()) throw DataError("record must be a JSON object");
  Sample s;
  if (!j.contains("id") || !j["id"].is_string()) throw DataError("record has no string id");
  s.id = j["id"].get<std::string>();
  try {
    for (const char* field : {"article", "summary", "frames", "cover"}) {
      if (!j.contains(field)) throw DataError(std::string("missing field ") + field);
    }
    s.article = parse_tokens(j["article"], "article");
    s.summary = parse_tokens(j["summary"], "summary");
    if (s.article.empty()) throw DataError("article is empty");
    if (s.summary.empty()) throw DataError("summary is empty");
    if (s.article.size() > options.max_article) s.article.resize(options.max_article);
    if (s.summary.size() > options.max_summary) s.summary.resize(options.max_summary);
    s.frames = parse_frames(j["frames"], base_dir);
    s.cover = parse_cover(j["cover"], s.frames, base_dir);
    if (j.contains("meta")) {
      if (!j["meta"].is_object()) throw DataError("meta must be an object");
      s.meta = j["meta"].dump();
    }
  } catch (const DataError& e) {
    throw DataError(e.what(), s.id);
  } catch (const json::exception& e) {
    throw DataError(e.what(), s.id);
  }
  if (s.cover.index) {
    s.positive = *s.cover.index;
    s.positive_similarity = 1;
  } else {
    auto label = label_positive(s.frames, s.cover.payload);
    s.positive = label.index;
    s.positive_similarity = static_cast<Real>(label.similarity);
    if (warnings) {
      for (auto& w : label.warnings) warnings->push_back(s.id + ": " + w);
    }
  }
  return s;
}

std::vector<Sample> load_dataset(const std::filesystem::path& path, const LoadOptions& options,
                                 LoadReport* report) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset " + path.string());
  LoadReport local;
  auto& rep = report ? *report : local;
  std::vector<Sample> samples;
  std::string line;
  std::size_t line_no = 0;
  std::optional<FrameKind> kind;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto s = parse_sample(line, path.parent_path(), options, &rep.warnings);
      if (kind && *kind != s.frames.kind) {
        throw DataError("mixed raw and feature frames within one dataset", s.id);
      }
      if (!samples.empty() && samples.front().frames.frame_shape != s.frames.frame_shape) {
        throw DataError("frame size differs from earlier records", s.id);
      }
      kind = s.frames.kind;
      samples.push_back(std::move(s));
    } catch (const DataError& e) {
      std::ostringstream msg;
      msg << path.string() << ":" << line_no << (e.id().empty() ? "" : " [" + e.id() + "]") << ": "
          << e.what();
      if (options.strict) throw DataError(msg.str(), e.id(), line_no);
      rep.errors.push_back(msg.str());
    }
  }
  if (samples.empty() && rep.errors.empty()) rep.warnings.push_back(path.string() + ": dataset is empty");
  return samples;
}

std::string format_sample(const Sample& sample, std::vector<char>* sidecar,
                          const std::string& sidecar_name) {
  json j;
  j["id"] = sample.id;
  j["article"] = sample.article;
  j["summary"] = sample.summary;
  const auto& fs = sample.frames;
  json frames{{"kind", to_string(fs.kind)}};
  if (fs.kind == FrameKind::kFeature) {
    frames["payload"] = fs.frames;
  } else {
    Shape block_shape{fs.count()};
    block_shape.insert(block_shape.end(), fs.frame_shape.begin(), fs.frame_shape.end());
    std::vector<Real> flat;
    for (const auto& f : fs.frames) flat.insert(flat.end(), f.begin(), f.end());
    if (sidecar) {
      frames["ref"] = {{"file", sidecar_name}, {"offset", sidecar->size()}, {"shape", block_shape}};
      append_floats(*sidecar, flat);
    } else {
      frames["payload"] = floats_payload(flat, block_shape);
    }
  }
  j["frames"] = frames;
  if (sample.cover.index) {
    j["cover"] = {{"kind", "index"}, {"index", *sample.cover.index}};
  } else if (fs.kind == FrameKind::kFeature) {
    j["cover"] = {{"kind", "feat"}, {"payload", sample.cover.payload}};
  } else {
    j["cover"] = {{"kind", "raw"}, {"payload", floats_payload(sample.cover.payload, fs.frame_shape)}};
  }
  auto meta = json::parse(sample.meta.empty() ? "{}" : sample.meta);
  if (!meta.empty()) j["meta"] = meta;
  return j.dump();
}

void save_dataset(const std::filesystem::path& path, std::span<const Sample> samples,
                  const SaveOptions& options) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset " + path.string());
  std::vector<char> sidecar;
  for (const auto& s : samples) {
    out << format_sample(s, options.sidecar ? &sidecar : nullptr, options.sidecar.value_or("")) << '\n';
  }
  if (options.sidecar) {
    std::ofstream bin(path.parent_path() / *options.sidecar, std::ios::binary);
    if (!bin) throw DataError("cannot write sidecar " + *options.sidecar);
    bin.write(sidecar.data(), static_cast<std::streamsize>(sidecar.size()));
  }
}

Vocabulary::Vocabulary() : Vocabulary(from_tokens({"<pad>", "<unk>", "<s>", "</s>"})) {}

Vocabulary Vocabulary::build(std::span<const Sample> samples, std::size_t max_size) {
  if (max_size < kSpecialCount) throw ContractError("vocabulary size must allow the special tokens");
  Vocabulary specials;
  std::map<std::string, std::size_t> counts;
  for (const auto& s : samples) {
    for (const auto* seq : {&s.article, &s.summary}) {
      for (const auto& t : *seq) {
        if (!specials.contains(t)) ++counts[t];
      }
    }
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  auto tokens = specials.tokens_;
  for (const auto& [token, count] : ranked) {
    if (tokens.size() >= max_size) break;
    tokens.push_back(token);
  }
  return from_tokens(std::move(tokens));
}

Vocabulary::Vocabulary(std::vector<std::string> tokens, int) : tokens_(std::move(tokens)) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!ids_.emplace(tokens_[i], i).second) throw ContractError("duplicate vocabulary token: " + tokens_[i]);
  }
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < kSpecialCount) throw ContractError("vocabulary is missing special tokens");
  return Vocabulary(std::move(tokens), 0);
}

bool Vocabulary::contains(std::string_view token) const {
  return ids_.contains(std::string(token));
}

std::size_t Vocabulary::id(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(std::size_t id) const {
  if (id >= tokens_.size()) throw ContractError("token id out of range: " + std::to_string(id));
  return tokens_[id];
}

EncodedSample encode_sample(const Sample& sample, const Vocabulary& vocab) {
  EncodedSample enc;
  std::unordered_map<std::string, std::size_t> oov_ids;
  for (const auto& t : sample.article) {
    const auto id = vocab.id(t);
    enc.article_ids.push_back(id);
    if (id != Vocabulary::kUnk || t == vocab.token(Vocabulary::kUnk)) {
      enc.article_ext_ids.push_back(id);
      continue;
    }
    auto [it, inserted] = oov_ids.emplace(t, vocab.size() + enc.oov_tokens.size());
    if (inserted) enc.oov_tokens.push_back(t);
    enc.article_ext_ids.push_back(it->second);
  }
  for (const auto& t : sample.summary) {
    auto id = vocab.id(t);
    if (id == Vocabulary::kUnk) {
      auto it = oov_ids.find(t);
      if (it != oov_ids.end()) id = it->second;
    }
    enc.target_ids.push_back(id);
  }
  enc.target_ids.push_back(Vocabulary::kEos);
  enc.extended_size = vocab.size() + enc.oov_tokens.size();
  return enc;
}

std::vector<std::string> decode_tokens(std::span<const std::size_t> ids, const Vocabulary& vocab,
                                       std::span<const std::string> oov_tokens) {
  std::vector<std::string> out;
  for (auto id : ids) {
    if (id == Vocabulary::kEos) break;
    if (id == Vocabulary::kPad || id == Vocabulary::kStart) continue;
    if (id < vocab.size()) {
      out.push_back(vocab.token(id));
    } else if (id - vocab.size() < oov_tokens.size()) {
      out.push_back(oov_tokens[id - vocab.size()]);
    } else {
      throw ContractError("extended id " + std::to_string(id) + " has no source token");
    }
  }
  return out;
}

std::string base64_encode(std::span<const unsigned char> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t v = (std::uint32_t{bytes[i]} << 16) | (std::uint32_t{bytes[i + 1]} << 8) | bytes[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  const auto rest = bytes.size() - i;
  if (rest == 1) {
    const std::uint32_t v = std::uint32_t{bytes[i]} << 16;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += "==";
  } else if (rest == 2) {
    const std::uint32_t v = (std::uint32_t{bytes[i]} << 16) | (std::uint32_t{bytes[i + 1]} << 8);
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

std::vector<unsigned char> base64_decode(std::string_view text) {
  std::array<int, 256> lookup;
  lookup.fill(-1);
  for (std::size_t i = 0; i < kAlphabet.size(); ++i) lookup[static_cast<unsigned char>(kAlphabet[i])] = static_cast<int>(i);
  if (text.size() % 4 != 0) throw DataError("base64 length is not a multiple of 4");
  std::vector<unsigned char> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    std::uint32_t v = 0;
    int pad = 0;
    for (std::size_t k = 0; k < 4; ++k) {
      const char c = text[i + k];
      if (c == '=' && i + 4 == text.size() && k >= 2) {
        ++pad;
        v <<= 6;
        continue;
      }
      const int d = lookup[static_cast<unsigned char>(c)];
      if (d < 0 || pad > 0) throw DataError("invalid base64 data");
      v = (v << 6) | static_cast<std::uint32_t>(d);
    }
    out.push_back(static_cast<unsigned char>((v >> 16) & 0xFF));
    if (pad < 2) out.push_back(static_cast<unsigned char>((v >> 8) & 0xFF));
    if (pad < 1) out.push_back(static_cast<unsigned char>(v & 0xFF));
  }
  return out;
}

}  // namespace dims
