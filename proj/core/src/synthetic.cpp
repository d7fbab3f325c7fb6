#include "dims/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "dims/config.hpp"
#include "dims/preprocess.hpp"
#include "json.hpp"

namespace dims {

namespace {

using json = nlohmann::ordered_json;

std::int64_t uniform(std::mt19937_64& rng, std::int64_t lo, std::int64_t hi) {
  return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

// Entries have variance 1/dim so vectors have unit expected norm.
std::vector<Real> gaussian_vector(std::mt19937_64& rng, std::int64_t dim) {
  std::normal_distribution<double> dist(0.0, 1.0 / std::sqrt(static_cast<double>(dim)));
  std::vector<Real> v(static_cast<std::size_t>(dim));
  for (auto& x : v) x = static_cast<Real>(dist(rng));
  return v;
}

}  // namespace

void SyntheticSpec::validate() const {
  auto require = [](bool ok, const char* key, const char* msg) {
    if (!ok) throw ConfigError(key, std::string(key) + ": " + msg);
  };
  require(samples >= 0, "samples", "must be non-negative");
  require(topics >= 2, "topics", "need at least two topics");
  require(filler_vocab >= 1, "filler_vocab", "must be positive");
  require(keywords_per_article >= 1, "keywords_per_article", "must be positive");
  require(follow >= 0, "follow", "must be non-negative");
  require(article_len_min >= keywords_per_article * (follow + 1), "article_len_min",
          "too short to hold every keyword and its following words");
  require(article_len_max >= article_len_min, "article_len_max", "must be >= article_len_min");
  require(feature_dim >= 1, "feature_dim", "must be positive");
  require(candidates >= 1, "candidates", "must be positive");
  require(segment_len >= 1, "segment_len", "must be positive");
  require(distractors >= 0 && distractors < candidates, "distractors", "must be in [0, candidates)");
  require(noise >= 0, "noise", "must be non-negative");
}

std::string SyntheticSpec::to_json() const {
  json j{{"samples", samples},
         {"topics", topics},
         {"filler_vocab", filler_vocab},
         {"article_len_min", article_len_min},
         {"article_len_max", article_len_max},
         {"keywords_per_article", keywords_per_article},
         {"follow", follow},
         {"feature_dim", feature_dim},
         {"candidates", candidates},
         {"segment_len", segment_len},
         {"distractors", distractors},
         {"noise", noise},
         {"seed", seed},
         {"id_prefix", id_prefix}};
  return j.dump(2);
}

SyntheticSpec SyntheticSpec::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("synthetic spec is not valid JSON: ") + e.what());
  }
  SyntheticSpec spec;
  for (const auto& [key, value] : j.items()) {
    auto set_int = [&](std::int64_t& dst) {
      if (!value.is_number_integer()) throw ConfigError(key, key + " must be an integer");
      dst = value.get<std::int64_t>();
    };
    if (key == "samples") set_int(spec.samples);
    else if (key == "topics") set_int(spec.topics);
    else if (key == "filler_vocab") set_int(spec.filler_vocab);
    else if (key == "article_len_min") set_int(spec.article_len_min);
    else if (key == "article_len_max") set_int(spec.article_len_max);
    else if (key == "keywords_per_article") set_int(spec.keywords_per_article);
    else if (key == "follow") set_int(spec.follow);
    else if (key == "feature_dim") set_int(spec.feature_dim);
    else if (key == "candidates") set_int(spec.candidates);
    else if (key == "segment_len") set_int(spec.segment_len);
    else if (key == "distractors") set_int(spec.distractors);
    else if (key == "seed") set_int(spec.seed);
    else if (key == "noise") {
      if (!value.is_number()) throw ConfigError(key, "noise must be a number");
      spec.noise = value.get<double>();
    } else if (key == "id_prefix") {
      if (!value.is_string()) throw ConfigError(key, "id_prefix must be a string");
      spec.id_prefix = value.get<std::string>();
    } else {
      throw ConfigError(key, "unknown synthetic spec key: " + key);
    }
  }
  spec.validate();
  return spec;
}

std::string keyword_token(std::int64_t topic) { return "kw" + std::to_string(topic); }
std::string filler_token(std::int64_t index) { return "w" + std::to_string(index); }

std::vector<Sample> gen_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(static_cast<std::uint64_t>(spec.seed));
  std::vector<std::vector<Real>> topic_vectors;
  for (std::int64_t k = 0; k < spec.topics; ++k) topic_vectors.push_back(gaussian_vector(rng, spec.feature_dim));

  const auto block = spec.follow + 1;
  const auto segments = (spec.candidates + spec.segment_len - 1) / spec.segment_len;
  std::normal_distribution<double> noise(0.0, 1.0 / std::sqrt(static_cast<double>(spec.feature_dim)));
  std::vector<Sample> out;
  out.reserve(static_cast<std::size_t>(spec.samples));
  for (std::int64_t n = 0; n < spec.samples; ++n) {
    Sample s;
    s.id = spec.id_prefix + "-" + std::to_string(n);
    const auto topic = uniform(rng, 0, spec.topics - 1);
    const auto length = uniform(rng, spec.article_len_min, spec.article_len_max);

    // Spread the filler words that are not part of a keyword block over the
    // gaps before, between and after the blocks.
    const auto free = length - spec.keywords_per_article * block;
    std::vector<std::int64_t> cuts;
    for (std::int64_t k = 0; k < spec.keywords_per_article; ++k) cuts.push_back(uniform(rng, 0, free));
    std::sort(cuts.begin(), cuts.end());
    std::vector<std::int64_t> keyword_pos;
    for (std::int64_t k = 0; k < spec.keywords_per_article; ++k) {
      keyword_pos.push_back(cuts[static_cast<std::size_t>(k)] + k * block);
    }
    s.article.resize(static_cast<std::size_t>(length));
    for (auto& t : s.article) t = filler_token(uniform(rng, 0, spec.filler_vocab - 1));
    for (auto p : keyword_pos) {
      s.article[static_cast<std::size_t>(p)] = keyword_token(topic);
      for (std::int64_t f = 0; f <= spec.follow; ++f) {
        s.summary.push_back(s.article[static_cast<std::size_t>(p + f)]);
      }
    }

    const auto planted = uniform(rng, 0, spec.candidates - 1);
    const auto planted_segment = planted / spec.segment_len;
    std::vector<std::int64_t> slots;
    for (std::int64_t i = 0; i < spec.candidates; ++i) {
      if (i != planted && (segments == 1 || i / spec.segment_len != planted_segment)) slots.push_back(i);
    }
    std::shuffle(slots.begin(), slots.end(), rng);
    std::vector<std::int64_t> frame_topic(static_cast<std::size_t>(spec.candidates), -1);
    frame_topic[static_cast<std::size_t>(planted)] = topic;
    for (std::int64_t d = 0; d < spec.distractors && d < static_cast<std::int64_t>(slots.size()); ++d) {
      auto other = uniform(rng, 0, spec.topics - 2);
      if (other >= topic) ++other;
      frame_topic[static_cast<std::size_t>(slots[static_cast<std::size_t>(d)])] = other;
    }

    s.frames.kind = FrameKind::kFeature;
    s.frames.frame_shape = {static_cast<std::size_t>(spec.feature_dim)};
    for (std::int64_t i = 0; i < spec.candidates; ++i) {
      const auto t = frame_topic[static_cast<std::size_t>(i)];
      auto v = t >= 0 ? topic_vectors[static_cast<std::size_t>(t)] : gaussian_vector(rng, spec.feature_dim);
      if (spec.noise > 0) {
        for (auto& x : v) x += static_cast<Real>(spec.noise * noise(rng));
      }
      s.frames.frames.push_back(std::move(v));
    }
    s.cover.payload = topic_vectors[static_cast<std::size_t>(topic)];
    s.meta = json{{"topic", topic}, {"planted", planted}}.dump();
    auto label = label_positive(s.frames, s.cover.payload);
    s.positive = label.index;
    s.positive_similarity = static_cast<Real>(label.similarity);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace dims
