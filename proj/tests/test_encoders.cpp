#include <cmath>
#include <random>

#include "doctest.h"
#include "dims/encoders.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace dims;

namespace {

using oracle::Vec;
using oracle::row;
using LstmOracle = oracle::Lstm;

FrameSet feature_frames(std::mt19937_64& rng, std::size_t n, std::size_t dim) {
  FrameSet fs;
  fs.frame_shape = {dim};
  std::normal_distribution<double> d(0, 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<Real> v(dim);
    for (auto& x : v) x = static_cast<Real>(d(rng));
    fs.frames.push_back(v);
  }
  return fs;
}

}  // namespace

TEST_CASE("segment_frames") {
  auto ten = segment_frames(10, 5);
  REQUIRE(ten.size() == 2);
  CHECK(ten[1].frames == std::vector<std::size_t>{5, 6, 7, 8, 9});
  auto five = segment_frames(5, 5);
  REQUIRE(five.size() == 1);
  CHECK(five[0].real_count == 5);
  auto seven = segment_frames(7, 5);
  REQUIRE(seven.size() == 2);
  CHECK(seven[1].frames == std::vector<std::size_t>{5, 6, 6, 6, 6});
  CHECK(seven[1].real_count == 2);
  CHECK_THROWS_AS(segment_frames(0, 5), InputError);
  CHECK_THROWS_AS(segment_frames(3, 0), InputError);

  for (std::size_t n = 1; n <= 40; ++n) {
    for (std::size_t len = 1; len <= 7; ++len) {
      std::vector<std::size_t> flat;
      for (const auto& s : segment_frames(n, len)) {
        CHECK(s.frames.size() == len);
        flat.insert(flat.end(), s.frames.begin(), s.frames.begin() + static_cast<long>(s.real_count));
      }
      REQUIRE(flat.size() == n);
      for (std::size_t i = 0; i < n; ++i) CHECK(flat[i] == i);
    }
  }
}

TEST_CASE("article encoder") {
  ParameterStore store(3, Real{0.3});
  nn::Embedding emb(store, "emb", 12, 6);
  ArticleEncoder enc(store, "article", emb, 8, 100);

  SUBCASE("shapes and preconditions") {
    std::vector<std::size_t> ids{1, 4, 7, 2};
    auto out = enc.encode(ids);
    CHECK(out.states.shape() == Shape{4, 8});
    CHECK(out.final.shape() == Shape{1, 8});
    CHECK_THROWS_AS(enc.encode(std::vector<std::size_t>{}), InputError);
    CHECK_THROWS_AS(enc.encode(std::vector<std::size_t>{12}), InputError);
    CHECK_THROWS_AS(enc.encode(std::vector<std::size_t>(101, 1)), InputError);
  }

  SUBCASE("single token matches a hand-rolled LSTM step in each direction") {
    std::vector<std::size_t> ids{5};
    auto out = enc.encode(ids);
    Vec x = row(store.at("emb/table"), 5), zero(4, 0.0);
    auto fwd = LstmOracle{store, "article/rnn/forward"}.step(x, zero, zero).first;
    auto bwd = LstmOracle{store, "article/rnn/backward"}.step(x, zero, zero).first;
    auto got = row(out.states, 0);
    for (std::size_t k = 0; k < 4; ++k) {
      CHECK(got[k] == doctest::Approx(fwd[k]).epsilon(1e-12));
      CHECK(got[4 + k] == doctest::Approx(bwd[k]).epsilon(1e-12));
    }
    CHECK(test::to_vector(out.final.values()) == test::to_vector(out.states.values()));
  }

  SUBCASE("unrolled sequence matches the oracle and final is [last fwd; first bwd]") {
    std::vector<std::size_t> ids{3, 9, 0, 11, 6};
    auto out = enc.encode(ids);
    LstmOracle f{store, "article/rnn/forward"}, b{store, "article/rnn/backward"};
    Vec h(4, 0.0), c(4, 0.0);
    for (std::size_t t = 0; t < ids.size(); ++t) {
      std::tie(h, c) = f.step(row(store.at("emb/table"), ids[t]), h, c);
      auto got = row(out.states, t);
      for (std::size_t k = 0; k < 4; ++k) CHECK(got[k] == doctest::Approx(h[k]).epsilon(1e-12));
    }
    h.assign(4, 0.0);
    c.assign(4, 0.0);
    for (std::size_t t = ids.size(); t-- > 0;) {
      std::tie(h, c) = b.step(row(store.at("emb/table"), ids[t]), h, c);
      auto got = row(out.states, t);
      for (std::size_t k = 0; k < 4; ++k) CHECK(got[4 + k] == doctest::Approx(h[k]).epsilon(1e-12));
    }
    auto fin = row(out.final, 0);
    auto last = row(out.states, ids.size() - 1), first = row(out.states, 0);
    for (std::size_t k = 0; k < 4; ++k) {
      CHECK(fin[k] == last[k]);
      CHECK(fin[4 + k] == first[4 + k]);
    }
  }

  SUBCASE("tied directions: reversing the input swaps the halves") {
    ParameterStore tied_store(4, Real{0.3});
    nn::Embedding e2(tied_store, "emb", 12, 6);
    ArticleEncoder tied(tied_store, "article", e2, 8, 100, true);
    std::vector<std::size_t> ids{1, 2, 3, 4, 5, 6};
    std::vector<std::size_t> rev(ids.rbegin(), ids.rend());
    auto a = tied.encode(ids), r = tied.encode(rev);
    const auto T = ids.size();
    for (std::size_t t = 0; t < T; ++t) {
      auto x = row(a.states, t), y = row(r.states, T - 1 - t);
      for (std::size_t k = 0; k < 4; ++k) {
        CHECK(x[k] == doctest::Approx(y[4 + k]).epsilon(1e-14));
        CHECK(x[4 + k] == doctest::Approx(y[k]).epsilon(1e-14));
      }
    }
  }

  SUBCASE("perturbing one token reaches every position through the backward half") {
    std::vector<std::size_t> ids{1, 2, 3, 4, 5, 6, 7};
    auto base = enc.encode(ids);
    const std::size_t t = 4;
    auto changed = ids;
    changed[t] = 10;
    auto pert = enc.encode(changed);
    for (std::size_t s = 0; s < ids.size(); ++s) {
      auto x = row(base.states, s), y = row(pert.states, s);
      bool fwd_same = true, bwd_same = true;
      for (std::size_t k = 0; k < 4; ++k) {
        fwd_same &= x[k] == y[k];
        bwd_same &= x[4 + k] == y[4 + k];
      }
      CHECK(!(fwd_same && bwd_same));
      // The forward half alone is unidirectional: earlier rows are untouched.
      CHECK(fwd_same == (s < t));
      CHECK(bwd_same == (s > t));
    }
  }
}

TEST_CASE("frame featurizers") {
  std::mt19937_64 rng(8);
  SUBCASE("passthrough keeps the vectors") {
    PassthroughFeaturizer p(5);
    auto fs = feature_frames(rng, 3, 5);
    auto feats = p.features(fs);
    CHECK(feats.shape() == Shape{3, 5});
    for (std::size_t i = 0; i < 3; ++i) CHECK(row(feats, i) == Vec(fs.frames[i].begin(), fs.frames[i].end()));
    CHECK_THROWS_AS(p.features(feature_frames(rng, 2, 4)), InputError);
    FrameSet raw;
    raw.kind = FrameKind::kRaw;
    raw.frame_shape = {5};
    raw.frames = {{1, 2, 3, 4, 5}};
    CHECK_THROWS_AS(p.features(raw), InputError);
  }
  SUBCASE("video encoder on passthrough computes relu(F_v v)") {
    ParameterStore store(2, Real{0.3});
    VideoEncoder video(store, "video", std::make_shared<PassthroughFeaturizer>(5), 6, 2);
    auto fs = feature_frames(rng, 3, 5);
    auto enc = video.encode(fs);
    const auto& w = store.at("video/frame_projection/weight");
    const auto& b = store.at("video/frame_projection/bias");
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 6; ++j) {
        double acc = b[j];
        for (std::size_t k = 0; k < 5; ++k) acc += fs.frames[i][k] * w[k * 6 + j];
        CHECK(enc.frame_features[i * 6 + j] == doctest::Approx(std::max(acc, 0.0)).epsilon(1e-12));
      }
    }
    CHECK(enc.summaries.shape() == Shape{2, 6});
    CHECK(enc.segment_of_frame == std::vector<std::size_t>{0, 0, 1});
    CHECK(enc.frame_states.size() == 2);
    CHECK(enc.frame_states[1].shape() == Shape{2, 6});
  }
  SUBCASE("conv featurizer on zero frames and shapes") {
    ParameterStore store(5, Real{0.2});
    auto conv = std::make_shared<ConvFeaturizer>(store, "conv", 16, 8, 3, 6);
    FrameSet zero;
    zero.kind = FrameKind::kRaw;
    zero.frame_shape = {16, 8, 3};
    zero.frames.assign(4, std::vector<Real>(16 * 8 * 3, 0));
    auto feats = conv->features(zero);
    CHECK(feats.shape() == Shape{4, 6});
    VideoEncoder video(store, "video", conv, 6, 5);
    auto enc = video.encode(zero);
    CHECK(enc.frame_features.shape() == Shape{4, 6});
    for (auto v : enc.frame_features.values()) CHECK(v >= 0);
    // Identical inputs give identical rows.
    for (std::size_t i = 1; i < 4; ++i) CHECK(row(enc.frame_features, i) == row(enc.frame_features, 0));

    FrameSet other = zero;
    other.frame_shape = {8, 8, 3};
    for (auto& f : other.frames) f.resize(8 * 8 * 3);
    CHECK_THROWS_AS(conv->features(other), InputError);

    ParameterStore full_size(6, Real{0.05});
    ConvFeaturizer full(full_size, "conv", 128, 64, 3, 128);
    FrameSet big;
    big.kind = FrameKind::kRaw;
    big.frame_shape = {128, 64, 3};
    big.frames.assign(2, std::vector<Real>(128 * 64 * 3, Real{0.5}));
    CHECK(full.features(big).shape() == Shape{2, 128});
  }
}

TEST_CASE("segment encoder") {
  std::mt19937_64 rng(10);
  SUBCASE("identical frames follow the unrolled oracle") {
    ParameterStore store(11, Real{0.3});
    VideoEncoder video(store, "video", std::make_shared<PassthroughFeaturizer>(4), 6, 5);
    auto one = feature_frames(rng, 1, 4).frames[0];
    FrameSet fs;
    fs.frame_shape = {4};
    fs.frames.assign(5, one);
    auto enc = video.encode(fs);
    auto m = row(enc.frame_features, 0);
    LstmOracle f{store, "video/segment_rnn/forward"};
    Vec h(3, 0.0), c(3, 0.0);
    for (std::size_t t = 0; t < 5; ++t) {
      std::tie(h, c) = f.step(m, h, c);
      auto got = row(enc.frame_states[0], t);
      for (std::size_t k = 0; k < 3; ++k) CHECK(got[k] == doctest::Approx(h[k]).epsilon(1e-12));
    }
  }
  SUBCASE("zero weights give zero states") {
    ParameterStore store(12, Real{0.3});
    VideoEncoder video(store, "video", std::make_shared<PassthroughFeaturizer>(4), 6, 2);
    for (auto& [name, t] : store) {
      for (auto& v : t.mutable_values()) v = 0;
    }
    auto enc = video.encode(feature_frames(rng, 5, 4));
    CHECK(enc.summaries.shape() == Shape{3, 6});
    for (auto v : enc.summaries.values()) CHECK(v == 0);
    for (const auto& s : enc.frame_states) {
      for (auto v : s.values()) CHECK(v == 0);
    }
  }
}

TEST_CASE("encoder outputs stay finite over 1000 random inputs") {
  ParameterStore store(13, Real{0.5});
  nn::Embedding emb(store, "emb", 30, 8);
  ArticleEncoder article(store, "article", emb, 8, 100);
  VideoEncoder video(store, "video", std::make_shared<PassthroughFeaturizer>(6), 8, 3);
  std::mt19937_64 rng(14);
  std::uniform_int_distribution<std::size_t> len(1, 12), tok(0, 29), frames(1, 8);
  std::size_t bad = 0;
  for (int i = 0; i < 1000; ++i) {
    std::vector<std::size_t> ids(len(rng));
    for (auto& id : ids) id = tok(rng);
    auto a = article.encode(ids);
    auto v = video.encode(feature_frames(rng, frames(rng), 6));
    for (const auto* t : {&a.states, &a.final, &v.summaries, &v.frame_features}) {
      for (auto x : t->values()) bad += !std::isfinite(x);
    }
  }
  CHECK(bad == 0);
}
