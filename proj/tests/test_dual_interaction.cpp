#include <cmath>
#include <random>

#include "doctest.h"
#include "dims/dual_interaction.hpp"
#include "support.hpp"

using namespace dims;

namespace {

void fill(ParameterStore& store, const std::string& name, std::vector<Real> values) {
  auto v = store.at(name).mutable_values();
  REQUIRE(v.size() == values.size());
  std::copy(values.begin(), values.end(), v.begin());
}

void fill_all(ParameterStore& store, Real value) {
  for (auto& [name, t] : store) {
    for (auto& v : t.mutable_values()) v = value;
  }
}

Tensor mat(Shape shape, std::vector<Real> v) { return Tensor(std::move(shape), std::move(v)); }

void check_rows_sum_to_one(const Tensor& t, std::size_t axis) {
  const auto R = t.rows(), C = t.cols();
  const auto outer = axis == 1 ? R : C, inner = axis == 1 ? C : R;
  for (std::size_t o = 0; o < outer; ++o) {
    double s = 0;
    for (std::size_t i = 0; i < inner; ++i) s += axis == 1 ? t[o * C + i] : t[i * C + o];
    CHECK(std::abs(s - 1.0) <= 1e-6);
  }
}

}  // namespace

TEST_CASE("self-attention layer") {
  std::mt19937_64 rng(1);
  ParameterStore store(2, Real{0.3});
  SelfAttentionLayer layer(store, "sa", 4, 6, Real{1e-5}, ScalePosition::kValues);

  SUBCASE("a single segment attends to itself") {
    auto s = test::random_tensor(rng, {1, 4}, -1, 1, false);
    auto out = layer.forward(s);
    CHECK(out.weights.shape() == Shape{1, 1});
    CHECK(out.weights[0] == 1.0);
    const auto& wv = store.at("sa/value/weight");
    const auto& bv = store.at("sa/value/bias");
    for (std::size_t j = 0; j < 4; ++j) {
      double v = bv[j];
      for (std::size_t k = 0; k < 4; ++k) v += s[k] * wv[k * 4 + j];
      CHECK(out.attended[j] == doctest::Approx(v / 2.0).epsilon(1e-12));
    }
  }

  SUBCASE("identical segments give uniform weights") {
    auto one = test::random_tensor(rng, {1, 4}, -1, 1, false);
    auto s = concat({one, one, one}, 0);
    auto w = layer.forward(s).weights;
    for (auto v : w.values()) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-14));
  }

  SUBCASE("two segments against a scalar oracle") {
    ParameterStore small(3, Real{0});
    SelfAttentionLayer two(small, "sa", 2, 2, Real{1e-5}, ScalePosition::kValues);
    fill(small, "sa/query/weight", {1.0, 0.5, -0.3, 2.0});
    fill(small, "sa/key/weight", {0.7, -1.0, 0.2, 0.4});
    fill(small, "sa/value/weight", {1.5, 0.0, -0.5, 1.0});
    fill(small, "sa/query/bias", {0.1, 0.0});
    fill(small, "sa/value/bias", {0.0, -0.2});
    std::vector<long double> S{0.3L, -1.2L, 0.8L, 0.5L};
    auto s = mat({2, 2}, {0.3, -1.2, 0.8, 0.5});
    auto lin = [&](const std::string& n, std::size_t r, std::size_t c) {
      long double acc = small.at(n + "/bias")[c];
      for (std::size_t k = 0; k < 2; ++k) acc += S[r * 2 + k] * small.at(n + "/weight")[k * 2 + c];
      return acc;
    };
    for (auto scale : {ScalePosition::kValues, ScalePosition::kLogits}) {
      ParameterStore other(3, Real{0});
      SelfAttentionLayer l2(other, "sa", 2, 2, Real{1e-5}, scale);
      for (auto& [name, t] : small) fill(other, name, test::to_vector(t.values()));
      auto out = l2.forward(s);
      const long double root = std::sqrt(2.0L);
      for (std::size_t i = 0; i < 2; ++i) {
        long double logit[2];
        for (std::size_t j = 0; j < 2; ++j) {
          logit[j] = lin("sa/query", i, 0) * lin("sa/key", j, 0) + lin("sa/query", i, 1) * lin("sa/key", j, 1);
          if (scale == ScalePosition::kLogits) logit[j] /= root;
        }
        const long double m = std::max(logit[0], logit[1]);
        const long double z = std::exp(logit[0] - m) + std::exp(logit[1] - m);
        long double a[2] = {std::exp(logit[0] - m) / z, std::exp(logit[1] - m) / z};
        for (std::size_t c = 0; c < 2; ++c) {
          long double v = a[0] * lin("sa/value", 0, c) + a[1] * lin("sa/value", 1, c);
          if (scale == ScalePosition::kValues) v /= root;
          CHECK(std::abs(out.attended[i * 2 + c] - static_cast<double>(v)) <= 1e-12);
          CHECK(std::abs(out.weights[i * 2 + c] - static_cast<double>(a[c])) <= 1e-12);
        }
      }
    }
  }

  SUBCASE("attention rows sum to one") {
    for (int t = 0; t < 50; ++t) {
      auto s = test::random_tensor(rng, {5, 4}, -3, 3, false);
      check_rows_sum_to_one(layer.forward(s).weights, 1);
    }
  }
}

TEST_CASE("condition gate") {
  std::mt19937_64 rng(4);
  ParameterStore store(5, Real{0.5});
  ConditionGate gate(store, "gate", 3);

  SUBCASE("zero weights give one half") {
    ParameterStore zero(6, Real{0.5});
    ConditionGate g(zero, "gate", 3);
    fill_all(zero, 0);
    auto beta = g(test::random_tensor(rng, {4, 3}, -1, 1, false), test::random_tensor(rng, {1, 3}, -1, 1, false));
    for (auto v : beta.values()) CHECK(v == 0.5);
  }

  SUBCASE("range and hand-set oracle") {
    for (int t = 0; t < 100; ++t) {
      auto beta = gate(test::random_tensor(rng, {3, 3}, -5, 5, false), test::random_tensor(rng, {1, 3}, -5, 5, false));
      for (auto v : beta.values()) {
        CHECK(v > 0);
        CHECK(v < 1);
      }
    }
    ParameterStore two(7, Real{0});
    ConditionGate g(two, "gate", 2);
    fill(two, "gate/project/weight", {0.6, -1.1});
    fill(two, "gate/project/bias", {0.05});
    auto beta = g(mat({1, 2}, {1.5, -0.4}), mat({1, 2}, {0.8, 2.0}));
    const long double arg = 0.6L * 1.5L * 0.8L + -1.1L * -0.4L * 2.0L + 0.05L;
    CHECK(std::abs(beta[0] - static_cast<double>(1 / (1 + std::exp(-arg)))) <= 1e-14);
  }

  SUBCASE("scaling the article vector moves the gate with the sign of the logit") {
    auto s = test::random_tensor(rng, {6, 3}, -1, 1, false);
    auto h = test::random_tensor(rng, {1, 3}, -1, 1, false);
    const auto& b = store.at("gate/project/bias");
    auto base_logit = gate.logits(s, h);
    auto base = gate(s, h);
    auto scaled = gate(s, Real{2} * h);
    for (std::size_t i = 0; i < 6; ++i) {
      const double unbiased = base_logit[i] - b[0];
      if (unbiased > 0) CHECK(scaled[i] > base[i]);
      if (unbiased < 0) CHECK(scaled[i] < base[i]);
    }
  }
}

TEST_CASE("conditional self-attention") {
  std::mt19937_64 rng(8);
  auto s = test::random_tensor(rng, {3, 4}, -1, 1, false);
  auto h = test::random_tensor(rng, {1, 4}, -1, 1, false);

  ParameterStore flat(9, Real{0.3});
  ConditionalSelfAttention none(flat, "csa", 4, 6, 0, Real{1e-5}, ScalePosition::kValues);
  CHECK(none.depth() == 0);
  auto out0 = none(s, h);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 4; ++j) CHECK(out0.conditional[i * 4 + j] == out0.gates[i] * s[i * 4 + j]);
  }

  ParameterStore deep(10, Real{0.3});
  ConditionalSelfAttention two(deep, "csa", 4, 6, 2, Real{1e-5}, ScalePosition::kValues);
  auto out2 = two(s, h);
  CHECK(out2.layer_weights.size() == 2);
  CHECK(out2.conditional.shape() == Shape{3, 4});
  CHECK(out2.gates.shape() == Shape{3, 1});
}

TEST_CASE("global attention") {
  std::mt19937_64 rng(11);
  ParameterStore store(12, Real{0.4});
  GlobalAttention global(store, "ga", 4, GlobalNormalization::kSoftmax);

  SUBCASE("one segment") {
    auto article = test::random_tensor(rng, {5, 4}, -1, 1, false);
    auto seg = test::random_tensor(rng, {1, 4}, -1, 1, false);
    auto out = global(article, seg);
    for (auto v : out.row_weights.values()) CHECK(v == 1.0);
    for (std::size_t t = 0; t < 5; ++t) {
      for (std::size_t j = 0; j < 4; ++j) CHECK(out.video_aware_article[t * 4 + j] == doctest::Approx(seg[j]).epsilon(1e-14));
    }
  }
  SUBCASE("one token") {
    auto article = test::random_tensor(rng, {1, 4}, -1, 1, false);
    auto segs = test::random_tensor(rng, {3, 4}, -1, 1, false);
    auto out = global(article, segs);
    for (auto v : out.column_weights.values()) CHECK(v == 1.0);
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 4; ++j) CHECK(out.article_aware_video[i * 4 + j] == doctest::Approx(article[j]).epsilon(1e-14));
    }
  }
  SUBCASE("identity projections on orthogonal unit vectors") {
    ParameterStore id(13, Real{0});
    GlobalAttention g(id, "ga", 2, GlobalNormalization::kSoftmax);
    fill(id, "ga/text_proj/weight", {1, 0, 0, 1});
    fill(id, "ga/video_proj/weight", {1, 0, 0, 1});
    auto h = mat({2, 2}, {1, 0, 0, 1});
    auto s = mat({2, 2}, {1, 0, 0, 1});
    auto out = g(h, s);
    CHECK(test::to_vector(out.scores.values()) == std::vector<Real>{1, 0, 0, 1});
    const double big = std::exp(1.0) / (std::exp(1.0) + 1), small = 1 / (std::exp(1.0) + 1);
    for (const auto* t : {&out.video_aware_article, &out.article_aware_video}) {
      CHECK((*t)[0] == doctest::Approx(big).epsilon(1e-14));
      CHECK((*t)[1] == doctest::Approx(small).epsilon(1e-14));
      CHECK((*t)[2] == doctest::Approx(small).epsilon(1e-14));
      CHECK((*t)[3] == doctest::Approx(big).epsilon(1e-14));
    }
    ParameterStore id_raw(13, Real{0});
    GlobalAttention raw(id_raw, "ga", 2, GlobalNormalization::kRaw);
    fill(id_raw, "ga/text_proj/weight", {1, 0, 0, 1});
    fill(id_raw, "ga/video_proj/weight", {1, 0, 0, 1});
    auto r = raw(h, s);
    CHECK(test::to_vector(r.video_aware_article.values()) == std::vector<Real>{1, 0, 0, 1});
  }
  SUBCASE("normalised weights sum to one along their axes") {
    for (int t = 0; t < 50; ++t) {
      auto out = global(test::random_tensor(rng, {7, 4}, -3, 3, false), test::random_tensor(rng, {3, 4}, -3, 3, false));
      check_rows_sum_to_one(out.row_weights, 1);
      check_rows_sum_to_one(out.column_weights, 0);
    }
  }
}

TEST_CASE("ablation switches") {
  std::mt19937_64 rng(14);
  auto article = test::random_tensor(rng, {5, 4}, -1, 1, false);
  auto final = test::random_tensor(rng, {1, 4}, -1, 1, false);
  auto segs = test::random_tensor(rng, {2, 4}, -1, 1, false);
  auto build = [](ParameterStore& st, InteractionSwitches sw) {
    return DualInteraction(st, "di", 4, 6, 2, Real{1e-5}, ScalePosition::kValues, GlobalNormalization::kSoftmax, sw);
  };

  ParameterStore s_store(15, Real{0.3});
  auto dims_s = build(s_store, {false, true});
  auto out_s = dims_s(article, final, segs);
  CHECK(test::to_vector(out_s.conditional_segments.values()) == test::to_vector(segs.values()));
  CHECK(out_s.scores.shape() == Shape{5, 2});
  CHECK(!s_store.contains("di/conditional/gate/project/weight"));

  ParameterStore g_store(15, Real{0.3});
  auto dims_g = build(g_store, {true, false});
  auto out_g = dims_g(article, final, segs);
  CHECK(test::to_vector(out_g.video_aware_article.values()) == test::to_vector(article.values()));
  CHECK(test::to_vector(out_g.article_aware_video.values()) == test::to_vector(out_g.conditional_segments.values()));
  CHECK(!g_store.contains("di/global/text_proj/weight"));

  ParameterStore f_store(15, Real{0.3});
  auto full = build(f_store, {true, true});
  auto out_f = full(article, final, segs);
  CHECK(out_f.gates.shape() == Shape{2, 1});
  CHECK(out_f.video_aware_article.shape() == Shape{5, 4});
  CHECK(out_f.article_aware_video.shape() == Shape{2, 4});
}
