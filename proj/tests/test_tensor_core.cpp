#include <cmath>
#include <functional>
#include <random>

#include "doctest.h"
#include "dims/grad_check.hpp"
#include "dims/ops.hpp"
#include "dims/parameter_store.hpp"
#include "support.hpp"

using namespace dims;
using dims::test::random_tensor;
using dims::test::weighted_sum;

namespace {

GradCheckReport check(const std::function<Tensor()>& f, std::vector<NamedTensor> params,
                      Real tol = Real{1e-4}) {
  GradCheckOptions opts;
  opts.tol = tol;
  return grad_check(f, params, opts);
}

}  // namespace

TEST_CASE("tensor construction validates shape against data") {
  CHECK_THROWS_AS(Tensor({2, 3}, std::vector<Real>(5)), DimensionError);
  CHECK_THROWS_AS(Tensor({0, 3}, {}), DimensionError);
  Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
  CHECK(t.size() == 6);
  CHECK(t.at(1, 2) == 6);
}

TEST_CASE("matmul") {
  SUBCASE("identity") {
    Tensor eye({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    std::mt19937_64 rng(1);
    auto a = random_tensor(rng, {3, 4}, -1, 1, false);
    CHECK(test::to_vector(matmul(eye, a).values()) == test::to_vector(a.values()));
  }
  SUBCASE("hand 2x2") {
    Tensor a({2, 2}, {1, 2, 3, 4});
    Tensor b({2, 1}, {1, 1});
    auto c = matmul(a, b);
    CHECK(c.shape() == Shape{2, 1});
    CHECK(c.at(0, 0) == 3);
    CHECK(c.at(1, 0) == 7);
  }
  SUBCASE("shape mismatch") {
    CHECK_THROWS_AS(matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3})), DimensionError);
  }
  SUBCASE("gradients") {
    std::mt19937_64 rng(2);
    auto a = random_tensor(rng, {4, 5});
    auto b = random_tensor(rng, {5, 3});
    auto r = check([&] { return weighted_sum(matmul(a, b)); }, {{"a", a}, {"b", b}});
    CHECK_MESSAGE(r.passed, r.max_rel_error);
  }
}

TEST_CASE("softmax") {
  SUBCASE("uniform") {
    auto s = softmax(Tensor({1, 3}, {0, 0, 0}), 1);
    for (auto v : s.values()) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-15));
  }
  SUBCASE("shift invariance") {
    std::mt19937_64 rng(3);
    auto x = random_tensor(rng, {3, 5}, -3, 3, false);
    auto a = softmax(x, 1);
    auto b = softmax(x + Real{123.5}, 1);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(a.values()[i] - b.values()[i]) < 1e-12);
  }
  SUBCASE("high precision oracle for [1,2,3]") {
    auto s = softmax(Tensor({1, 3}, {1, 2, 3}), 1);
    const long double z = std::exp(1.0L) + std::exp(2.0L) + std::exp(3.0L);
    for (int i = 0; i < 3; ++i) {
      const long double expect = std::exp(static_cast<long double>(i + 1)) / z;
      CHECK(std::abs(static_cast<long double>(s.values()[i]) - expect) < 1e-15L);
    }
  }
  SUBCASE("rows sum to one and are positive along either axis") {
    std::mt19937_64 rng(4);
    for (std::size_t axis = 0; axis < 2; ++axis) {
      auto s = softmax(random_tensor(rng, {4, 6}, -20, 20, false), axis);
      const std::size_t outer = axis == 1 ? 4 : 6;
      for (std::size_t o = 0; o < outer; ++o) {
        Real total = 0;
        for (std::size_t k = 0; k < (axis == 1 ? 6u : 4u); ++k) {
          const auto v = axis == 1 ? s.at(o, k) : s.at(k, o);
          CHECK(v > 0);
          total += v;
        }
        CHECK(std::abs(total - 1) < 1e-6);
      }
    }
  }
  SUBCASE("large logits stay finite") {
    auto s = softmax(Tensor({1, 2}, {1000, 1001}), 1);
    CHECK(std::isfinite(s.values()[0]));
  }
}

TEST_CASE("elementwise ops") {
  CHECK(sigmoid(Tensor::scalar(0)).item() == 0.5);
  CHECK(relu(Tensor::scalar(-2)).item() == 0);
  CHECK(relu(Tensor::scalar(3)).item() == 3);
  CHECK_THROWS_AS(add(Tensor::zeros({2, 3}), Tensor::zeros({3, 2})), DimensionError);
  CHECK_NOTHROW(add(Tensor::zeros({2, 3}), Tensor::scalar(1)));

  Tensor x({1}, {0.7}, true);
  auto r = check([&] { return tanh(x); }, {{"x", x}});
  CHECK(r.passed);
  // d/dx tanh at 0.7 = 1 - tanh^2
  x.zero_grad();
  Tape tape;
  {
    TapeScope scope(tape);
    tape.backward(tanh(x));
  }
  CHECK(x.grad()[0] == doctest::Approx(1 - std::tanh(0.7) * std::tanh(0.7)).epsilon(1e-12));
}

TEST_CASE("concat") {
  std::mt19937_64 rng(5);
  auto x = random_tensor(rng, {2, 3});
  CHECK(test::to_vector(concat({x}, 1).values()) == test::to_vector(x.values()));
  auto y = random_tensor(rng, {2, 2});
  CHECK(concat({x, y}, 1).shape() == Shape{2, 5});
  CHECK_THROWS_AS(concat({x, random_tensor(rng, {3, 2})}, 1), DimensionError);

  // Backward hands each input exactly its slice of the output gradient.
  Tape tape;
  {
    TapeScope scope(tape);
    auto out = concat({x, y}, 1);
    Tensor w({2, 5}, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
    tape.backward(sum(mul(out, w)));
  }
  CHECK(test::to_vector(x.grad()) == std::vector<Real>{1, 2, 3, 6, 7, 8});
  CHECK(test::to_vector(y.grad()) == std::vector<Real>{4, 5, 9, 10});
  auto r = check([&] { return weighted_sum(concat({x, y}, 1)); }, {{"x", x}, {"y", y}});
  CHECK(r.passed);
}

TEST_CASE("layer norm") {
  auto ones = Tensor::full({1, 4}, 1);
  auto zeros = Tensor::zeros({1, 4});
  SUBCASE("constant row") {
    auto out = layer_norm(Tensor::full({1, 4}, 3.5), ones, zeros, 1e-5);
    for (auto v : out.values()) CHECK(v == 0);
  }
  SUBCASE("row mean equals bias mean") {
    std::mt19937_64 rng(6);
    auto bias = random_tensor(rng, {1, 4}, -1, 1, false);
    auto out = layer_norm(random_tensor(rng, {3, 4}, -2, 2, false), ones, bias, 1e-5);
    const auto bias_mean = (bias.values()[0] + bias.values()[1] + bias.values()[2] + bias.values()[3]) / 4;
    for (std::size_t r = 0; r < 3; ++r) {
      Real m = 0;
      for (std::size_t c = 0; c < 4; ++c) m += out.at(r, c) / 4;
      CHECK(std::abs(m - bias_mean) < 1e-12);
    }
  }
  SUBCASE("gradients on 3x4") {
    std::mt19937_64 rng(7);
    auto x = random_tensor(rng, {3, 4});
    auto g = random_tensor(rng, {1, 4});
    auto b = random_tensor(rng, {1, 4});
    auto r = check([&] { return weighted_sum(layer_norm(x, g, b, 1e-5)); },
                   {{"x", x}, {"gain", g}, {"bias", b}});
    CHECK_MESSAGE(r.passed, r.max_rel_error);
  }
}

TEST_CASE("backward") {
  SUBCASE("x*x at 3") {
    Tensor x({1}, {3}, true);
    Tape tape;
    TapeScope scope(tape);
    tape.backward(mul(x, x));
    CHECK(x.grad()[0] == 6);
  }
  SUBCASE("sum(sigmoid(Wx))") {
    std::mt19937_64 rng(8);
    auto w = random_tensor(rng, {3, 4});
    auto x = random_tensor(rng, {4, 1});
    auto r = check([&] { return sum(sigmoid(matmul(w, x))); }, {{"w", w}, {"x", x}});
    CHECK(r.passed);
  }
  SUBCASE("disconnected parameter keeps a zero gradient") {
    Tensor x({2}, {1, 2}, true);
    Tensor unused({2}, {3, 4}, true);
    unused.mutable_grad();
    Tape tape;
    TapeScope scope(tape);
    tape.backward(sum(mul(x, x)));
    for (auto g : unused.grad()) CHECK(g == 0);
  }
  SUBCASE("non-scalar loss is a contract error") {
    Tensor x({2}, {1, 2}, true);
    Tape tape;
    TapeScope scope(tape);
    CHECK_THROWS_AS(tape.backward(mul(x, x)), ContractError);
  }
  SUBCASE("repeated calls accumulate; reset makes them idempotent") {
    std::mt19937_64 rng(9);
    auto w = random_tensor(rng, {3, 3});
    Tape tape;
    TapeScope scope(tape);
    auto loss = sum(tanh(matmul(w, w)));
    tape.backward(loss);
    auto first = test::to_vector(w.grad());
    tape.backward(loss);
    for (std::size_t i = 0; i < first.size(); ++i) CHECK(w.grad()[i] == doctest::Approx(2 * first[i]));
    w.zero_grad();
    tape.backward(loss);
    auto again = test::to_vector(w.grad());
    w.zero_grad();
    tape.backward(loss);
    CHECK(test::to_vector(w.grad()) == again);
    CHECK(again == first);
  }
  SUBCASE("without an active tape nothing is recorded") {
    Tensor x({1}, {2}, true);
    auto y = mul(x, x);
    CHECK_FALSE(y.requires_grad());
    CHECK_THROWS_AS(backward(y), ContractError);
  }
}

TEST_CASE("non-finite results are rejected") {
  CHECK_THROWS_AS(exp(Tensor::scalar(1000)), NumericError);
  set_finite_check(false);
  CHECK_NOTHROW(exp(Tensor::scalar(1000)));
  set_finite_check(true);
}

TEST_CASE("grad_check") {
  SUBCASE("quadratic passes at 1e-6") {
    std::mt19937_64 rng(10);
    auto x = random_tensor(rng, {5});
    auto a = random_tensor(rng, {5}, -1, 1, false);
    auto r = check([&] { return sum(mul(a, mul(x, x))) + Real{0}; }, {{"x", x}}, Real{1e-6});
    CHECK(r.passed);
  }
  SUBCASE("corrupted backward fails") {
    std::mt19937_64 rng(11);
    auto x = random_tensor(rng, {4});
    std::vector<NamedTensor> params{{"x", x}};
    auto r = grad_check([&] { return sum(tanh(x)); }, params, {},
                        [](const std::string&, std::span<Real> g) { g[1] += Real{0.5}; });
    CHECK_FALSE(r.passed);
    CHECK(r.worst_param == "x");
    CHECK(r.worst_index == 1);
  }
  SUBCASE("non-finite objective reports diagnostics") {
    Tensor x({1}, {1e-300}, true);
    std::vector<NamedTensor> params{{"x", x}};
    set_finite_check(false);
    auto r = grad_check([&] { return sum(log_floor(x, 0)); }, params);
    set_finite_check(true);
    CHECK_FALSE(r.passed);
    CHECK_FALSE(r.diagnostics.empty());
  }
}

TEST_CASE("finite-difference agreement for every differentiable op (property)") {
  using Builder = std::function<std::pair<std::function<Tensor()>, std::vector<NamedTensor>>(std::mt19937_64&)>;
  std::vector<std::pair<std::string, Builder>> ops;
  auto unary = [&](const std::string& name, std::function<Tensor(const Tensor&)> f, double lo = -1,
                   double hi = 1) {
    ops.push_back({name, [=](std::mt19937_64& rng) {
                     auto x = lo == 0 && hi == 0 ? test::away_from_zero(rng, {3, 4})
                                                 : random_tensor(rng, {3, 4}, lo, hi);
                     return std::make_pair(std::function<Tensor()>([=] { return weighted_sum(f(x)); }),
                                           std::vector<NamedTensor>{{"x", x}});
                   }});
  };
  auto binary = [&](const std::string& name, std::function<Tensor(const Tensor&, const Tensor&)> f,
                    Shape sa, Shape sb) {
    ops.push_back({name, [=](std::mt19937_64& rng) {
                     auto a = random_tensor(rng, sa);
                     auto b = random_tensor(rng, sb);
                     return std::make_pair(
                         std::function<Tensor()>([=] { return weighted_sum(f(a, b)); }),
                         std::vector<NamedTensor>{{"a", a}, {"b", b}});
                   }});
  };
  unary("sigmoid", [](const Tensor& x) { return sigmoid(x); });
  unary("tanh", [](const Tensor& x) { return tanh(x); });
  unary("relu", [](const Tensor& x) { return relu(x); }, 0, 0);
  unary("exp", [](const Tensor& x) { return exp(x); });
  unary("log_floor", [](const Tensor& x) { return log_floor(x, 1e-12); }, 0.2, 2);
  unary("affine", [](const Tensor& x) { return affine(x, -1.5, 0.25); });
  unary("transpose", [](const Tensor& x) { return transpose(x); });
  unary("softmax0", [](const Tensor& x) { return softmax(x, 0); });
  unary("softmax1", [](const Tensor& x) { return softmax(x, 1); });
  unary("slice", [](const Tensor& x) { return slice(x, 1, 1, 3); });
  unary("row_of", [](const Tensor& x) { return row_of(x, 2); });
  unary("gather_rows", [](const Tensor& x) {
    const std::size_t idx[] = {2, 0, 2};
    return gather_rows(x, idx);
  });
  unary("pick", [](const Tensor& x) { return pick(x, 5); });
  unary("sum", [](const Tensor& x) { return sum(x); });
  unary("mean", [](const Tensor& x) { return mean(x); });
  unary("pad_cols", [](const Tensor& x) { return pad_cols(row_of(x, 1), 7); });
  unary("scatter_add", [](const Tensor& x) {
    const std::size_t idx[] = {0, 3, 3, 1};
    return scatter_add(row_of(x, 0), idx, 5);
  });
  unary("stack_rows", [](const Tensor& x) { return stack_rows({row_of(x, 2), row_of(x, 0)}); });
  binary("add", [](const Tensor& a, const Tensor& b) { return add(a, b); }, {3, 4}, {3, 4});
  binary("add_scalar", [](const Tensor& a, const Tensor& b) { return add(a, b); }, {3, 4}, {1});
  binary("sub", [](const Tensor& a, const Tensor& b) { return sub(a, b); }, {3, 4}, {3, 4});
  binary("sub_scalar", [](const Tensor& a, const Tensor& b) { return sub(b, a); }, {3, 4}, {1});
  binary("mul", [](const Tensor& a, const Tensor& b) { return mul(a, b); }, {3, 4}, {3, 4});
  binary("mul_scalar", [](const Tensor& a, const Tensor& b) { return mul(b, a); }, {3, 4}, {1});
  binary("matmul", [](const Tensor& a, const Tensor& b) { return matmul(a, b); }, {3, 4}, {4, 2});
  binary("add_rowvec", [](const Tensor& a, const Tensor& b) { return add_rowvec(a, b); }, {3, 4}, {1, 4});
  binary("mul_rowvec", [](const Tensor& a, const Tensor& b) { return mul_rowvec(a, b); }, {3, 4}, {1, 4});
  binary("scale_rows", [](const Tensor& a, const Tensor& b) { return scale_rows(a, b); }, {3, 4}, {3, 1});
  binary("concat0", [](const Tensor& a, const Tensor& b) { return concat({a, b}, 0); }, {3, 4}, {2, 4});
  ops.push_back({"linear", [](std::mt19937_64& rng) {
                   auto x = random_tensor(rng, {3, 4});
                   auto w = random_tensor(rng, {4, 2});
                   auto b = random_tensor(rng, {1, 2});
                   return std::make_pair(
                       std::function<Tensor()>([=] { return weighted_sum(linear(x, w, b)); }),
                       std::vector<NamedTensor>{{"x", x}, {"w", w}, {"b", b}});
                 }});
  ops.push_back({"layer_norm", [](std::mt19937_64& rng) {
                   auto x = random_tensor(rng, {3, 4});
                   auto g = random_tensor(rng, {1, 4});
                   auto b = random_tensor(rng, {1, 4});
                   return std::make_pair(
                       std::function<Tensor()>([=] { return weighted_sum(layer_norm(x, g, b, 1e-5)); }),
                       std::vector<NamedTensor>{{"x", x}, {"g", g}, {"b", b}});
                 }});
  ops.push_back({"conv2d+pool", [](std::mt19937_64& rng) {
                   auto x = random_tensor(rng, {2, 5, 4});
                   auto w = random_tensor(rng, {3, 2, 3, 3});
                   auto b = random_tensor(rng, {3});
                   return std::make_pair(std::function<Tensor()>([=] {
                                           return weighted_sum(global_avg_pool(conv2d(x, w, b, 2, 1))) +
                                                  weighted_sum(conv2d(x, w, b, 1, 1), 5);
                                         }),
                                         std::vector<NamedTensor>{{"x", x}, {"w", w}, {"b", b}});
                 }});

  std::mt19937_64 rng(2024);
  std::size_t instances = 0;
  for (int round = 0; round < 4; ++round) {
    for (const auto& [name, build] : ops) {
      auto [f, params] = build(rng);
      auto r = grad_check(f, params);
      CHECK_MESSAGE(r.passed, name << " max rel error " << r.max_rel_error << " " << r.diagnostics);
      ++instances;
    }
  }
  CHECK(instances >= 100);
}

TEST_CASE("parameter store") {
  ParameterStore store(5, 0.05);
  auto a = store.create("a", {2, 3});
  auto b = store.create_constant("b", {1, 3}, 1.0);
  CHECK(a.requires_grad());
  CHECK(b.requires_grad());
  CHECK_THROWS(store.create("a", {1}));
  std::vector<std::string> names;
  for (const auto& [n, t] : store) names.push_back(n);
  CHECK(names == std::vector<std::string>{"a", "b"});
  CHECK(store.scalar_count() == 9);

  // Same seed, same values.
  ParameterStore again(5, 0.05);
  CHECK(test::to_vector(again.create("a", {2, 3}).values()) == test::to_vector(a.values()));
}

TEST_CASE("forward results are deterministic") {
  std::mt19937_64 r1(77), r2(77);
  auto a = random_tensor(r1, {4, 4});
  auto b = random_tensor(r2, {4, 4});
  auto fa = softmax(matmul(a, tanh(a)), 1);
  auto fb = softmax(matmul(b, tanh(b)), 1);
  CHECK(test::to_vector(fa.values()) == test::to_vector(fb.values()));
}
