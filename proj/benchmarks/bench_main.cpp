#include <benchmark/benchmark.h>

#include <random>

#include "dims/metrics.hpp"
#include "dims/model.hpp"
#include "dims/ops.hpp"
#include "dims/synthetic.hpp"
#include "dims/training.hpp"

using namespace dims;

namespace {

Tensor random_matrix(std::mt19937_64& rng, std::size_t r, std::size_t c) {
  std::normal_distribution<double> d(0, 1);
  std::vector<Real> v(r * c);
  for (auto& x : v) x = static_cast<Real>(d(rng));
  return Tensor({r, c}, std::move(v));
}

struct Corpus {
  RunConfig config;
  Vocabulary vocab;
  std::vector<Sample> samples;
};

Corpus make_corpus(std::int64_t dim, std::int64_t samples) {
  SyntheticSpec spec;
  spec.samples = samples;
  spec.noise = 0.5;
  Corpus c;
  c.samples = gen_synthetic(spec);
  c.vocab = Vocabulary::build(c.samples);
  c.config.embed_dim = c.config.hidden_dim = c.config.attention_dim = c.config.ffn_dim = dim;
  return c;
}

}  // namespace

static void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  auto a = random_matrix(rng, n, n), b = random_matrix(rng, n, n);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(128);

static void BM_RougeL(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> tok(0, 50);
  std::vector<std::string> a(30), b(30);
  for (auto& t : a) t = std::to_string(tok(rng));
  for (auto& t : b) t = std::to_string(tok(rng));
  for (auto _ : state) benchmark::DoNotOptimize(metrics::rouge(a, b));
}
BENCHMARK(BM_RougeL);

// Forward and backward of the joint loss for one sample.
static void BM_SampleLossBackward(benchmark::State& state) {
  auto c = make_corpus(state.range(0), 1);
  DimsModel model(c.config, c.vocab.size());
  const auto ids = encode_sample(c.samples[0], c.vocab);
  for (auto _ : state) {
    Tape tape;
    TapeScope scope(tape);
    tape.backward(model.loss(c.samples[0], ids).total);
  }
}
BENCHMARK(BM_SampleLossBackward)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

// One optimizer update on a 16-sample batch.
static void BM_TrainStep(benchmark::State& state) {
  auto c = make_corpus(state.range(0), 64);
  Trainer trainer(c.config, c.vocab, c.samples, {});
  for (auto _ : state) benchmark::DoNotOptimize(trainer.train_step());
}
BENCHMARK(BM_TrainStep)->Arg(32)->Arg(128)->Unit(benchmark::kMillisecond);

static void BM_Predict(benchmark::State& state) {
  auto c = make_corpus(128, 1);
  DimsModel model(c.config, c.vocab.size());
  const auto ids = encode_sample(c.samples[0], c.vocab);
  const auto beam = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(model.predict(c.samples[0], ids, c.vocab, beam));
}
BENCHMARK(BM_Predict)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
