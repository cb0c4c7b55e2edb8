#include <benchmark/benchmark.h>

#include <random>

#include "sinkprobe/baselines.hpp"
#include "sinkprobe/evaluation.hpp"
#include "sinkprobe/extraction.hpp"
#include "sinkprobe/metrics.hpp"
#include "sinkprobe/probe.hpp"
#include "sinkprobe/sink_features.hpp"
#include "sinkprobe/synth.hpp"

using namespace sinkprobe;

namespace {

AttentionRecord planted_record(std::size_t seq_len) {
  SynthConfig c;
  c.n_examples = 2;
  c.min_len = seq_len;
  c.max_len = seq_len;
  return generate(c).records[0];
}

FeatureMatrix planted_matrix(std::size_t n, std::size_t k) {
  SynthConfig c;
  c.n_examples = n;
  return batch_features(generate(c).records, FeatureFamily::kSink, k).matrix;
}

}  // namespace

static void BM_SinkScores(benchmark::State& state) {
  const auto r = planted_record(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(sink_scores(r));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(r.attention.size()));
}
BENCHMARK(BM_SinkScores)->Arg(32)->Arg(256)->Arg(1024);

static void BM_TopK(benchmark::State& state) {
  const auto s = sink_scores(planted_record(512));
  for (auto _ : state) benchmark::DoNotOptimize(top_k_features(s, static_cast<std::size_t>(state.range(0))));
}
BENCHMARK(BM_TopK)->Arg(1)->Arg(5)->Arg(100);

static void BM_MTopDiv(benchmark::State& state) {
  const auto r = planted_record(static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(mtopdiv_features(r));
}
BENCHMARK(BM_MTopDiv)->Arg(32)->Arg(128);

static void BM_TrainProbe(benchmark::State& state) {
  const auto m = planted_matrix(1000, 5);
  TrainOptions options;
  options.reg = {state.range(0) == 1 ? Penalty::kL1 : Penalty::kL2,
                 state.range(0) == 1 ? kDefaultL1C : kDefaultL2C};
  for (auto _ : state) benchmark::DoNotOptimize(train(m, options));
}
BENCHMARK(BM_TrainProbe)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

static void BM_CrossValidate(benchmark::State& state) {
  const auto m = planted_matrix(1000, 5);
  EvalConfig config;
  config.k = 5;
  for (auto _ : state) benchmark::DoNotOptimize(cross_validate(m, config, 1));
}
BENCHMARK(BM_CrossValidate)->Unit(benchmark::kMillisecond);

static void BM_RocAuc(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> unit;
  std::vector<double> s(n);
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    s[i] = unit(gen);
    y[i] = static_cast<int>(i % 2);
  }
  for (auto _ : state) benchmark::DoNotOptimize(roc_auc(s, y));
}
BENCHMARK(BM_RocAuc)->Arg(1000)->Arg(100000);
BENCHMARK_MAIN();
