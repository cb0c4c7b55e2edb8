#include <gtest/gtest.h>

#include <algorithm>
#include <map>
#include <numeric>
#include <random>

#include "sinkprobe/evaluation.hpp"
#include "sinkprobe/extraction.hpp"
#include "sinkprobe/random.hpp"
#include "sinkprobe/synth.hpp"
#include "support.hpp"

using namespace sinkprobe;
using test_support::error_kind;

namespace {

std::vector<std::string> ids(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("id" + std::to_string(n - i));
  return out;
}

SynthConfig small_config(double gap, std::uint64_t seed) {
  SynthConfig c;
  c.n_examples = 120;
  c.num_layers = 2;
  c.num_heads = 2;
  c.min_len = 10;
  c.max_len = 16;
  c.sink_gap = gap;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(Folds, DeterministicAndStratified) {
  std::mt19937_64 gen(149);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 12 + gen() % 90;
    std::vector<int> y(n);
    for (auto& v : y) v = static_cast<int>(gen() % 2);
    const std::size_t k = 2 + gen() % 5;
    for (std::size_t i = 0; i < 2 * k; ++i) y[i] = static_cast<int>(i % 2);
    const auto f = stratified_folds(ids(n), y, k, trial);
    EXPECT_EQ(f, stratified_folds(ids(n), y, k, trial));
    std::map<std::pair<std::size_t, int>, std::size_t> count;
    for (std::size_t i = 0; i < n; ++i) {
      ASSERT_LT(f[i], k);
      ++count[{f[i], y[i]}];
    }
    for (int c : {0, 1}) {
      const double nc = static_cast<double>(std::count(y.begin(), y.end(), c));
      for (std::size_t fold = 0; fold < k; ++fold) {
        ASSERT_LE(std::abs(static_cast<double>(count[{fold, c}]) - nc / double(k)), 1.0);
      }
    }
  }
}

TEST(Folds, DependOnIdsNotInputOrder) {
  const std::vector<std::string> a = {"c", "a", "d", "b", "f", "e"};
  const std::vector<int> ya = {1, 0, 1, 0, 0, 1};
  const std::vector<std::string> b = {"a", "b", "c", "d", "e", "f"};
  const std::vector<int> yb = {0, 0, 1, 1, 1, 0};
  const auto fa = stratified_folds(a, ya, 2, 5);
  const auto fb = stratified_folds(b, yb, 2, 5);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto j = static_cast<std::size_t>(std::find(b.begin(), b.end(), a[i]) - b.begin());
    EXPECT_EQ(fa[i], fb[j]);
  }
}

TEST(Folds, TooFewExamplesPerClass) {
  EXPECT_EQ(error_kind([] {
              stratified_folds(ids(6), std::vector<int>{0, 0, 0, 0, 1, 1}, 3, 0);
            }),
            ErrorKind::kInvalidArgument);
}

TEST(CrossValidate, FamiliesShareFoldsAndReportsAreDeterministic) {
  const auto data = generate(small_config(0.2, 3));
  const auto sink = batch_features(data.records, FeatureFamily::kSink, 3).matrix;
  const auto lookback = batch_features(data.records, FeatureFamily::kLookback, 0).matrix;
  EvalConfig config;
  config.seed = 11;
  config.family = FeatureFamily::kSink;
  config.k = 3;
  const auto a = cross_validate(sink, config);
  config.family = FeatureFamily::kLookback;
  const auto b = cross_validate(lookback, config);
  ASSERT_EQ(a.fold_map.size(), b.fold_map.size());
  for (std::size_t i = 0; i < a.fold_map.size(); ++i) {
    EXPECT_EQ(a.fold_map[i].example_id, b.fold_map[i].example_id);
    EXPECT_EQ(a.fold_map[i].fold, b.fold_map[i].fold);
  }
  EXPECT_TRUE(std::is_sorted(a.fold_map.begin(), a.fold_map.end(),
                             [](const auto& x, const auto& y) { return x.example_id < y.example_id; }));
  ASSERT_EQ(a.fold_auc.size(), 5u);
  for (double auc : a.fold_auc) {
    EXPECT_GE(auc, 0.0);
    EXPECT_LE(auc, 1.0);
  }
  const double mean = std::accumulate(a.fold_auc.begin(), a.fold_auc.end(), 0.0) / 5.0;
  double var = 0.0;
  for (double auc : a.fold_auc) var += (auc - mean) * (auc - mean);
  EXPECT_NEAR(a.mean_auc, mean, 1e-15);
  EXPECT_NEAR(a.std_auc, std::sqrt(var / 5.0), 1e-15);

  config.family = FeatureFamily::kSink;
  const auto again = cross_validate(sink, config, 3);
  EXPECT_EQ(again.fold_auc, a.fold_auc);
  EXPECT_EQ(again.mean_auc, a.mean_auc);
}

TEST(CrossValidate, PlantedSignalIsDetected) {
  const auto data = generate(small_config(0.2, 5));
  EvalConfig config;
  config.k = 5;
  const auto report =
      cross_validate(batch_features(data.records, FeatureFamily::kSink, 5).matrix, config);
  EXPECT_GE(report.mean_auc, 0.90);
}

TEST(CrossValidate, PermutedLabelsGiveChance) {
  const auto data = generate(small_config(0.2, 9));
  auto m = batch_features(data.records, FeatureFamily::kSink, 5).matrix;
  double total = 0.0;
  for (std::uint64_t rep = 0; rep < 20; ++rep) {
    Rng rng(1000 + rep);
    rng.shuffle(std::span<int>(m.labels));
    EvalConfig config;
    config.k = 5;
    config.seed = rep;
    total += cross_validate(m, config).mean_auc;
  }
  const double mean = total / 20.0;
  EXPECT_GE(mean, 0.40);
  EXPECT_LE(mean, 0.60);
}

TEST(CrossValidate, UnsupervisedScoreUsesNegation) {
  // attnscore lower for positives: self-attention weaker in hallucinated rows
  FeatureMatrix m;
  m.family = FeatureFamily::kAttnScore;
  m.rows = 20;
  m.cols = 1;
  for (std::size_t i = 0; i < 20; ++i) {
    m.labels.push_back(static_cast<int>(i % 2));
    m.values.push_back(i % 2 == 1 ? -2.0 - double(i) : -1.0 + double(i) * 0.01);
    m.example_ids.push_back("x" + std::to_string(i));
  }
  m.columns.resize(1);
  EvalConfig config;
  config.family = FeatureFamily::kAttnScore;
  const auto report = cross_validate(m, config);
  EXPECT_EQ(report.mean_auc, 1.0);
  EXPECT_EQ(report.unconverged_fits, 0u);
}

TEST(Sweep, SharedFoldsAndTieToSmallerK) {
  const auto data = generate(small_config(0.3, 13));
  EvalConfig base;
  const std::vector<std::size_t> grid = {1, 2};
  const auto sweep = sweep_k(data.records, FeatureFamily::kSink, grid, base);
  ASSERT_EQ(sweep.reports.size(), 2u);
  for (std::size_t i = 0; i < sweep.reports[0].fold_map.size(); ++i) {
    EXPECT_EQ(sweep.reports[0].fold_map[i].fold, sweep.reports[1].fold_map[i].fold);
  }
  EXPECT_EQ(sweep.reports[0].config.k, 1u);
  EXPECT_EQ(sweep.reports[1].config.k, 2u);
  double best = -1.0;
  std::size_t best_index = 0;
  for (std::size_t i = 0; i < 2; ++i) {
    if (sweep.reports[i].mean_auc > best) {
      best = sweep.reports[i].mean_auc;
      best_index = i;
    }
  }
  EXPECT_EQ(sweep.best, best_index);

  // identical records score 0.5 at every k: the smallest k wins
  const std::vector<std::size_t> same = {3, 2, 1};
  std::vector<AttentionRecord> flat;
  for (std::size_t i = 0; i < 20; ++i) {
    flat.push_back(test_support::identity_record(1, 2, 6));
    flat.back().label = static_cast<Label>(i % 2);
    flat.back().example_id = "f" + std::to_string(i);
  }
  const auto tie = sweep_k(flat, FeatureFamily::kSink, same, base);
  EXPECT_EQ(tie.reports[0].mean_auc, tie.reports[2].mean_auc);
  EXPECT_EQ(tie.best, 2u);
}

TEST(Sweep, TopOneSignalIsEnough) {
  // token 1 is the only planted sink, so rank 1 carries the signal
  auto c = small_config(0.2, 17);
  c.n_examples = 200;
  const auto data = generate(c);
  EvalConfig base;
  const std::vector<std::size_t> grid = {1, 100};
  const auto sweep = sweep_k(data.records, FeatureFamily::kSink, grid, base);
  EXPECT_GE(sweep.reports[0].mean_auc, sweep.reports[1].mean_auc - 0.02);
}

TEST(Sweep, KBeyondSequenceLength) {
  const auto data = generate(small_config(0.2, 19));
  EvalConfig base;
  const std::vector<std::size_t> grid = {40};
  const auto sweep = sweep_k(data.records, FeatureFamily::kSink, grid, base);
  const double auc = sweep.reports[0].mean_auc;
  EXPECT_TRUE(std::isfinite(auc));
  EXPECT_GE(auc, 0.0);
  EXPECT_LE(auc, 1.0);
}
