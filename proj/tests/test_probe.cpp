#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "sinkprobe/metrics.hpp"
#include "sinkprobe/probe.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace sinkprobe;
using test_support::error_kind;

namespace {

FeatureMatrix matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                     std::vector<int> labels) {
  FeatureMatrix m;
  m.rows = rows;
  m.cols = cols;
  m.values = std::move(values);
  m.labels = std::move(labels);
  for (std::size_t i = 0; i < rows; ++i) m.example_ids.push_back("e" + std::to_string(i));
  m.columns.resize(cols);
  return m;
}

// Gaussian classes separated along the first `informative` columns.
FeatureMatrix gaussian_problem(std::mt19937_64& gen, std::size_t rows, std::size_t cols,
                               std::size_t informative, double shift) {
  std::normal_distribution<double> normal;
  std::vector<double> x(rows * cols);
  std::vector<int> y(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    y[i] = i % 3 == 0 ? 1 : 0;
    for (std::size_t j = 0; j < cols; ++j) {
      x[i * cols + j] = normal(gen) + (j < informative && y[i] == 1 ? shift : 0.0);
    }
  }
  return matrix(rows, cols, std::move(x), std::move(y));
}

Design random_design(std::mt19937_64& gen, std::size_t rows, std::size_t cols) {
  std::normal_distribution<double> normal;
  Design d;
  d.rows = rows;
  d.cols = cols;
  for (std::size_t i = 0; i < rows * cols; ++i) d.x.push_back(normal(gen));
  for (std::size_t i = 0; i < rows; ++i) {
    d.y.push_back(static_cast<int>(gen() % 2));
    d.weight.push_back(0.5 + static_cast<double>(gen() % 4) * 0.5);
  }
  return d;
}

std::size_t nonzeros(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::count_if(v.begin(), v.end(), [](double b) { return b != 0.0; }));
}

}  // namespace

TEST(RocAuc, Examples) {
  const std::vector<int> y = {1, 1, 0, 0};
  EXPECT_EQ(roc_auc(std::vector<double>{0.9, 0.8, 0.2, 0.1}, y), 1.0);
  EXPECT_EQ(roc_auc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, y), 0.0);
  EXPECT_EQ(roc_auc(std::vector<double>{0.5, 0.5}, std::vector<int>{1, 0}), 0.5);
}

TEST(RocAuc, MatchesPairwiseCountExactly) {
  std::mt19937_64 gen(97);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + gen() % 49;
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = static_cast<double>(gen() % 7) / 7.0;  // coarse grid forces ties
      y[i] = static_cast<int>(gen() % 2);
    }
    y[0] = 0;
    y[1] = 1;
    ASSERT_EQ(roc_auc(s, y), oracles::pairwise_auc(s, y));
  }
}

TEST(RocAuc, InvariantUnderIncreasingTransform) {
  std::mt19937_64 gen(101);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> s(30), t(30);
    std::vector<int> y(30);
    for (std::size_t i = 0; i < 30; ++i) {
      s[i] = std::round(normal(gen) * 4.0) / 4.0;
      t[i] = std::exp(3.0 * s[i]) + 7.0;
      y[i] = static_cast<int>(i % 2);
    }
    ASSERT_EQ(roc_auc(s, y), roc_auc(t, y));
  }
}

TEST(RocAuc, SingleClassRejected) {
  EXPECT_EQ(error_kind([] { roc_auc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}); }),
            ErrorKind::kInvalidArgument);
}

TEST(Probe, BalancedWeights) {
  std::vector<int> y(10, 0);
  y[3] = y[7] = 1;
  const auto w = balanced_class_weights(y);
  EXPECT_EQ(w[1], 2.5);
  EXPECT_EQ(w[0], 0.625);
}

TEST(Probe, GradientMatchesCentralDifferences) {
  std::mt19937_64 gen(103);
  std::normal_distribution<double> normal;
  for (double ridge : {0.0, 1.0 / 0.75}) {
    for (int point = 0; point < 10; ++point) {
      const Design d = random_design(gen, 30, 6);
      const LogisticObjective f(d, ridge);
      std::vector<double> p(f.num_params());
      for (auto& v : p) v = normal(gen);
      std::vector<double> g(p.size());
      f.evaluate(p, g);
      double max_err = 0.0;
      double max_g = 0.0;
      for (std::size_t j = 0; j < p.size(); ++j) {
        auto plus = p;
        auto minus = p;
        plus[j] += 1e-5;
        minus[j] -= 1e-5;
        const double fd = (f.value(plus) - f.value(minus)) / 2e-5;
        max_err = std::max(max_err, std::abs(fd - g[j]));
        max_g = std::max(max_g, std::abs(g[j]));
      }
      ASSERT_LE(max_err / max_g, 1e-4) << "ridge " << ridge << " point " << point;
    }
  }
}

TEST(Probe, ObjectiveValueAtZero) {
  Design d;
  d.rows = 2;
  d.cols = 1;
  d.x = {1.0, -1.0};
  d.y = {1, 0};
  d.weight = {2.0, 1.0};
  const LogisticObjective f(d, 3.0);
  EXPECT_NEAR(f.value(std::vector<double>{0.0, 0.0}), 3.0 * std::log(2.0), 1e-12);
  EXPECT_NEAR(f.value(std::vector<double>{1.0, 0.0}),
              2.0 * std::log1p(std::exp(-1.0)) + std::log1p(std::exp(-1.0)) + 1.5, 1e-12);
}

TEST(Probe, SeparableToyReachesPerfectTrainingAuc) {
  const auto m = matrix(6, 2, {0, 0, 1, 0, 0, 1, 3, 3, 4, 3, 3, 4}, {0, 0, 0, 1, 1, 1});
  TrainOptions options;
  options.reg = {Penalty::kL2, 1.0};
  const auto model = train(m, options);
  EXPECT_TRUE(model.converged);
  EXPECT_EQ(roc_auc(predict_scores(model, m), m.labels), 1.0);
}

TEST(Probe, SingleClassAndBadInputRejected) {
  auto m = matrix(3, 1, {1, 2, 3}, {1, 1, 1});
  EXPECT_EQ(error_kind([&] { train(m, {}); }), ErrorKind::kInvalidArgument);
  m.labels = {0, 1, 0};
  m.values[1] = NAN;
  EXPECT_EQ(error_kind([&] { train(m, {}); }), ErrorKind::kInvalidArgument);
  m.values[1] = 2.0;
  TrainOptions options;
  options.reg.C = 0.0;
  EXPECT_EQ(error_kind([&] { train(m, options); }), ErrorKind::kInvalidArgument);
}

TEST(Probe, NullModelScoresOneHalf) {
  ProbeModel model;
  model.standardizer.mean = {0.0, 0.0};
  model.standardizer.scale = {1.0, 1.0};
  model.standardizer.constant = {false, false};
  model.coefficients = {0.0, 0.0};
  const auto m = matrix(3, 2, {1, 2, -5, 7, 100, -100}, {0, 1, 0});
  EXPECT_EQ(predict_scores(model, m), std::vector<double>(3, 0.5));
}

TEST(Probe, ScoreIsMonotoneInMargin) {
  ProbeModel model;
  model.standardizer.mean = {0.0};
  model.standardizer.scale = {1.0};
  model.standardizer.constant = {false};
  model.coefficients = {1.0};
  double previous = 0.0;
  for (double x = -40.0; x <= 40.0; x += 0.5) {
    const double s = predict_score(model, std::vector<double>{x});
    ASSERT_GE(s, previous);
    ASSERT_GT(s, 0.0);
    ASSERT_LE(s, 1.0);
    previous = s;
  }
  EXPECT_NEAR(previous, 1.0, 1e-15);
}

TEST(Probe, DimensionMismatchRejected) {
  std::mt19937_64 gen(107);
  const auto m = gaussian_problem(gen, 30, 3, 1, 2.0);
  const auto model = train(m, {});
  const auto other = gaussian_problem(gen, 30, 4, 1, 2.0);
  EXPECT_EQ(error_kind([&] { predict_scores(model, other); }), ErrorKind::kInvalidArgument);
}

TEST(Probe, StandardizerUsesPopulationStatistics) {
  const auto m = matrix(4, 2, {1, 5, 2, 5, 3, 5, 4, 5}, {0, 1, 0, 1});
  const auto s = Standardizer::fit(m);
  EXPECT_EQ(s.mean[0], 2.5);
  EXPECT_NEAR(s.scale[0], std::sqrt(1.25), 1e-15);
  EXPECT_FALSE(s.constant[0]);
  EXPECT_TRUE(s.constant[1]);
  EXPECT_EQ(s.scale[1], 1.0);
}

TEST(Probe, ConstantFeaturesGetZeroCoefficient) {
  std::mt19937_64 gen(109);
  auto m = gaussian_problem(gen, 60, 3, 1, 2.0);
  for (std::size_t i = 0; i < m.rows; ++i) m.row(i)[2] = 4.25;
  for (auto penalty : {Penalty::kL1, Penalty::kL2}) {
    TrainOptions options;
    options.reg = {penalty, 1.0};
    const auto model = train(m, options);
    EXPECT_EQ(model.coefficients[2], 0.0);
    EXPECT_TRUE(model.standardizer.constant[2]);
  }
}

TEST(Probe, InvariantUnderPositiveAffineRescaling) {
  std::mt19937_64 gen(113);
  const auto m = gaussian_problem(gen, 80, 4, 2, 1.0);
  auto scaled = m;
  for (std::size_t i = 0; i < m.rows; ++i) {
    for (std::size_t j = 0; j < m.cols; ++j) scaled.row(i)[j] = 1000.0 * m.row(i)[j] - 3.0 * double(j);
  }
  for (auto penalty : {Penalty::kL1, Penalty::kL2}) {
    TrainOptions options;
    options.reg = {penalty, 0.5};
    const auto a = train(m, options);
    const auto b = train(scaled, options);
    for (std::size_t j = 0; j < m.cols; ++j) EXPECT_NEAR(a.coefficients[j], b.coefficients[j], 1e-5);
    const auto pa = predict_scores(a, m);
    const auto pb = predict_scores(b, scaled);
    for (std::size_t i = 0; i < m.rows; ++i) EXPECT_NEAR(pa[i], pb[i], 1e-6);
  }
}

TEST(Probe, FitsConvergeToStationaryPoints) {
  std::mt19937_64 gen(127);
  const auto m = gaussian_problem(gen, 200, 10, 3, 1.0);
  for (auto penalty : {Penalty::kL1, Penalty::kL2}) {
    TrainOptions options;
    options.reg = {penalty, 0.75};
    const auto model = train(m, options);
    EXPECT_TRUE(model.converged);
    EXPECT_LT(model.iterations, 1000u);
  }
}

TEST(Probe, L1SparsityMonotoneInC) {
  std::mt19937_64 gen(131);
  const auto m = gaussian_problem(gen, 150, 20, 4, 0.8);
  std::size_t previous = m.cols + 1;
  for (double C : {10.0, 3.0, 1.0, 0.3, 0.1, 0.03, 0.01, 0.003}) {
    TrainOptions options;
    options.reg = {Penalty::kL1, C};
    const auto model = train(m, options);
    const std::size_t nz = nonzeros(model.coefficients);
    EXPECT_LE(nz, previous) << "C = " << C;
    previous = nz;
  }
  EXPECT_EQ(previous, 0u);
}

// Balanced weights on the original rows versus uniform weights on a set where
// each minority row appears twice. With n0 = 2 n1 the balanced weights are
// (0.75, 1.5), i.e. 0.75 times the duplicated objective's (1, 2) counts, so
// the two optima agree when C is scaled by the same 0.75.
TEST(Probe, BalancedWeightsMatchMinorityDuplication) {
  std::mt19937_64 gen(137);
  std::normal_distribution<double> normal;
  const std::size_t n0 = 40;
  const std::size_t n1 = 20;
  const std::size_t d = 3;
  Design balanced;
  balanced.rows = n0 + n1;
  balanced.cols = d;
  for (std::size_t i = 0; i < n0 + n1; ++i) {
    const int y = i < n0 ? 0 : 1;
    for (std::size_t j = 0; j < d; ++j) balanced.x.push_back(normal(gen) + (y == 1 && j == 0 ? 1.0 : 0.0));
    balanced.y.push_back(y);
  }
  const auto w = balanced_class_weights(balanced.y);
  ASSERT_EQ(w[0], 0.75);
  ASSERT_EQ(w[1], 1.5);
  for (int y : balanced.y) balanced.weight.push_back(w[static_cast<std::size_t>(y)]);

  Design duplicated = balanced;
  duplicated.weight.assign(duplicated.rows, 1.0);
  for (std::size_t i = n0; i < n0 + n1; ++i) {
    for (std::size_t j = 0; j < d; ++j) duplicated.x.push_back(balanced.x[i * d + j]);
    duplicated.y.push_back(1);
    duplicated.weight.push_back(1.0);
    ++duplicated.rows;
  }

  for (auto penalty : {Penalty::kL1, Penalty::kL2}) {
    const auto a = fit_logistic(balanced, {penalty, 0.5}, 1000, 1e-8);
    const auto b = fit_logistic(duplicated, {penalty, 0.5 * 0.75}, 1000, 1e-8);
    ASSERT_TRUE(a.converged);
    ASSERT_TRUE(b.converged);
    for (std::size_t j = 0; j < d; ++j) EXPECT_NEAR(a.coefficients[j], b.coefficients[j], 1e-4);
    EXPECT_NEAR(a.intercept, b.intercept, 1e-4);
  }
}

TEST(Probe, TrainingIsDeterministic) {
  std::mt19937_64 gen(139);
  const auto m = gaussian_problem(gen, 100, 8, 2, 1.0);
  TrainOptions options;
  options.reg = {Penalty::kL1, 0.75};
  const auto a = train(m, options);
  const auto b = train(m, options);
  EXPECT_EQ(a.coefficients, b.coefficients);
  EXPECT_EQ(a.intercept, b.intercept);
}
