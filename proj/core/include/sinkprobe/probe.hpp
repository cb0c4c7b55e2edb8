#pragma once

// Logistic-regression hallucination probe.
//
// Features are z-scored with training statistics, then the probe minimizes
//
//   sum_n w_{y_n} * (softplus(m_n) - y_n * m_n) + penalty(beta),
//   m_n = beta . x_n + b,
//
// with penalty (1/(2C)) ||beta||_2^2 or (1/C) ||beta||_1. The intercept is
// never penalized. L2 fits use L-BFGS; L1 fits use proximal Newton steps
// with soft thresholding, so unused coefficients are exactly zero.

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "sinkprobe/features.hpp"

namespace sinkprobe {

enum class Penalty { kL1, kL2 };
enum class ClassWeighting { kBalanced, kUniform };

struct Regularization {
  Penalty penalty = Penalty::kL2;
  double C = 1.0;
};

inline constexpr double kDefaultL1C = 0.75;
inline constexpr double kDefaultL2C = 1.0;

struct TrainOptions {
  Regularization reg;
  ClassWeighting weighting = ClassWeighting::kBalanced;
  std::size_t max_iterations = 1000;
  double tolerance = 1e-6;  // infinity norm of the optimality residual
};

/// Per-feature z-score statistics. Constant features get scale 1.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;
  std::vector<bool> constant;

  static Standardizer fit(const FeatureMatrix& features);
  void apply(std::span<const double> row, std::span<double> out) const;
};

struct ProbeModel {
  FeatureFamily family = FeatureFamily::kSink;
  std::size_t k = 0;
  Regularization reg;
  Standardizer standardizer;
  std::vector<double> coefficients;
  double intercept = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
};

/// w_c = n / (2 n_c) for c in {0, 1}.
std::array<double, 2> balanced_class_weights(std::span<const int> labels);

/// Dense row-major design with per-row labels and sample weights.
struct Design {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> x;
  std::vector<int> y;
  std::vector<double> weight;
};

/// Smooth part of the objective: weighted negative log-likelihood plus an
/// optional ridge term (ridge/2) ||beta||^2. Parameters are packed as
/// [beta_0 .. beta_{d-1}, intercept].
class LogisticObjective {
 public:
  LogisticObjective(const Design& design, double ridge);

  double evaluate(std::span<const double> params, std::span<double> gradient) const;
  double value(std::span<const double> params) const;
  std::size_t num_params() const { return design_.cols + 1; }

 private:
  const Design& design_;
  double ridge_;
};

struct FitResult {
  std::vector<double> coefficients;
  double intercept = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
};

/// Minimizes the regularized objective on an already-prepared design.
FitResult fit_logistic(const Design& design, const Regularization& reg,
                       std::size_t max_iterations, double tolerance);

/// Standardizes, weights and fits. Throws Error(kInvalidArgument) for
/// single-class input, non-finite features or non-positive C.
ProbeModel train(const FeatureMatrix& features, const TrainOptions& options);

/// sigma(beta . standardize(x) + b) for every row.
std::vector<double> predict_scores(const ProbeModel& model,
                                   const FeatureMatrix& features);
double predict_score(const ProbeModel& model, std::span<const double> row);

}  // namespace sinkprobe
