#include "sinkprobe/probe.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "sinkprobe/error.hpp"

namespace sinkprobe {
namespace {

double softplus(double m) {
  return m > 0.0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m));
}

double sigmoid(double m) {
  if (m >= 0.0) return 1.0 / (1.0 + std::exp(-m));
  const double e = std::exp(m);
  return e / (1.0 + e);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double inf_norm(std::span<const double> a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

constexpr double kArmijo = 1e-4;
constexpr double kNoise = 1e-13;

FitResult unpack(const std::vector<double>& params, bool converged,
                 std::size_t iterations) {
  FitResult r;
  r.coefficients.assign(params.begin(), params.end() - 1);
  r.intercept = params.back();
  r.converged = converged;
  r.iterations = iterations;
  return r;
}

FitResult fit_lbfgs(const LogisticObjective& objective, std::size_t max_iterations,
                    double tolerance) {
  constexpr std::size_t kMemory = 10;
  const std::size_t p = objective.num_params();

  std::vector<double> x(p, 0.0), g(p), x_next(p), g_next(p), dir(p), alpha(kMemory);
  std::deque<std::vector<double>> s_hist, y_hist;
  std::deque<double> rho_hist;
  double f = objective.evaluate(x, g);

  std::size_t iter = 0;
  bool converged = inf_norm(g) <= tolerance;
  while (!converged && iter < max_iterations) {
    ++iter;
    // Two-loop recursion for dir = -H g.
    for (std::size_t i = 0; i < p; ++i) dir[i] = -g[i];
    for (std::size_t j = s_hist.size(); j-- > 0;) {
      alpha[j] = rho_hist[j] * dot(s_hist[j], dir);
      for (std::size_t i = 0; i < p; ++i) dir[i] -= alpha[j] * y_hist[j][i];
    }
    if (!s_hist.empty()) {
      const auto& s = s_hist.back();
      const auto& y = y_hist.back();
      const double gamma = dot(s, y) / dot(y, y);
      for (double& d : dir) d *= gamma;
    }
    for (std::size_t j = 0; j < s_hist.size(); ++j) {
      const double beta = rho_hist[j] * dot(y_hist[j], dir);
      for (std::size_t i = 0; i < p; ++i) dir[i] += s_hist[j][i] * (alpha[j] - beta);
    }
    double slope = dot(g, dir);
    if (!(slope < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      for (std::size_t i = 0; i < p; ++i) dir[i] = -g[i];
      slope = -dot(g, g);
    }

    double step = s_hist.empty() ? std::min(1.0, 1.0 / inf_norm(g)) : 1.0;
    double f_next = 0.0;
    bool accepted = false;
    for (int attempt = 0; attempt < 60; ++attempt) {
      for (std::size_t i = 0; i < p; ++i) x_next[i] = x[i] + step * dir[i];
      f_next = objective.evaluate(x_next, g_next);
      // Near the optimum the predicted decrease drops below the rounding
      // error of f, so allow a few ulps of slack.
      if (f_next <= f + kArmijo * step * slope + kNoise * std::abs(f)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;

    std::vector<double> s(p), y(p);
    for (std::size_t i = 0; i < p; ++i) {
      s[i] = x_next[i] - x[i];
      y[i] = g_next[i] - g[i];
    }
    const double sy = dot(s, y);
    if (sy > 1e-12 * dot(y, y)) {
      if (s_hist.size() == kMemory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
    }
    x.swap(x_next);
    g.swap(g_next);
    f = f_next;
    converged = inf_norm(g) <= tolerance;
  }
  return unpack(x, converged, iter);
}

double l1_residual(std::span<const double> params, std::span<const double> grad,
                   double lambda) {
  const std::size_t d = params.size() - 1;
  double worst = std::abs(grad[d]);
  for (std::size_t j = 0; j < d; ++j) {
    const double r = params[j] == 0.0
                         ? std::max(0.0, std::abs(grad[j]) - lambda)
                         : std::abs(grad[j] + std::copysign(lambda, params[j]));
    worst = std::max(worst, r);
  }
  return worst;
}

double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

// Weighted loss and residuals r_n = w_n (sigma(m_n) - y_n) from margins.
double loss_from_margins(const Design& d, std::span<const double> margin,
                         std::span<double> residual) {
  double f = 0.0;
  for (std::size_t n = 0; n < d.rows; ++n) {
    const double y = d.y[n];
    f += d.weight[n] * (softplus(margin[n]) - y * margin[n]);
    if (!residual.empty()) residual[n] = d.weight[n] * (sigmoid(margin[n]) - y);
  }
  return f;
}

// Proximal Newton for the L1 problem: each outer step minimizes the
// second-order model of the loss plus the L1 term by cyclic coordinate
// descent with soft thresholding, then backtracks on the true objective.
// The inner solve is tightened as the outer residual shrinks.
FitResult fit_l1_newton(const Design& design, double lambda,
                        std::size_t max_iterations, double tolerance) {
  constexpr double kSufficient = 0.01;
  constexpr double kDamping = 1e-12;
  constexpr std::size_t kMaxSweeps = 200;
  const std::size_t n = design.rows;
  const std::size_t d = design.cols;
  const std::size_t p = d + 1;

  // Column-major copy for coordinate access.
  std::vector<double> xt(n * d);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) xt[j * n + i] = design.x[i * d + j];
  }
  auto column = [&](std::size_t j) { return xt.data() + j * n; };

  std::vector<double> params(p, 0.0), grad(p), margin(n, 0.0), residual(n), curvature(n);
  std::vector<double> step(p), x_step(n), trial(n), hdiag(p);
  double f = loss_from_margins(design, margin, residual);
  auto l1 = [&](std::span<const double> beta) {
    double s = 0.0;
    for (std::size_t j = 0; j < d; ++j) s += std::abs(beta[j]);
    return s;
  };

  std::size_t iter = 0;
  bool converged = false;
  while (true) {
    for (std::size_t j = 0; j < d; ++j) {
      const double* col = column(j);
      double g = 0.0;
      for (std::size_t i = 0; i < n; ++i) g += residual[i] * col[i];
      grad[j] = g;
    }
    grad[d] = 0.0;
    for (double r : residual) grad[d] += r;
    const double outer = l1_residual(params, grad, lambda);
    if (outer <= tolerance) {
      converged = true;
      break;
    }
    if (iter == max_iterations) break;
    ++iter;

    for (std::size_t i = 0; i < n; ++i) {
      const double s = sigmoid(margin[i]);
      curvature[i] = design.weight[i] * s * (1.0 - s);
    }
    for (std::size_t j = 0; j < d; ++j) {
      const double* col = column(j);
      double h = kDamping;
      for (std::size_t i = 0; i < n; ++i) h += curvature[i] * col[i] * col[i];
      hdiag[j] = h;
    }
    hdiag[d] = kDamping;
    for (double c : curvature) hdiag[d] += c;

    std::fill(step.begin(), step.end(), 0.0);
    std::fill(x_step.begin(), x_step.end(), 0.0);
    const double inner_tol = 0.1 * outer;
    for (std::size_t sweep = 0; sweep < kMaxSweeps; ++sweep) {
      double worst = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double* col = column(j);
        double g = grad[j] + kDamping * step[j];
        for (std::size_t i = 0; i < n; ++i) g += curvature[i] * x_step[i] * col[i];
        const double z = params[j] + step[j];
        const double r = z == 0.0 ? std::max(0.0, std::abs(g) - lambda)
                                  : std::abs(g + std::copysign(lambda, z));
        worst = std::max(worst, r);
        const double delta = soft_threshold(z - g / hdiag[j], lambda / hdiag[j]) - z;
        if (delta != 0.0) {
          step[j] += delta;
          for (std::size_t i = 0; i < n; ++i) x_step[i] += delta * col[i];
        }
      }
      double g = grad[d] + kDamping * step[d];
      for (std::size_t i = 0; i < n; ++i) g += curvature[i] * x_step[i];
      worst = std::max(worst, std::abs(g));
      const double delta = -g / hdiag[d];
      step[d] += delta;
      for (std::size_t i = 0; i < n; ++i) x_step[i] += delta;
      if (worst <= inner_tol) break;
    }

    std::vector<double> next(p);
    for (std::size_t j = 0; j < p; ++j) next[j] = params[j] + step[j];
    const double base = f + lambda * l1(params);
    double decrease = lambda * (l1(next) - l1(params));
    for (std::size_t j = 0; j < p; ++j) decrease += grad[j] * step[j];

    double alpha = 1.0;
    bool accepted = false;
    double f_trial = 0.0;
    for (int attempt = 0; attempt < 60; ++attempt) {
      for (std::size_t j = 0; j < p; ++j) next[j] = params[j] + alpha * step[j];
      for (std::size_t i = 0; i < n; ++i) trial[i] = margin[i] + alpha * x_step[i];
      f_trial = loss_from_margins(design, trial, {});
      if (f_trial + lambda * l1(next) <=
          base + kSufficient * alpha * decrease + kNoise * std::abs(base)) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) break;
    params.swap(next);
    margin.swap(trial);
    f = loss_from_margins(design, margin, residual);
  }
  return unpack(params, converged, iter);
}

}  // namespace

std::array<double, 2> balanced_class_weights(std::span<const int> labels) {
  std::array<std::size_t, 2> counts{0, 0};
  for (int y : labels) ++counts.at(static_cast<std::size_t>(y));
  if (counts[0] == 0 || counts[1] == 0) {
    throw_invalid("balanced weights need both classes");
  }
  const auto n = static_cast<double>(labels.size());
  return {n / (2.0 * static_cast<double>(counts[0])),
          n / (2.0 * static_cast<double>(counts[1]))};
}

Standardizer Standardizer::fit(const FeatureMatrix& m) {
  Standardizer s;
  s.mean.assign(m.cols, 0.0);
  s.scale.assign(m.cols, 1.0);
  s.constant.assign(m.cols, false);
  const auto n = static_cast<double>(m.rows);
  for (std::size_t i = 0; i < m.rows; ++i) {
    const auto r = m.row(i);
    for (std::size_t j = 0; j < m.cols; ++j) s.mean[j] += r[j];
  }
  for (double& mu : s.mean) mu /= n;
  std::vector<double> var(m.cols, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i) {
    const auto r = m.row(i);
    for (std::size_t j = 0; j < m.cols; ++j) {
      const double c = r[j] - s.mean[j];
      var[j] += c * c;
    }
  }
  for (std::size_t j = 0; j < m.cols; ++j) {
    const double sd = std::sqrt(var[j] / n);
    if (sd > 1e-12 * std::max(1.0, std::abs(s.mean[j]))) {
      s.scale[j] = sd;
    } else {
      s.constant[j] = true;
    }
  }
  return s;
}

void Standardizer::apply(std::span<const double> row, std::span<double> out) const {
  for (std::size_t j = 0; j < row.size(); ++j) {
    out[j] = constant[j] ? 0.0 : (row[j] - mean[j]) / scale[j];
  }
}

LogisticObjective::LogisticObjective(const Design& design, double ridge)
    : design_(design), ridge_(ridge) {}

double LogisticObjective::evaluate(std::span<const double> params,
                                   std::span<double> gradient) const {
  const std::size_t d = design_.cols;
  std::fill(gradient.begin(), gradient.end(), 0.0);
  double f = 0.0;
  for (std::size_t n = 0; n < design_.rows; ++n) {
    const double* row = design_.x.data() + n * d;
    double m = params[d];
    for (std::size_t j = 0; j < d; ++j) m += params[j] * row[j];
    const double y = design_.y[n];
    const double w = design_.weight[n];
    f += w * (softplus(m) - y * m);
    const double r = w * (sigmoid(m) - y);
    for (std::size_t j = 0; j < d; ++j) gradient[j] += r * row[j];
    gradient[d] += r;
  }
  if (ridge_ > 0.0) {
    for (std::size_t j = 0; j < d; ++j) {
      f += 0.5 * ridge_ * params[j] * params[j];
      gradient[j] += ridge_ * params[j];
    }
  }
  return f;
}

double LogisticObjective::value(std::span<const double> params) const {
  std::vector<double> scratch(num_params());
  return evaluate(params, scratch);
}

FitResult fit_logistic(const Design& design, const Regularization& reg,
                       std::size_t max_iterations, double tolerance) {
  if (!(reg.C > 0.0) || !std::isfinite(reg.C)) {
    throw_invalid("regularization strength C must be positive and finite");
  }
  if (reg.penalty == Penalty::kL2) {
    return fit_lbfgs(LogisticObjective(design, 1.0 / reg.C), max_iterations, tolerance);
  }
  return fit_l1_newton(design, 1.0 / reg.C, max_iterations, tolerance);
}

ProbeModel train(const FeatureMatrix& features, const TrainOptions& options) {
  std::array<std::size_t, 2> counts{0, 0};
  for (int y : features.labels) {
    if (y != 0 && y != 1) throw_invalid("labels must be 0 or 1");
    ++counts[static_cast<std::size_t>(y)];
  }
  if (counts[0] < 2 || counts[1] < 2) {
    throw_invalid("training needs at least two examples of each class");
  }
  for (double v : features.values) {
    if (!std::isfinite(v)) throw_invalid("non-finite feature value");
  }

  ProbeModel model;
  model.family = features.family;
  model.k = features.k;
  model.reg = options.reg;
  model.standardizer = Standardizer::fit(features);

  Design design;
  design.rows = features.rows;
  design.cols = features.cols;
  design.x.resize(features.rows * features.cols);
  design.y = features.labels;
  design.weight.resize(features.rows);
  const auto class_weight = options.weighting == ClassWeighting::kBalanced
                                ? balanced_class_weights(features.labels)
                                : std::array<double, 2>{1.0, 1.0};
  for (std::size_t i = 0; i < features.rows; ++i) {
    model.standardizer.apply(features.row(i),
                             std::span<double>(design.x).subspan(i * design.cols, design.cols));
    design.weight[i] = class_weight[static_cast<std::size_t>(design.y[i])];
  }

  FitResult fit = fit_logistic(design, options.reg, options.max_iterations,
                               options.tolerance);
  for (std::size_t j = 0; j < fit.coefficients.size(); ++j) {
    if (model.standardizer.constant[j]) fit.coefficients[j] = 0.0;
  }
  model.coefficients = std::move(fit.coefficients);
  model.intercept = fit.intercept;
  model.converged = fit.converged;
  model.iterations = fit.iterations;
  return model;
}

double predict_score(const ProbeModel& model, std::span<const double> row) {
  if (row.size() != model.coefficients.size()) {
    throw_invalid("feature dimension " + std::to_string(row.size()) +
                  " does not match model dimension " +
                  std::to_string(model.coefficients.size()));
  }
  double m = model.intercept;
  for (std::size_t j = 0; j < row.size(); ++j) {
    m += model.coefficients[j] *
         ((row[j] - model.standardizer.mean[j]) / model.standardizer.scale[j]);
  }
  return sigmoid(m);
}

std::vector<double> predict_scores(const ProbeModel& model,
                                   const FeatureMatrix& features) {
  if (features.cols != model.coefficients.size()) {
    throw_invalid("feature dimension " + std::to_string(features.cols) +
                  " does not match model dimension " +
                  std::to_string(model.coefficients.size()));
  }
  std::vector<double> scores(features.rows);
  for (std::size_t i = 0; i < features.rows; ++i) {
    scores[i] = predict_score(model, features.row(i));
  }
  return scores;
}

}  // namespace sinkprobe
