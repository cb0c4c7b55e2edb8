#pragma once

// Interpretability reports: L1 coefficient importance by layer and depth,
// prompt-versus-response location of ranked sinks, and attention-output norm
// differences between hallucinated and non-hallucinated examples.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "sinkprobe/features.hpp"
#include "sinkprobe/manifest.hpp"
#include "sinkprobe/probe.hpp"
#include "sinkprobe/record.hpp"

namespace sinkprobe {

inline constexpr double kOddsRatioEpsilon = 1e-6;
inline constexpr double kDepthBinWidth = 0.05;
inline constexpr std::size_t kDepthBins = 20;

struct ImportantFeature {
  std::size_t column = 0;
  FeatureColumn id;
  double coefficient = 0.0;
  double odds_ratio = 0.0;
};

struct ImportanceReport {
  std::vector<ImportantFeature> important;
  std::size_t total_features = 0;
  std::size_t total_important = 0;
  std::size_t num_layers = 0;
  std::vector<double> layer_importance;  // I_l, index l-1
  // Mean I_l over layers whose relative depth l/L falls in
  // [b * 0.05, (b + 1) * 0.05); the last bin also holds depth 1.
  std::vector<std::optional<double>> depth_bins;

  double percent_important() const {
    return total_features == 0
               ? 0.0
               : 100.0 * static_cast<double>(total_important) /
                     static_cast<double>(total_features);
  }
};

/// Depth bin of 1-based layer l among L layers.
std::size_t depth_bin(std::size_t layer, std::size_t num_layers);

/// Importance of an L1-trained probe: features with |exp(beta) - 1| > 1e-6,
/// I_l = sum of |beta| over the layer's columns, and the depth-binned curve.
/// Throws Error(kInvalidArgument) if the model was not trained with L1.
ImportanceReport importance_report(const ProbeModel& model,
                                   std::span<const FeatureColumn> columns);

struct SinkLocationReport {
  // Per 0-based rank: mean over examples of the per-example mean over heads
  // of [rank-r sink token lies in the prompt]. Empty when no example has
  // that many tokens.
  std::vector<std::optional<double>> prompt_frequency;
  std::size_t examples = 0;
};

/// Token holding the rank-r sink score of a head: descending score, ties
/// toward the lower index.
SinkLocationReport sink_location(const std::vector<AttentionRecord>& records,
                                 std::size_t k);
SinkLocationReport sink_location(const Manifest& manifest, std::size_t k,
                                 unsigned jobs = 1);

struct LayerNormDifference {
  std::size_t layer = 0;  // 1-based
  bool defined = false;   // false when the layer has no important feature
  double mean_hallucinated = 0.0;
  double mean_non_hallucinated = 0.0;
  double difference = 0.0;  // hallucinated minus non-hallucinated
  double se_hallucinated = 0.0;
  double se_non_hallucinated = 0.0;
  double standard_error = 0.0;  // of the difference
  std::size_t n_hallucinated = 0;
  std::size_t n_non_hallucinated = 0;
  double importance = 0.0;  // I_l from the importance report
};

struct NormDiagnostic {
  std::vector<LayerNormDifference> layers;
};

/// For each layer, averages output norms at the token positions holding the
/// ranks selected by important features of that layer's heads, per example,
/// and compares the two label groups. Requires output norms on every
/// record (Error kMissingCapability otherwise) and a non-empty importance
/// set of a ranked family.
NormDiagnostic norm_diagnostic(const std::vector<AttentionRecord>& records,
                               const ImportanceReport& importance);
NormDiagnostic norm_diagnostic(const Manifest& manifest,
                               const ImportanceReport& importance, unsigned jobs = 1);

}  // namespace sinkprobe
