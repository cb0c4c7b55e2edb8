#include "sinkprobe/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "sinkprobe/error.hpp"
#include "sinkprobe/parallel.hpp"
#include "sinkprobe/sink_features.hpp"

namespace sinkprobe {
namespace {

using RankValues = std::vector<std::optional<double>>;

RankValues example_location(const AttentionRecord& r, std::size_t k) {
  if (r.prompt_len == 0) {
    throw_data("record '" + r.example_id + "' has no prompt tokens");
  }
  RankValues out(k);
  if (r.seq_len == 0) return out;
  const std::size_t ranks = std::min(k, r.seq_len);
  std::vector<double> in_prompt(ranks, 0.0);
  std::vector<double> scores(r.seq_len);
  for (std::size_t l = 0; l < r.num_layers; ++l) {
    for (std::size_t h = 0; h < r.num_heads; ++h) {
      head_sink_scores(r, l, h, scores);
      const auto order = descending_order(scores);
      for (std::size_t rank = 0; rank < ranks; ++rank) {
        if (order[rank] < r.prompt_len) in_prompt[rank] += 1.0;
      }
    }
  }
  for (std::size_t rank = 0; rank < ranks; ++rank) {
    out[rank] = in_prompt[rank] / static_cast<double>(r.num_heads_total());
  }
  return out;
}

SinkLocationReport aggregate_location(const std::vector<RankValues>& per_example,
                                      std::size_t k) {
  SinkLocationReport report;
  report.examples = per_example.size();
  report.prompt_frequency.assign(k, std::nullopt);
  for (std::size_t rank = 0; rank < k; ++rank) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& ex : per_example) {
      if (ex[rank]) {
        sum += *ex[rank];
        ++n;
      }
    }
    if (n > 0) report.prompt_frequency[rank] = sum / static_cast<double>(n);
  }
  return report;
}

// Important ranks per (layer, head), 0-based layer and head, 1-based rank.
using NormPlan = std::map<std::pair<std::size_t, std::size_t>, std::vector<std::size_t>>;

NormPlan make_plan(const ImportanceReport& importance) {
  if (importance.important.empty()) {
    throw_invalid("norm diagnostic needs at least one important feature");
  }
  NormPlan plan;
  for (const auto& f : importance.important) {
    if (f.id.rank == 0 || f.id.layer == 0 || f.id.head == 0) {
      throw_invalid("norm diagnostic needs features of a ranked family");
    }
    plan[{f.id.layer - 1, f.id.head - 1}].push_back(f.id.rank);
  }
  return plan;
}

struct ExampleNorms {
  int label = -1;
  std::vector<std::optional<double>> layer_mean;
};

ExampleNorms example_norms(const AttentionRecord& r, const NormPlan& plan,
                           std::size_t num_layers) {
  if (!r.has_output_norms()) {
    throw Error(ErrorKind::kMissingCapability,
                "record '" + r.example_id + "' carries no attention-output norms");
  }
  ExampleNorms out;
  out.label = r.label == Label::kUnknown ? -1 : static_cast<int>(r.label);
  out.layer_mean.assign(num_layers, std::nullopt);
  std::vector<double> sums(num_layers, 0.0);
  std::vector<std::size_t> counts(num_layers, 0);
  std::vector<double> scores(r.seq_len);
  for (const auto& [key, ranks] : plan) {
    const auto [l, h] = key;
    if (l >= r.num_layers || h >= r.num_heads || l >= num_layers) {
      throw_data("record '" + r.example_id + "' is smaller than the probe's feature index");
    }
    head_sink_scores(r, l, h, scores);
    const auto order = descending_order(scores);
    const auto norms = r.norms(l, h);
    for (std::size_t rank : ranks) {
      if (rank > r.seq_len) continue;
      sums[l] += norms[order[rank - 1]];
      ++counts[l];
    }
  }
  for (std::size_t l = 0; l < num_layers; ++l) {
    if (counts[l] > 0) out.layer_mean[l] = sums[l] / static_cast<double>(counts[l]);
  }
  return out;
}

NormDiagnostic aggregate_norms(const std::vector<ExampleNorms>& examples,
                               const ImportanceReport& importance) {
  bool seen[2] = {false, false};
  for (const auto& ex : examples) {
    if (ex.label >= 0) seen[ex.label] = true;
  }
  if (!seen[0] || !seen[1]) throw_invalid("norm diagnostic needs both label classes");

  NormDiagnostic diag;
  for (std::size_t l = 0; l < importance.num_layers; ++l) {
    LayerNormDifference d;
    d.layer = l + 1;
    d.importance = importance.layer_importance[l];
    std::vector<double> group[2];
    for (const auto& ex : examples) {
      if (ex.label >= 0 && ex.layer_mean[l]) group[ex.label].push_back(*ex.layer_mean[l]);
    }
    auto stats = [](const std::vector<double>& v, double& mean, double& se) {
      mean = 0.0;
      se = 0.0;
      if (v.empty()) return;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      if (v.size() < 2) return;
      double sq = 0.0;
      for (double x : v) sq += (x - mean) * (x - mean);
      se = std::sqrt(sq / static_cast<double>(v.size() - 1)) /
           std::sqrt(static_cast<double>(v.size()));
    };
    d.n_non_hallucinated = group[0].size();
    d.n_hallucinated = group[1].size();
    if (!group[0].empty() && !group[1].empty()) {
      d.defined = true;
      stats(group[0], d.mean_non_hallucinated, d.se_non_hallucinated);
      stats(group[1], d.mean_hallucinated, d.se_hallucinated);
      d.difference = d.mean_hallucinated - d.mean_non_hallucinated;
      d.standard_error = std::sqrt(d.se_hallucinated * d.se_hallucinated +
                                   d.se_non_hallucinated * d.se_non_hallucinated);
    }
    diag.layers.push_back(d);
  }
  return diag;
}

}  // namespace

std::size_t depth_bin(std::size_t layer, std::size_t num_layers) {
  // floor((l / L) / 0.05) in integer arithmetic, depth 1 folded into the last bin.
  return std::min(kDepthBins - 1, (layer * kDepthBins) / num_layers);
}

ImportanceReport importance_report(const ProbeModel& model,
                                   std::span<const FeatureColumn> columns) {
  if (model.reg.penalty != Penalty::kL1) {
    throw_invalid("importance analysis requires an L1-trained probe");
  }
  if (columns.size() != model.coefficients.size()) {
    throw_invalid("feature index does not match the model dimension");
  }
  ImportanceReport report;
  report.total_features = columns.size();
  for (const auto& c : columns) {
    report.num_layers = std::max<std::size_t>(report.num_layers, c.layer);
  }
  report.layer_importance.assign(report.num_layers, 0.0);
  for (std::size_t j = 0; j < columns.size(); ++j) {
    const double beta = model.coefficients[j];
    if (columns[j].layer > 0) {
      report.layer_importance[columns[j].layer - 1] += std::abs(beta);
    }
    const double odds = std::exp(beta);
    if (std::abs(odds - 1.0) > kOddsRatioEpsilon) {
      report.important.push_back({j, columns[j], beta, odds});
    }
  }
  report.total_important = report.important.size();

  report.depth_bins.assign(kDepthBins, std::nullopt);
  std::vector<double> sums(kDepthBins, 0.0);
  std::vector<std::size_t> counts(kDepthBins, 0);
  for (std::size_t l = 1; l <= report.num_layers; ++l) {
    const std::size_t b = depth_bin(l, report.num_layers);
    sums[b] += report.layer_importance[l - 1];
    ++counts[b];
  }
  for (std::size_t b = 0; b < kDepthBins; ++b) {
    if (counts[b] > 0) report.depth_bins[b] = sums[b] / static_cast<double>(counts[b]);
  }
  return report;
}

SinkLocationReport sink_location(const std::vector<AttentionRecord>& records,
                                 std::size_t k) {
  if (k == 0) throw_invalid("sink location needs k >= 1");
  std::vector<RankValues> per_example;
  per_example.reserve(records.size());
  for (const auto& r : records) per_example.push_back(example_location(r, k));
  return aggregate_location(per_example, k);
}

SinkLocationReport sink_location(const Manifest& manifest, std::size_t k,
                                 unsigned jobs) {
  if (k == 0) throw_invalid("sink location needs k >= 1");
  std::vector<RankValues> per_example(manifest.size());
  parallel_for(manifest.size(), jobs, [&](std::size_t i) {
    per_example[i] = example_location(manifest.load_record(i), k);
  });
  return aggregate_location(per_example, k);
}

NormDiagnostic norm_diagnostic(const std::vector<AttentionRecord>& records,
                               const ImportanceReport& importance) {
  const NormPlan plan = make_plan(importance);
  std::vector<ExampleNorms> examples;
  examples.reserve(records.size());
  for (const auto& r : records) {
    examples.push_back(example_norms(r, plan, importance.num_layers));
  }
  return aggregate_norms(examples, importance);
}

NormDiagnostic norm_diagnostic(const Manifest& manifest,
                               const ImportanceReport& importance, unsigned jobs) {
  const NormPlan plan = make_plan(importance);
  std::vector<ExampleNorms> examples(manifest.size());
  parallel_for(manifest.size(), jobs, [&](std::size_t i) {
    examples[i] = example_norms(manifest.load_record(i), plan, importance.num_layers);
  });
  return aggregate_norms(examples, importance);
}

}  // namespace sinkprobe
