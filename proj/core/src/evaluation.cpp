#include "sinkprobe/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sinkprobe/baselines.hpp"
#include "sinkprobe/error.hpp"
#include "sinkprobe/metrics.hpp"
#include "sinkprobe/parallel.hpp"
#include "sinkprobe/random.hpp"
#include "sinkprobe/sink_features.hpp"

namespace sinkprobe {
namespace {

// Per-head values of a top-k family, fully sorted in descending order.
struct RankedExample {
  std::string id;
  int label = 0;
  std::size_t num_layers = 0;
  std::size_t num_heads = 0;
  std::size_t seq_len = 0;
  std::vector<double> sorted;
};

RankedExample rank_example(const AttentionRecord& r, FeatureFamily family) {
  RankedExample ex;
  ex.id = r.example_id;
  ex.label = static_cast<int>(r.label);
  ex.num_layers = r.num_layers;
  ex.num_heads = r.num_heads;
  ex.seq_len = r.seq_len;
  ex.sorted.resize(r.num_heads_total() * r.seq_len);
  std::vector<double> values(r.seq_len);
  for (std::size_t l = 0; l < r.num_layers; ++l) {
    for (std::size_t h = 0; h < r.num_heads; ++h) {
      switch (family) {
        case FeatureFamily::kSink:
          head_sink_scores(r, l, h, values);
          break;
        case FeatureFamily::kLapEigval:
          laplacian_diagonal(r, l, h, values);
          break;
        case FeatureFamily::kAttnEigval:
          for (std::size_t i = 0; i < r.seq_len; ++i) values[i] = r.weight(l, h, i, i);
          break;
        default:
          throw_invalid("family '" + std::string(family_name(family)) +
                        "' has no top-k parameter");
      }
      top_k_into(values, std::span<double>(ex.sorted).subspan(
                             (l * r.num_heads + h) * r.seq_len, r.seq_len));
    }
  }
  return ex;
}

FeatureMatrix matrix_at_k(const std::vector<RankedExample>& examples,
                          FeatureFamily family, std::size_t k) {
  FeatureMatrix m;
  m.family = family;
  m.k = k;
  m.rows = examples.size();
  const std::size_t L = examples.front().num_layers;
  const std::size_t H = examples.front().num_heads;
  m.columns = feature_columns(family, L, H, k);
  m.cols = m.columns.size();
  m.values.assign(m.rows * m.cols, 0.0);
  for (std::size_t n = 0; n < examples.size(); ++n) {
    const auto& ex = examples[n];
    auto row = m.row(n);
    const std::size_t take = std::min(k, ex.seq_len);
    for (std::size_t head = 0; head < L * H; ++head) {
      std::copy_n(ex.sorted.begin() + static_cast<std::ptrdiff_t>(head * ex.seq_len), take,
                  row.begin() + static_cast<std::ptrdiff_t>(head * k));
    }
    m.labels.push_back(ex.label);
    m.example_ids.push_back(ex.id);
  }
  return m;
}

SweepResult sweep_ranked(const std::vector<RankedExample>& examples,
                         FeatureFamily family, std::span<const std::size_t> k_grid,
                         const EvalConfig& base, unsigned jobs) {
  if (examples.empty()) throw_invalid("sweep needs labeled examples");
  for (const auto& ex : examples) {
    if (ex.num_layers != examples.front().num_layers ||
        ex.num_heads != examples.front().num_heads) {
      throw_data("record '" + ex.id + "' differs in layer or head count");
    }
  }
  SweepResult result;
  for (std::size_t k : k_grid) {
    if (k == 0) throw_invalid("top-k requires k >= 1");
    EvalConfig config = base;
    config.family = family;
    config.k = k;
    result.reports.push_back(cross_validate(matrix_at_k(examples, family, k), config, jobs));
  }
  for (std::size_t i = 1; i < result.reports.size(); ++i) {
    const auto& best = result.reports[result.best];
    const auto& cand = result.reports[i];
    if (cand.mean_auc > best.mean_auc ||
        (cand.mean_auc == best.mean_auc && cand.config.k < best.config.k)) {
      result.best = i;
    }
  }
  return result;
}

}  // namespace

std::vector<std::size_t> stratified_folds(std::span<const std::string> example_ids,
                                          std::span<const int> labels,
                                          std::size_t n_folds, std::uint64_t seed) {
  if (example_ids.size() != labels.size()) {
    throw_invalid("example ids and labels differ in length");
  }
  if (n_folds < 2) throw_invalid("cross-validation needs at least 2 folds");
  std::vector<std::size_t> order(example_ids.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return example_ids[a] < example_ids[b];
  });
  for (std::size_t i = 1; i < order.size(); ++i) {
    if (example_ids[order[i]] == example_ids[order[i - 1]]) {
      throw_invalid("duplicate example id '" + example_ids[order[i]] + "'");
    }
  }
  std::vector<std::size_t> by_class[2];
  for (std::size_t i : order) {
    if (labels[i] != 0 && labels[i] != 1) throw_invalid("labels must be 0 or 1");
    by_class[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  for (const auto& members : by_class) {
    if (members.size() < n_folds) {
      throw_invalid("each class needs at least " + std::to_string(n_folds) +
                    " examples for stratified cross-validation");
    }
  }
  Rng rng(seed);
  std::vector<std::size_t> folds(example_ids.size());
  std::size_t slot = 0;
  for (auto& members : by_class) {
    rng.shuffle(std::span<std::size_t>(members));
    for (std::size_t i : members) folds[i] = slot++ % n_folds;
  }
  return folds;
}

EvalReport cross_validate(const FeatureMatrix& features, const EvalConfig& config,
                          unsigned jobs) {
  if (features.example_ids.size() != features.rows) {
    throw_invalid("cross-validation needs example ids");
  }
  const auto folds = stratified_folds(features.example_ids, features.labels,
                                      config.n_folds, config.seed);
  EvalReport report;
  report.config = config;
  report.config.family = features.family;
  report.fold_auc.assign(config.n_folds, 0.0);
  std::vector<int> unconverged(config.n_folds, 0);

  parallel_for(config.n_folds, jobs, [&](std::size_t fold) {
    std::vector<std::size_t> train_rows, test_rows;
    for (std::size_t i = 0; i < features.rows; ++i) {
      (folds[i] == fold ? test_rows : train_rows).push_back(i);
    }
    const FeatureMatrix test = features.subset(test_rows);
    std::vector<double> scores;
    if (family_is_unsupervised(features.family)) {
      scores.reserve(test.rows);
      for (std::size_t i = 0; i < test.rows; ++i) scores.push_back(-test.row(i)[0]);
    } else {
      const ProbeModel model = train(features.subset(train_rows), config.train);
      unconverged[fold] = model.converged ? 0 : 1;
      scores = predict_scores(model, test);
    }
    report.fold_auc[fold] = roc_auc(scores, test.labels);
  });

  const auto n = static_cast<double>(config.n_folds);
  double sum = 0.0;
  for (double a : report.fold_auc) sum += a;
  report.mean_auc = sum / n;
  double sq = 0.0;
  for (double a : report.fold_auc) sq += (a - report.mean_auc) * (a - report.mean_auc);
  report.std_auc = std::sqrt(sq / n);
  for (int u : unconverged) report.unconverged_fits += static_cast<std::size_t>(u);

  report.fold_map.reserve(features.rows);
  for (std::size_t i = 0; i < features.rows; ++i) {
    report.fold_map.push_back({features.example_ids[i], folds[i]});
  }
  std::sort(report.fold_map.begin(), report.fold_map.end(),
            [](const FoldAssignment& a, const FoldAssignment& b) {
              return a.example_id < b.example_id;
            });
  return report;
}

SweepResult sweep_k(const Manifest& manifest, FeatureFamily family,
                    std::span<const std::size_t> k_grid, const EvalConfig& base,
                    unsigned jobs) {
  std::vector<std::size_t> labeled;
  for (std::size_t i = 0; i < manifest.size(); ++i) {
    if (manifest.entries()[i].label != Label::kUnknown) labeled.push_back(i);
  }
  std::vector<RankedExample> examples(labeled.size());
  parallel_for(labeled.size(), jobs, [&](std::size_t n) {
    examples[n] = rank_example(manifest.load_record(labeled[n]), family);
  });
  return sweep_ranked(examples, family, k_grid, base, jobs);
}

SweepResult sweep_k(const std::vector<AttentionRecord>& records,
                    FeatureFamily family, std::span<const std::size_t> k_grid,
                    const EvalConfig& base, unsigned jobs) {
  std::vector<std::size_t> labeled;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].label != Label::kUnknown) labeled.push_back(i);
  }
  std::vector<RankedExample> examples(labeled.size());
  parallel_for(labeled.size(), jobs, [&](std::size_t n) {
    examples[n] = rank_example(records[labeled[n]], family);
  });
  return sweep_ranked(examples, family, k_grid, base, jobs);
}

}  // namespace sinkprobe
