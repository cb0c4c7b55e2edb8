#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sinkprobe/features.hpp"
#include "sinkprobe/manifest.hpp"
#include "sinkprobe/probe.hpp"

namespace sinkprobe {

inline constexpr std::size_t kDefaultFolds = 5;

/// Default top-k grid for sweeps.
inline const std::vector<std::size_t> kDefaultKGrid = {1, 2, 3, 4, 5, 10, 25, 50, 100};

/// Stratified fold per example, in input order.
///
/// Ids are sorted lexicographically, each class is shuffled with a generator
/// seeded by `seed`, and the class-0 list followed by the class-1 list is
/// dealt round-robin across folds. The result depends only on (ids, labels,
/// seed), so every feature family evaluated on the same examples shares the
/// same folds.
std::vector<std::size_t> stratified_folds(std::span<const std::string> example_ids,
                                          std::span<const int> labels,
                                          std::size_t n_folds, std::uint64_t seed);

struct EvalConfig {
  FeatureFamily family = FeatureFamily::kSink;
  std::size_t k = 0;
  TrainOptions train;
  std::size_t n_folds = kDefaultFolds;
  std::uint64_t seed = 0;
};

struct FoldAssignment {
  std::string example_id;
  std::size_t fold = 0;
};

struct EvalReport {
  EvalConfig config;
  std::vector<double> fold_auc;
  double mean_auc = 0.0;
  double std_auc = 0.0;  // population standard deviation over folds
  std::vector<FoldAssignment> fold_map;  // sorted by example id
  std::size_t unconverged_fits = 0;
};

/// Fits on n_folds - 1 folds and scores the held-out fold, for every fold.
/// Unsupervised families (attnscore) are scored directly: the held-out AUC
/// uses the negated score, since lower diagonal mass signals hallucination.
EvalReport cross_validate(const FeatureMatrix& features, const EvalConfig& config,
                          unsigned jobs = 1);

struct SweepResult {
  std::vector<EvalReport> reports;  // one per k, in grid order
  std::size_t best = 0;             // highest mean AUC, ties to smaller k
};

/// Cross-validates a top-k family at every k of the grid. Records are read
/// once and scored per k.
SweepResult sweep_k(const Manifest& manifest, FeatureFamily family,
                    std::span<const std::size_t> k_grid, const EvalConfig& base,
                    unsigned jobs = 1);

SweepResult sweep_k(const std::vector<AttentionRecord>& records,
                    FeatureFamily family, std::span<const std::size_t> k_grid,
                    const EvalConfig& base, unsigned jobs = 1);

}  // namespace sinkprobe
