#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "sinkprobe/features.hpp"
#include "sinkprobe/manifest.hpp"
#include "sinkprobe/record.hpp"

namespace sinkprobe {

/// Feature vector of any family for one record. `k` is ignored by families
/// without a top-k parameter.
FeatureVector extract_features(const AttentionRecord& record,
                               FeatureFamily family, std::size_t k);

struct ExampleFailure {
  std::string example_id;
  std::string message;
};

struct BatchResult {
  FeatureMatrix matrix;
  std::size_t excluded_unknown = 0;
  // Examples skipped because the family is undefined for them (for instance
  // a record without response tokens for lookback features).
  std::vector<ExampleFailure> skipped;
};

/// Builds a feature matrix over a manifest, one row per labeled example in
/// manifest order. Records must share L and H; T may differ. Unreadable
/// records and shape mismatches throw Error(kData).
BatchResult batch_features(const Manifest& manifest, FeatureFamily family,
                           std::size_t k, unsigned jobs = 1);

/// Same, over records already in memory.
BatchResult batch_features(const std::vector<AttentionRecord>& records,
                           FeatureFamily family, std::size_t k, unsigned jobs = 1);

}  // namespace sinkprobe
