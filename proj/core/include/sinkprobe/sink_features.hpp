#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "sinkprobe/features.hpp"
#include "sinkprobe/record.hpp"

namespace sinkprobe {

/// Per-head sink scores, L x H x T.
struct SinkScoreTensor {
  std::string example_id;
  std::size_t num_layers = 0;
  std::size_t num_heads = 0;
  std::size_t seq_len = 0;
  std::vector<double> scores;

  std::span<const double> head(std::size_t layer, std::size_t h) const {
    return {scores.data() + (layer * num_heads + h) * seq_len, seq_len};
  }
};

/// Average attention each token receives from itself and later tokens:
///
///   s_i = (1 / (T - i)) * sum_{u = i..T} A[u, i]     (1-based, i < T)
///   s_T = A[T, T]
///
/// The divisor counts one fewer position than the sum, so scores can exceed 1.
SinkScoreTensor sink_scores(const AttentionRecord& record);

/// Sink scores of a single head.
void head_sink_scores(const AttentionRecord& record, std::size_t layer,
                      std::size_t h, std::span<double> out);

/// Token indices ordered by descending value, ties toward the lower index.
std::vector<std::size_t> descending_order(std::span<const double> values);

/// Writes the `out.size()` largest values in descending order, padding with
/// `pad` when there are fewer values than slots.
void top_k_into(std::span<const double> values, std::span<double> out,
                double pad = 0.0);

/// Top-k sink scores of every head, concatenated layer-major then head.
FeatureVector top_k_features(const SinkScoreTensor& scores, std::size_t k);

}  // namespace sinkprobe
