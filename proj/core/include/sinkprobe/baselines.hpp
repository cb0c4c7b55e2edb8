#pragma once

// Comparison feature families computed from the same attention maps as the
// sink features. All functions are pure and thread-safe.

#include <cstddef>
#include <span>
#include <vector>

#include "sinkprobe/features.hpp"
#include "sinkprobe/record.hpp"

namespace sinkprobe {

/// Floor applied to diagonal entries before taking logs.
inline constexpr double kLogFloor = 1e-12;

/// Unsupervised attention score: per layer (1/(H*T)) sum_h sum_i log A[i,i],
/// averaged over layers. Higher means more self-attention on the diagonal.
double attn_score(const AttentionRecord& record);

/// (1/T) sum_i log A[i,i] for every (layer, head); dim L*H.
FeatureVector attn_logdet_features(const AttentionRecord& record);

/// Top-k eigenvalues of each attention matrix. The matrices are lower
/// triangular, so the spectrum is the diagonal. dim L*H*k.
FeatureVector attn_eigval_features(const AttentionRecord& record, std::size_t k);

/// Diagonal of the attention-graph Laplacian, l_ii = s_i - A[i,i], for one
/// head, with s the sink score.
void laplacian_diagonal(const AttentionRecord& record, std::size_t layer,
                        std::size_t h, std::span<double> out);

/// Top-k Laplacian eigenvalues per head, zero-padded; dim L*H*k.
FeatureVector lap_eigval_features(const AttentionRecord& record, std::size_t k);

/// Mean lookback ratio over response positions for every head; dim L*H.
/// Requires 1 <= P < T.
FeatureVector lookback_features(const AttentionRecord& record);

/// Lookback ratio of one response row (0-based row index >= P).
double lookback_ratio(const AttentionRecord& record, std::size_t layer,
                      std::size_t h, std::size_t row);

/// Dense pseudo-distance graph on {prompt node} + response tokens for one
/// head. Node 0 is the collapsed prompt; node j >= 1 is response token P+j-1
/// (0-based). Symmetric, zero diagonal, row-major n x n.
std::vector<double> mtopdiv_graph(const AttentionRecord& record, std::size_t layer,
                                  std::size_t h);

/// Edge weights of a minimum spanning tree of a dense symmetric graph.
std::vector<double> minimum_spanning_tree(std::span<const double> weights,
                                          std::size_t num_nodes);

/// Order-independent total: weights summed in ascending order. All minimum
/// spanning trees of a graph share the same sorted weight list, so this
/// total is exact across MST algorithms.
double tree_weight(std::vector<double> edge_weights);

/// MST total weight per head; dim L*H. Requires 1 <= P < T.
FeatureVector mtopdiv_features(const AttentionRecord& record);

}  // namespace sinkprobe
