#include "sinkprobe/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "sinkprobe/error.hpp"

namespace sinkprobe {

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw_invalid("scores and labels differ in length");
  std::uint64_t n_pos = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (std::isnan(scores[i])) throw_invalid("NaN score");
    if (labels[i] != 0 && labels[i] != 1) throw_invalid("labels must be 0 or 1");
    n_pos += labels[i] == 1;
  }
  const std::uint64_t n_neg = scores.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw_invalid("ROC-AUC needs both classes");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Walk tie groups in ascending score order; positives in a group beat every
  // negative seen in earlier groups and tie with negatives in the group.
  std::uint64_t concordant = 0;
  std::uint64_t tied = 0;
  std::uint64_t neg_below = 0;
  for (std::size_t start = 0; start < order.size();) {
    std::size_t end = start;
    std::uint64_t pos = 0;
    std::uint64_t neg = 0;
    while (end < order.size() && scores[order[end]] == scores[order[start]]) {
      (labels[order[end]] == 1 ? pos : neg) += 1;
      ++end;
    }
    concordant += pos * neg_below;
    tied += pos * neg;
    neg_below += neg;
    start = end;
  }
  return static_cast<double>(2 * concordant + tied) /
         static_cast<double>(2 * n_pos * n_neg);
}

}  // namespace sinkprobe
