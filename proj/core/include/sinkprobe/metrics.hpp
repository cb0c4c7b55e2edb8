#pragma once

#include <span>

namespace sinkprobe {

/// Area under the ROC curve as the Mann-Whitney statistic:
/// (concordant pairs + 0.5 * tied pairs) / (n_pos * n_neg).
///
/// Pair counts are accumulated as integers, so the result is the exact
/// quotient regardless of input order. Labels are 0/1; both must occur.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

}  // namespace sinkprobe
