#include "sinkprobe/sink_features.hpp"

#include <algorithm>
#include <numeric>

#include "sinkprobe/error.hpp"

namespace sinkprobe {

void head_sink_scores(const AttentionRecord& record, std::size_t layer,
                      std::size_t h, std::span<double> out) {
  const std::size_t T = record.seq_len;
  const auto a = record.head(layer, h);
  std::fill(out.begin(), out.end(), 0.0);
  // Column sums over rows u >= i, accumulated row by row for cache locality.
  for (std::size_t u = 0; u < T; ++u) {
    const float* row = a.data() + AttentionRecord::row_offset(u);
    for (std::size_t i = 0; i <= u; ++i) out[i] += row[i];
  }
  // 0-based i has T - 1 - i attenders after it; the last token keeps its
  // self-attention as the score.
  for (std::size_t i = 0; i + 1 < T; ++i) {
    out[i] /= static_cast<double>(T - 1 - i);
  }
}

SinkScoreTensor sink_scores(const AttentionRecord& record) {
  SinkScoreTensor s;
  s.example_id = record.example_id;
  s.num_layers = record.num_layers;
  s.num_heads = record.num_heads;
  s.seq_len = record.seq_len;
  s.scores.resize(record.num_heads_total() * record.seq_len);
  for (std::size_t l = 0; l < record.num_layers; ++l) {
    for (std::size_t h = 0; h < record.num_heads; ++h) {
      head_sink_scores(record, l, h,
                       std::span<double>(s.scores).subspan(
                           (l * record.num_heads + h) * record.seq_len, record.seq_len));
    }
  }
  return s;
}

std::vector<std::size_t> descending_order(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return values[a] > values[b];
  });
  return order;
}

void top_k_into(std::span<const double> values, std::span<double> out, double pad) {
  const std::size_t take = std::min(values.size(), out.size());
  std::vector<double> sorted(values.begin(), values.end());
  std::partial_sort(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(take),
                    sorted.end(), std::greater<>());
  std::copy_n(sorted.begin(), take, out.begin());
  std::fill(out.begin() + static_cast<std::ptrdiff_t>(take), out.end(), pad);
}

FeatureVector top_k_features(const SinkScoreTensor& scores, std::size_t k) {
  if (k == 0) throw_invalid("top-k requires k >= 1");
  FeatureVector f;
  f.family = FeatureFamily::kSink;
  f.k = k;
  f.columns = feature_columns(FeatureFamily::kSink, scores.num_layers,
                              scores.num_heads, k);
  f.values.resize(scores.num_layers * scores.num_heads * k);
  for (std::size_t l = 0; l < scores.num_layers; ++l) {
    for (std::size_t h = 0; h < scores.num_heads; ++h) {
      top_k_into(scores.head(l, h),
                 std::span<double>(f.values).subspan((l * scores.num_heads + h) * k, k));
    }
  }
  return f;
}

}  // namespace sinkprobe
