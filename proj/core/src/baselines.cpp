#include "sinkprobe/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "sinkprobe/error.hpp"
#include "sinkprobe/sink_features.hpp"

namespace sinkprobe {
namespace {

double head_logdet(const AttentionRecord& r, std::size_t l, std::size_t h) {
  double sum = 0.0;
  for (std::size_t i = 0; i < r.seq_len; ++i) {
    sum += std::log(std::max(static_cast<double>(r.weight(l, h, i, i)), kLogFloor));
  }
  return sum / static_cast<double>(r.seq_len);
}

void require_partition(const AttentionRecord& r) {
  if (r.prompt_len == 0 || r.prompt_len >= r.seq_len) {
    throw_data("record '" + r.example_id +
               "' needs at least one prompt and one response token");
  }
}

FeatureVector make_vector(FeatureFamily family, const AttentionRecord& r,
                          std::size_t k) {
  FeatureVector f;
  f.family = family;
  f.k = family_uses_k(family) ? k : 0;
  f.columns = feature_columns(family, r.num_layers, r.num_heads, k);
  f.values.assign(f.columns.size(), 0.0);
  return f;
}

}  // namespace

double attn_score(const AttentionRecord& r) {
  double total = 0.0;
  for (std::size_t l = 0; l < r.num_layers; ++l) {
    double layer = 0.0;
    for (std::size_t h = 0; h < r.num_heads; ++h) {
      for (std::size_t i = 0; i < r.seq_len; ++i) {
        layer += std::log(std::max(static_cast<double>(r.weight(l, h, i, i)), kLogFloor));
      }
    }
    total += layer / static_cast<double>(r.num_heads * r.seq_len);
  }
  return total / static_cast<double>(r.num_layers);
}

FeatureVector attn_logdet_features(const AttentionRecord& r) {
  FeatureVector f = make_vector(FeatureFamily::kAttnLogDet, r, 0);
  for (std::size_t l = 0; l < r.num_layers; ++l) {
    for (std::size_t h = 0; h < r.num_heads; ++h) {
      f.values[l * r.num_heads + h] = head_logdet(r, l, h);
    }
  }
  return f;
}

FeatureVector attn_eigval_features(const AttentionRecord& r, std::size_t k) {
  if (k == 0) throw_invalid("top-k requires k >= 1");
  FeatureVector f = make_vector(FeatureFamily::kAttnEigval, r, k);
  std::vector<double> diagonal(r.seq_len);
  for (std::size_t l = 0; l < r.num_layers; ++l) {
    for (std::size_t h = 0; h < r.num_heads; ++h) {
      for (std::size_t i = 0; i < r.seq_len; ++i) diagonal[i] = r.weight(l, h, i, i);
      top_k_into(diagonal,
                 std::span<double>(f.values).subspan((l * r.num_heads + h) * k, k));
    }
  }
  return f;
}

void laplacian_diagonal(const AttentionRecord& r, std::size_t l, std::size_t h,
                        std::span<double> out) {
  head_sink_scores(r, l, h, out);
  for (std::size_t i = 0; i < r.seq_len; ++i) {
    out[i] -= static_cast<double>(r.weight(l, h, i, i));
  }
}

FeatureVector lap_eigval_features(const AttentionRecord& r, std::size_t k) {
  if (k == 0) throw_invalid("top-k requires k >= 1");
  FeatureVector f = make_vector(FeatureFamily::kLapEigval, r, k);
  std::vector<double> diagonal(r.seq_len);
  for (std::size_t l = 0; l < r.num_layers; ++l) {
    for (std::size_t h = 0; h < r.num_heads; ++h) {
      laplacian_diagonal(r, l, h, diagonal);
      top_k_into(diagonal,
                 std::span<double>(f.values).subspan((l * r.num_heads + h) * k, k));
    }
  }
  return f;
}

double lookback_ratio(const AttentionRecord& r, std::size_t l, std::size_t h,
                      std::size_t row) {
  const std::size_t P = r.prompt_len;
  const auto a = r.row(l, h, row);
  double ctx = 0.0;
  for (std::size_t u = 0; u < P; ++u) ctx += a[u];
  ctx /= static_cast<double>(P);
  // Only tokens P..row are visible from this row.
  double resp = 0.0;
  for (std::size_t u = P; u <= row; ++u) resp += a[u];
  resp /= static_cast<double>(row - P + 1);
  const double denom = ctx + resp;
  return denom > 0.0 ? resp / denom : 0.0;
}

FeatureVector lookback_features(const AttentionRecord& r) {
  require_partition(r);
  FeatureVector f = make_vector(FeatureFamily::kLookback, r, 0);
  for (std::size_t l = 0; l < r.num_layers; ++l) {
    for (std::size_t h = 0; h < r.num_heads; ++h) {
      double sum = 0.0;
      for (std::size_t i = r.prompt_len; i < r.seq_len; ++i) {
        sum += lookback_ratio(r, l, h, i);
      }
      f.values[l * r.num_heads + h] = sum / static_cast<double>(r.response_len());
    }
  }
  return f;
}

std::vector<double> mtopdiv_graph(const AttentionRecord& r, std::size_t l,
                                  std::size_t h) {
  require_partition(r);
  const std::size_t P = r.prompt_len;
  const std::size_t n = r.response_len() + 1;
  std::vector<double> w(n * n, 0.0);
  for (std::size_t j = 1; j < n; ++j) {
    const auto a = r.row(l, h, P + j - 1);
    const double best = *std::max_element(a.begin(), a.begin() + static_cast<std::ptrdiff_t>(P));
    w[j] = w[j * n] = 1.0 - best;
    for (std::size_t m = 1; m < j; ++m) {
      const double d = 1.0 - static_cast<double>(a[P + m - 1]);
      w[j * n + m] = w[m * n + j] = d;
    }
  }
  return w;
}

std::vector<double> minimum_spanning_tree(std::span<const double> w,
                                          std::size_t n) {
  // Prim on a dense graph.
  std::vector<double> edges;
  if (n <= 1) return edges;
  edges.reserve(n - 1);
  std::vector<bool> in_tree(n, false);
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  best[0] = 0.0;
  for (std::size_t step = 0; step < n; ++step) {
    std::size_t next = n;
    for (std::size_t v = 0; v < n; ++v) {
      if (!in_tree[v] && (next == n || best[v] < best[next])) next = v;
    }
    in_tree[next] = true;
    if (step > 0) edges.push_back(best[next]);
    for (std::size_t v = 0; v < n; ++v) {
      if (!in_tree[v] && w[next * n + v] < best[v]) best[v] = w[next * n + v];
    }
  }
  return edges;
}

double tree_weight(std::vector<double> edge_weights) {
  std::sort(edge_weights.begin(), edge_weights.end());
  double total = 0.0;
  for (double e : edge_weights) total += e;
  return total;
}

FeatureVector mtopdiv_features(const AttentionRecord& r) {
  require_partition(r);
  FeatureVector f = make_vector(FeatureFamily::kMTopDiv, r, 0);
  const std::size_t n = r.response_len() + 1;
  for (std::size_t l = 0; l < r.num_layers; ++l) {
    for (std::size_t h = 0; h < r.num_heads; ++h) {
      f.values[l * r.num_heads + h] =
          tree_weight(minimum_spanning_tree(mtopdiv_graph(r, l, h), n));
    }
  }
  return f;
}

}  // namespace sinkprobe
