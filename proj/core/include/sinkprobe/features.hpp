#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sinkprobe {

enum class FeatureFamily : std::uint8_t {
  kSink = 0,
  kAttnScore = 1,
  kAttnLogDet = 2,
  kAttnEigval = 3,
  kLapEigval = 4,
  kLookback = 5,
  kMTopDiv = 6,
};

std::string_view family_name(FeatureFamily family);
std::optional<FeatureFamily> parse_family(std::string_view name);
bool family_uses_k(FeatureFamily family);
/// Unsupervised families are scored directly instead of through a probe.
bool family_is_unsupervised(FeatureFamily family);

/// Identity of one feature column. Layer and head are 1-based; rank is
/// 1-based for ranked (top-k) families and 0 for per-head statistics.
struct FeatureColumn {
  std::uint32_t layer = 0;
  std::uint32_t head = 0;
  std::uint32_t rank = 0;

  friend bool operator==(const FeatureColumn&, const FeatureColumn&) = default;
};

/// Column layout for a family at the given shape.
std::vector<FeatureColumn> feature_columns(FeatureFamily family,
                                           std::size_t num_layers,
                                           std::size_t num_heads,
                                           std::size_t k);

struct FeatureVector {
  FeatureFamily family = FeatureFamily::kSink;
  std::size_t k = 0;
  std::vector<double> values;
  std::vector<FeatureColumn> columns;
};

/// n_examples x dim design matrix with labels (0/1) and column identities.
struct FeatureMatrix {
  FeatureFamily family = FeatureFamily::kSink;
  std::size_t k = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;  // row-major
  std::vector<int> labels;
  std::vector<std::string> example_ids;
  std::vector<FeatureColumn> columns;

  std::span<const double> row(std::size_t i) const {
    return {values.data() + i * cols, cols};
  }
  std::span<double> row(std::size_t i) { return {values.data() + i * cols, cols}; }

  /// Copy restricted to the given rows, in the given order.
  FeatureMatrix subset(std::span<const std::size_t> indices) const;
};

// FEAT file: "FEAT" | version u16 | n u32 | dim u32 | k u32 | family u8 |
// n*dim f32 row-major | n labels u8. Column identities are written to
// "<path>.index.jsonl" and example ids to "<path>.ids.jsonl".
inline constexpr std::uint16_t kFeatVersion = 1;

std::vector<std::uint8_t> encode_feat(const FeatureMatrix& matrix);
/// Decodes the binary part; columns and ids are left empty.
FeatureMatrix decode_feat(std::span<const std::uint8_t> bytes);

void save_feature_matrix(const std::filesystem::path& path,
                         const FeatureMatrix& matrix);
FeatureMatrix load_feature_matrix(const std::filesystem::path& path);

std::filesystem::path index_sidecar_path(const std::filesystem::path& feat);
std::filesystem::path ids_sidecar_path(const std::filesystem::path& feat);

}  // namespace sinkprobe
