#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace sinkprobe {

enum class Label : std::uint8_t {
  kNonHallucinated = 0,
  kHallucinated = 1,
  kUnknown = 255,
};

// Tolerances applied when validating attention payloads.
inline constexpr double kRowSumTolerance = 1e-3;
inline constexpr double kNegativeClampThreshold = 1e-6;

/// One example's causal attention maps.
///
/// Each of the L*H heads is stored as a packed lower-triangular T x T matrix,
/// row-major, T(T+1)/2 entries: row u (0-based) holds columns 0..u. Layer,
/// head and token indices in the C++ API are 0-based; every serialized report
/// uses 1-based positions.
struct AttentionRecord {
  std::string example_id;
  std::size_t num_layers = 0;
  std::size_t num_heads = 0;
  std::size_t seq_len = 0;
  std::size_t prompt_len = 0;
  Label label = Label::kUnknown;
  std::vector<float> attention;
  // Empty, or L*H*T attention-output norms ordered (layer, head, position).
  std::vector<float> output_norms;

  static constexpr std::size_t packed_size(std::size_t seq_len) {
    return seq_len * (seq_len + 1) / 2;
  }
  static constexpr std::size_t row_offset(std::size_t row) {
    return row * (row + 1) / 2;
  }

  std::size_t num_heads_total() const { return num_layers * num_heads; }
  std::size_t response_len() const { return seq_len - prompt_len; }
  bool has_output_norms() const { return !output_norms.empty(); }

  std::span<const float> head(std::size_t layer, std::size_t h) const {
    const std::size_t n = packed_size(seq_len);
    return {attention.data() + (layer * num_heads + h) * n, n};
  }
  std::span<float> head(std::size_t layer, std::size_t h) {
    const std::size_t n = packed_size(seq_len);
    return {attention.data() + (layer * num_heads + h) * n, n};
  }

  /// Weight from token `row` to token `col`; zero above the diagonal.
  float weight(std::size_t layer, std::size_t h, std::size_t row,
               std::size_t col) const {
    if (col > row) return 0.0f;
    return head(layer, h)[row_offset(row) + col];
  }

  std::span<const float> row(std::size_t layer, std::size_t h,
                             std::size_t row) const {
    return head(layer, h).subspan(row_offset(row), row + 1);
  }

  std::span<const float> norms(std::size_t layer, std::size_t h) const {
    return {output_norms.data() + (layer * num_heads + h) * seq_len, seq_len};
  }

  /// Allocates a zeroed attention payload for the given shape.
  static AttentionRecord zeros(std::size_t num_layers, std::size_t num_heads,
                               std::size_t seq_len, std::size_t prompt_len,
                               Label label = Label::kUnknown);
};

/// Checks structural and numerical invariants, clamping entries in
/// [-1e-6, 0) to zero. Throws Error(kData) naming the first offending
/// (layer, head, row) in 1-based coordinates.
void validate_record(AttentionRecord& record);

/// Same checks without clamping; a negative entry of any size is an error.
void check_record(const AttentionRecord& record);

}  // namespace sinkprobe
