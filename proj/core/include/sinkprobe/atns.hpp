#pragma once

// ATNS binary attention-record format (little-endian).
//
//   header (16 B)   "ATNS" | version u16 = 1 | dtype u8 | flags u8 | L u16 | H u16 | T u32
//   prompt (8 B)    P u32 | label u8 (0, 1, 255 = unknown) | 3 zero bytes
//   attention       for each layer, for each head: T(T+1)/2 values, row-major
//                   lower triangle, stored as f32 or f16 per dtype
//   norms           present when flags bit 0 is set: L*H*T f32, order (l, h, u)

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "sinkprobe/record.hpp"

namespace sinkprobe {

enum class Dtype : std::uint8_t { kF32 = 0, kF16 = 1 };

inline constexpr std::uint16_t kAtnsVersion = 1;
inline constexpr std::size_t kAtnsHeaderSize = 16;
inline constexpr std::size_t kAtnsPromptBlockSize = 8;

/// Serialized size of a record with the given shape.
std::size_t atns_size(std::size_t num_layers, std::size_t num_heads,
                      std::size_t seq_len, Dtype dtype, bool with_norms);

std::vector<std::uint8_t> write_record(const AttentionRecord& record,
                                       Dtype dtype);

/// Parses and validates a record. The example id is left empty; it lives in
/// the manifest, not in the file.
AttentionRecord read_record(std::span<const std::uint8_t> bytes);

void save_record(const std::filesystem::path& path,
                 const AttentionRecord& record, Dtype dtype);
AttentionRecord load_record(const std::filesystem::path& path);

// IEEE 754 binary16 conversion, round-to-nearest-even.
std::uint16_t float_to_half(float value);
float half_to_float(std::uint16_t bits);

}  // namespace sinkprobe
