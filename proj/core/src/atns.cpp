#include "sinkprobe/atns.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "sinkprobe/error.hpp"

namespace sinkprobe {
namespace {

constexpr std::array<std::uint8_t, 4> kMagic = {'A', 'T', 'N', 'S'};
constexpr std::uint8_t kFlagNorms = 0x1;

class ByteWriter {
 public:
  explicit ByteWriter(std::size_t reserve) { bytes_.reserve(reserve); }

  void put_u8(std::uint8_t v) { bytes_.push_back(v); }
  void put_u16(std::uint16_t v) {
    put_u8(static_cast<std::uint8_t>(v & 0xff));
    put_u8(static_cast<std::uint8_t>(v >> 8));
  }
  void put_u32(std::uint32_t v) {
    for (int shift = 0; shift < 32; shift += 8) {
      put_u8(static_cast<std::uint8_t>((v >> shift) & 0xff));
    }
  }
  void put_f32(float v) { put_u32(std::bit_cast<std::uint32_t>(v)); }

  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint8_t u8() {
    require(1);
    return bytes_[pos_++];
  }
  std::uint16_t u16() {
    require(2);
    const auto v = static_cast<std::uint16_t>(bytes_[pos_] | (bytes_[pos_ + 1] << 8));
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    require(4);
    std::uint32_t v = 0;
    for (int k = 3; k >= 0; --k) v = (v << 8) | bytes_[pos_ + k];
    pos_ += 4;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }

  void require(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw_data("truncated ATNS stream");
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint16_t float_to_half(float value) {
  const std::uint32_t x = std::bit_cast<std::uint32_t>(value);
  const auto sign = static_cast<std::uint16_t>((x >> 16) & 0x8000u);
  const std::uint32_t exponent = (x >> 23) & 0xffu;
  std::uint32_t mantissa = x & 0x7fffffu;

  if (exponent == 0xff) {
    return static_cast<std::uint16_t>(sign | 0x7c00u | (mantissa != 0 ? 0x200u : 0u));
  }
  const int e = static_cast<int>(exponent) - 127 + 15;
  if (e >= 0x1f) return static_cast<std::uint16_t>(sign | 0x7c00u);
  if (e <= 0) {
    if (e < -10) return sign;
    mantissa |= 0x800000u;
    const int shift = 14 - e;
    std::uint32_t h = mantissa >> shift;
    const std::uint32_t rem = mantissa & ((1u << shift) - 1u);
    const std::uint32_t halfway = 1u << (shift - 1);
    if (rem > halfway || (rem == halfway && (h & 1u))) ++h;
    return static_cast<std::uint16_t>(sign | h);
  }
  std::uint32_t h = (static_cast<std::uint32_t>(e) << 10) | (mantissa >> 13);
  const std::uint32_t rem = mantissa & 0x1fffu;
  if (rem > 0x1000u || (rem == 0x1000u && (h & 1u))) ++h;  // may carry to inf
  return static_cast<std::uint16_t>(sign | h);
}

float half_to_float(std::uint16_t bits) {
  const std::uint32_t sign = static_cast<std::uint32_t>(bits & 0x8000u) << 16;
  const std::uint32_t exponent = (bits >> 10) & 0x1fu;
  const std::uint32_t mantissa = bits & 0x3ffu;
  if (exponent == 0) {
    const float magnitude = std::ldexp(static_cast<float>(mantissa), -24);
    return sign ? -magnitude : magnitude;
  }
  if (exponent == 0x1f) {
    return std::bit_cast<float>(sign | 0x7f800000u | (mantissa << 13));
  }
  return std::bit_cast<float>(sign | ((exponent + 112) << 23) | (mantissa << 13));
}

std::size_t atns_size(std::size_t num_layers, std::size_t num_heads,
                      std::size_t seq_len, Dtype dtype, bool with_norms) {
  const std::size_t width = dtype == Dtype::kF32 ? 4 : 2;
  std::size_t size = kAtnsHeaderSize + kAtnsPromptBlockSize +
                     num_layers * num_heads *
                         AttentionRecord::packed_size(seq_len) * width;
  if (with_norms) size += num_layers * num_heads * seq_len * 4;
  return size;
}

std::vector<std::uint8_t> write_record(const AttentionRecord& record,
                                       Dtype dtype) {
  if (record.num_layers > std::numeric_limits<std::uint16_t>::max() ||
      record.num_heads > std::numeric_limits<std::uint16_t>::max() ||
      record.seq_len > std::numeric_limits<std::uint32_t>::max()) {
    throw_invalid("record dimensions overflow the ATNS header");
  }
  if (dtype != Dtype::kF32 && dtype != Dtype::kF16) {
    throw_invalid("unsupported ATNS dtype");
  }
  check_record(record);

  ByteWriter out(atns_size(record.num_layers, record.num_heads, record.seq_len,
                           dtype, record.has_output_norms()));
  for (std::uint8_t c : kMagic) out.put_u8(c);
  out.put_u16(kAtnsVersion);
  out.put_u8(static_cast<std::uint8_t>(dtype));
  out.put_u8(record.has_output_norms() ? kFlagNorms : 0);
  out.put_u16(static_cast<std::uint16_t>(record.num_layers));
  out.put_u16(static_cast<std::uint16_t>(record.num_heads));
  out.put_u32(static_cast<std::uint32_t>(record.seq_len));

  out.put_u32(static_cast<std::uint32_t>(record.prompt_len));
  out.put_u8(static_cast<std::uint8_t>(record.label));
  for (int k = 0; k < 3; ++k) out.put_u8(0);

  for (float v : record.attention) {
    if (dtype == Dtype::kF32) {
      out.put_f32(v);
    } else {
      out.put_u16(float_to_half(v));
    }
  }
  for (float v : record.output_norms) out.put_f32(v);
  return out.take();
}

AttentionRecord read_record(std::span<const std::uint8_t> bytes) {
  ByteReader in(bytes);
  in.require(kMagic.size());
  for (std::uint8_t c : kMagic) {
    if (in.u8() != c) throw_data("bad ATNS magic");
  }
  const std::uint16_t version = in.u16();
  if (version != kAtnsVersion) {
    throw_data("unsupported ATNS version " + std::to_string(version));
  }
  const std::uint8_t dtype = in.u8();
  if (dtype > static_cast<std::uint8_t>(Dtype::kF16)) {
    throw_data("unknown ATNS dtype " + std::to_string(dtype));
  }
  const std::uint8_t flags = in.u8();
  if ((flags & ~kFlagNorms) != 0) throw_data("unknown ATNS flags");

  AttentionRecord r;
  r.num_layers = in.u16();
  r.num_heads = in.u16();
  r.seq_len = in.u32();
  r.prompt_len = in.u32();
  const std::uint8_t label = in.u8();
  if (label != 0 && label != 1 && label != 255) {
    throw_data("invalid ATNS label " + std::to_string(label));
  }
  r.label = static_cast<Label>(label);
  for (int k = 0; k < 3; ++k) in.u8();

  if (r.num_layers == 0 || r.num_heads == 0 || r.seq_len == 0) {
    throw_data("ATNS header has an empty dimension");
  }
  const bool with_norms = (flags & kFlagNorms) != 0;
  const std::size_t expected =
      atns_size(r.num_layers, r.num_heads, r.seq_len,
                static_cast<Dtype>(dtype), with_norms) -
      kAtnsHeaderSize - kAtnsPromptBlockSize;
  if (in.remaining() < expected) throw_data("truncated ATNS payload");
  if (in.remaining() > expected) throw_data("trailing bytes after ATNS payload");

  r.attention.resize(r.num_heads_total() * AttentionRecord::packed_size(r.seq_len));
  for (float& v : r.attention) {
    v = dtype == 0 ? in.f32() : half_to_float(in.u16());
  }
  if (with_norms) {
    r.output_norms.resize(r.num_heads_total() * r.seq_len);
    for (float& v : r.output_norms) v = in.f32();
  }
  validate_record(r);
  return r;
}

void save_record(const std::filesystem::path& path,
                 const AttentionRecord& record, Dtype dtype) {
  const auto bytes = write_record(record, dtype);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_data("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw_data("failed writing " + path.string());
}

AttentionRecord load_record(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return read_record(bytes);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

}  // namespace sinkprobe
