#include "sinkprobe/record.hpp"

#include <cmath>
#include <sstream>
#include <type_traits>

#include "sinkprobe/error.hpp"

namespace sinkprobe {
namespace {

std::string coordinates(std::size_t layer, std::size_t h, std::size_t row) {
  std::ostringstream out;
  out << "layer " << layer + 1 << ", head " << h + 1 << ", row " << row + 1;
  return out.str();
}

template <typename Entry>
void check_payload(const AttentionRecord& r, std::span<Entry> payload,
                   bool clamp) {
  for (std::size_t l = 0; l < r.num_layers; ++l) {
    for (std::size_t h = 0; h < r.num_heads; ++h) {
      const std::size_t base =
          (l * r.num_heads + h) * AttentionRecord::packed_size(r.seq_len);
      for (std::size_t u = 0; u < r.seq_len; ++u) {
        double sum = 0.0;
        for (std::size_t i = 0; i <= u; ++i) {
          Entry& a = payload[base + AttentionRecord::row_offset(u) + i];
          if (!std::isfinite(a)) {
            throw_data("non-finite attention entry at " + coordinates(l, h, u));
          }
          if (a < 0.0f) {
            if (!clamp || a < -kNegativeClampThreshold) {
              throw_data("negative attention entry at " + coordinates(l, h, u));
            }
            if constexpr (!std::is_const_v<Entry>) a = 0.0f;
          }
          sum += a;
        }
        if (std::abs(sum - 1.0) > kRowSumTolerance) {
          std::ostringstream msg;
          msg << "attention row sums to " << sum << " at " << coordinates(l, h, u);
          throw_data(msg.str());
        }
      }
    }
  }
}

void check_shape(const AttentionRecord& r) {
  if (r.num_layers == 0 || r.num_heads == 0 || r.seq_len == 0) {
    throw_data("record '" + r.example_id + "' has an empty dimension");
  }
  if (r.prompt_len > r.seq_len) {
    throw_data("record '" + r.example_id + "' has prompt_len > seq_len");
  }
  if (r.label != Label::kNonHallucinated && r.label != Label::kHallucinated &&
      r.label != Label::kUnknown) {
    throw_data("record '" + r.example_id + "' has an invalid label");
  }
  if (r.attention.size() !=
      r.num_heads_total() * AttentionRecord::packed_size(r.seq_len)) {
    throw_data("record '" + r.example_id + "' attention payload size mismatch");
  }
  if (r.has_output_norms()) {
    if (r.output_norms.size() != r.num_heads_total() * r.seq_len) {
      throw_data("record '" + r.example_id + "' output norm payload size mismatch");
    }
    for (float v : r.output_norms) {
      if (!std::isfinite(v) || v < 0.0f) {
        throw_data("record '" + r.example_id + "' has an invalid output norm");
      }
    }
  }
}

}  // namespace

AttentionRecord AttentionRecord::zeros(std::size_t num_layers,
                                       std::size_t num_heads,
                                       std::size_t seq_len,
                                       std::size_t prompt_len, Label label) {
  AttentionRecord r;
  r.num_layers = num_layers;
  r.num_heads = num_heads;
  r.seq_len = seq_len;
  r.prompt_len = prompt_len;
  r.label = label;
  r.attention.assign(num_layers * num_heads * packed_size(seq_len), 0.0f);
  return r;
}

void validate_record(AttentionRecord& record) {
  check_shape(record);
  check_payload(record, std::span<float>(record.attention), true);
}

void check_record(const AttentionRecord& record) {
  check_shape(record);
  check_payload(record, std::span<const float>(record.attention), false);
}

}  // namespace sinkprobe
