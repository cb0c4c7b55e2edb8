#include "sinkprobe/extraction.hpp"

#include <optional>

#include "sinkprobe/baselines.hpp"
#include "sinkprobe/error.hpp"
#include "sinkprobe/parallel.hpp"
#include "sinkprobe/sink_features.hpp"

namespace sinkprobe {
namespace {

struct Slot {
  std::string id;
  Label label = Label::kUnknown;
  std::size_t num_layers = 0;
  std::size_t num_heads = 0;
  std::optional<FeatureVector> features;
  std::string skip_reason;
};

void fill_slot(Slot& slot, const AttentionRecord& r, FeatureFamily family,
               std::size_t k) {
  slot.id = r.example_id;
  slot.label = r.label;
  slot.num_layers = r.num_layers;
  slot.num_heads = r.num_heads;
  if (r.label == Label::kUnknown) return;
  try {
    slot.features = extract_features(r, family, k);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kData) throw;
    slot.skip_reason = e.what();
  }
}

BatchResult assemble(std::vector<Slot>& slots, FeatureFamily family,
                     std::size_t k) {
  BatchResult out;
  out.matrix.family = family;
  out.matrix.k = family_uses_k(family) ? k : 0;
  std::optional<std::pair<std::size_t, std::size_t>> shape;
  for (auto& s : slots) {
    if (s.num_layers != 0) {
      if (!shape) {
        shape.emplace(s.num_layers, s.num_heads);
      } else if (shape->first != s.num_layers || shape->second != s.num_heads) {
        throw_data("record '" + s.id + "' has L=" + std::to_string(s.num_layers) +
                   ", H=" + std::to_string(s.num_heads) + "; expected L=" +
                   std::to_string(shape->first) + ", H=" + std::to_string(shape->second));
      }
    }
    if (s.label == Label::kUnknown) {
      ++out.excluded_unknown;
      continue;
    }
    if (!s.features) {
      out.skipped.push_back({s.id, s.skip_reason});
      continue;
    }
    auto& m = out.matrix;
    if (m.rows == 0) {
      m.cols = s.features->values.size();
      m.columns = s.features->columns;
    }
    m.values.insert(m.values.end(), s.features->values.begin(), s.features->values.end());
    m.labels.push_back(static_cast<int>(s.label));
    m.example_ids.push_back(s.id);
    ++m.rows;
  }
  if (shape && out.matrix.rows == 0) {
    out.matrix.columns = feature_columns(family, shape->first, shape->second, k);
    out.matrix.cols = out.matrix.columns.size();
  }
  return out;
}

}  // namespace

FeatureVector extract_features(const AttentionRecord& record,
                               FeatureFamily family, std::size_t k) {
  switch (family) {
    case FeatureFamily::kSink:
      return top_k_features(sink_scores(record), k);
    case FeatureFamily::kAttnScore: {
      FeatureVector f;
      f.family = family;
      f.columns = feature_columns(family, record.num_layers, record.num_heads, 0);
      f.values = {attn_score(record)};
      return f;
    }
    case FeatureFamily::kAttnLogDet:
      return attn_logdet_features(record);
    case FeatureFamily::kAttnEigval:
      return attn_eigval_features(record, k);
    case FeatureFamily::kLapEigval:
      return lap_eigval_features(record, k);
    case FeatureFamily::kLookback:
      return lookback_features(record);
    case FeatureFamily::kMTopDiv:
      return mtopdiv_features(record);
  }
  throw_invalid("unknown feature family");
}

BatchResult batch_features(const Manifest& manifest, FeatureFamily family,
                           std::size_t k, unsigned jobs) {
  if (family_uses_k(family) && k == 0) throw_invalid("top-k requires k >= 1");
  std::vector<Slot> slots(manifest.size());
  parallel_for(manifest.size(), jobs, [&](std::size_t i) {
    const auto& entry = manifest.entries()[i];
    if (entry.label == Label::kUnknown) {
      slots[i].id = entry.id;
      return;
    }
    fill_slot(slots[i], manifest.load_record(i), family, k);
  });
  return assemble(slots, family, k);
}

BatchResult batch_features(const std::vector<AttentionRecord>& records,
                           FeatureFamily family, std::size_t k, unsigned jobs) {
  if (family_uses_k(family) && k == 0) throw_invalid("top-k requires k >= 1");
  std::vector<Slot> slots(records.size());
  parallel_for(records.size(), jobs,
               [&](std::size_t i) { fill_slot(slots[i], records[i], family, k); });
  return assemble(slots, family, k);
}

}  // namespace sinkprobe
