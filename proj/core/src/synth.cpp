#include "sinkprobe/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "sinkprobe/error.hpp"
#include "sinkprobe/parallel.hpp"
#include "sinkprobe/random.hpp"

namespace sinkprobe {
namespace {

std::size_t prompt_length(const SynthConfig& c, std::size_t seq_len) {
  return static_cast<std::size_t>(
      std::lround(c.prompt_fraction * static_cast<double>(seq_len)));
}

std::string example_id(std::size_t index, std::size_t total) {
  std::size_t width = 5;
  for (std::size_t t = total; t >= 100000; t /= 10) ++width;
  std::string digits = std::to_string(index);
  return "ex" + std::string(width - std::min(width, digits.size()), '0') + digits;
}

AttentionRecord generate_example(const SynthConfig& c, std::size_t index,
                                 Label label, const std::vector<bool>& planted) {
  Rng rng = Rng::substream(c.seed, index);
  const std::size_t T = c.min_len + rng.below(c.max_len - c.min_len + 1);
  const std::size_t P = prompt_length(c, T);
  AttentionRecord r = AttentionRecord::zeros(c.num_layers, c.num_heads, T, P, label);
  r.example_id = example_id(index, c.n_examples);

  std::vector<double> row(T);
  for (std::size_t l = 0; l < c.num_layers; ++l) {
    const bool plant = label == Label::kHallucinated && planted[l];
    for (std::size_t h = 0; h < c.num_heads; ++h) {
      std::size_t sink = 0;
      if (plant && rng.uniform() < c.response_sink_prob) {
        sink = P + rng.below(T - P);
      }
      auto head = r.head(l, h);
      for (std::size_t u = 0; u < T; ++u) {
        double total = 0.0;
        for (std::size_t i = 0; i <= u; ++i) {
          row[i] = std::exp(c.concentration * rng.normal());
          total += row[i];
        }
        for (std::size_t i = 0; i <= u; ++i) row[i] = (1.0 - c.bos_mass) * row[i] / total;
        row[0] += c.bos_mass;
        if (plant && sink <= u) row[sink] += c.sink_gap;
        total = 0.0;
        for (std::size_t i = 0; i <= u; ++i) total += row[i];
        float* out = head.data() + AttentionRecord::row_offset(u);
        for (std::size_t i = 0; i <= u; ++i) out[i] = static_cast<float>(row[i] / total);
      }
    }
  }

  if (c.norm_shift) {
    r.output_norms.resize(r.num_heads_total() * T);
    for (std::size_t l = 0; l < c.num_layers; ++l) {
      const double shift =
          label == Label::kHallucinated && planted[l] ? *c.norm_shift : 0.0;
      for (std::size_t h = 0; h < c.num_heads; ++h) {
        for (std::size_t u = 0; u < T; ++u) {
          const double base = 1.0 + 0.1 * std::abs(rng.normal());
          r.output_norms[(l * c.num_heads + h) * T + u] =
              static_cast<float>(std::max(0.0, base + shift));
        }
      }
    }
  }
  return r;
}

}  // namespace

void validate_config(const SynthConfig& c) {
  if (c.n_examples < 2) throw_invalid("synth needs at least 2 examples");
  if (c.num_layers == 0 || c.num_heads == 0) {
    throw_invalid("synth needs at least one layer and one head");
  }
  if (c.min_len < 2 || c.max_len < c.min_len) {
    throw_invalid("sequence length range must satisfy 2 <= min <= max");
  }
  if (!(c.prompt_fraction > 0.0 && c.prompt_fraction < 1.0)) {
    throw_invalid("prompt fraction must lie in (0, 1)");
  }
  for (std::size_t T = c.min_len; T <= c.max_len; ++T) {
    const std::size_t P = prompt_length(c, T);
    if (P == 0 || P >= T) {
      throw_invalid("prompt fraction yields an empty prompt or response at T=" +
                    std::to_string(T));
    }
  }
  if (!(c.concentration >= 0.0) || !(c.sink_gap >= 0.0)) {
    throw_invalid("concentration and sink gap must be non-negative");
  }
  if (!(c.response_sink_prob >= 0.0 && c.response_sink_prob <= 1.0)) {
    throw_invalid("response sink probability must lie in [0, 1]");
  }
  if (!(c.bos_mass >= 0.0 && c.bos_mass < 1.0)) {
    throw_invalid("BOS mass must lie in [0, 1)");
  }
  for (std::size_t l : c.planted_layers) {
    if (l == 0 || l > c.num_layers) {
      throw_invalid("planted layer " + std::to_string(l) + " out of range");
    }
  }
  if (c.norm_shift && !std::isfinite(*c.norm_shift)) {
    throw_invalid("norm shift must be finite");
  }
}

std::string config_to_json(const SynthConfig& c) {
  nlohmann::ordered_json j;
  j["n_examples"] = c.n_examples;
  j["num_layers"] = c.num_layers;
  j["num_heads"] = c.num_heads;
  j["seq_len_range"] = {c.min_len, c.max_len};
  j["prompt_fraction"] = c.prompt_fraction;
  j["concentration"] = c.concentration;
  j["sink_gap"] = c.sink_gap;
  j["planted_layers"] = c.planted_layers;
  j["response_sink_prob"] = c.response_sink_prob;
  j["bos_mass"] = c.bos_mass;
  if (c.norm_shift) {
    j["norm_shift"] = *c.norm_shift;
  } else {
    j["norm_shift"] = nullptr;
  }
  j["seed"] = c.seed;
  j["dataset"] = c.dataset_tag;
  return j.dump(2) + "\n";
}

SynthDataset generate(const SynthConfig& c, unsigned jobs) {
  validate_config(c);
  std::vector<bool> planted(c.num_layers, c.planted_layers.empty());
  for (std::size_t l : c.planted_layers) planted[l - 1] = true;

  // Balanced labels in a seeded order.
  std::vector<Label> labels(c.n_examples);
  for (std::size_t i = 0; i < c.n_examples; ++i) {
    labels[i] = i < c.n_examples / 2 ? Label::kHallucinated : Label::kNonHallucinated;
  }
  Rng rng(c.seed);
  rng.shuffle(std::span<Label>(labels));

  SynthDataset out;
  out.records.resize(c.n_examples);
  parallel_for(c.n_examples, jobs, [&](std::size_t i) {
    out.records[i] = generate_example(c, i, labels[i], planted);
  });

  std::vector<ManifestEntry> entries;
  entries.reserve(c.n_examples);
  for (const auto& r : out.records) {
    entries.push_back({r.example_id, r.example_id + ".atns", r.label, r.prompt_len,
                       c.dataset_tag});
  }
  out.manifest = Manifest({}, std::move(entries));
  return out;
}

void write_dataset(const SynthDataset& dataset, const SynthConfig& config,
                   const std::filesystem::path& directory, Dtype dtype) {
  std::error_code ec;
  std::filesystem::create_directories(directory, ec);
  if (ec) throw_data("cannot create " + directory.string() + ": " + ec.message());
  for (const auto& r : dataset.records) {
    save_record(directory / (r.example_id + ".atns"), r, dtype);
  }
  Manifest(directory, dataset.manifest.entries()).save(directory / "manifest.jsonl");
  std::ofstream cfg(directory / "synth_config.json", std::ios::trunc);
  if (!cfg) throw_data("cannot write synth_config.json");
  cfg << config_to_json(config);
}

}  // namespace sinkprobe
