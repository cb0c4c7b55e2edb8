#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sinkprobe/atns.hpp"
#include "sinkprobe/manifest.hpp"
#include "sinkprobe/record.hpp"

namespace sinkprobe {

/// Synthetic attention dataset with a planted sink signal.
///
/// Every row u attends over tokens 1..u with log-normal weights exp(gamma*z).
/// A fraction `bos_mass` of each row is then routed to token 1 in every
/// example, mimicking the sequence-initial sink of real models. In
/// hallucinated (label 1) examples, each head of a planted layer picks a
/// sink column (token 1, or with probability `response_sink_prob` a random
/// response token) and every row that can see it gets `sink_gap` extra mass
/// before renormalization.
struct SynthConfig {
  std::size_t n_examples = 100;
  std::size_t num_layers = 4;
  std::size_t num_heads = 4;
  std::size_t min_len = 16;
  std::size_t max_len = 32;
  double prompt_fraction = 0.5;
  double concentration = 1.0;
  double sink_gap = 0.2;
  std::vector<std::size_t> planted_layers;  // 1-based; empty plants every layer
  double response_sink_prob = 0.0;
  double bos_mass = 0.2;
  std::optional<double> norm_shift;  // when set, records carry output norms
  std::uint64_t seed = 7;
  std::string dataset_tag = "synth";
};

/// Throws Error(kInvalidArgument) for infeasible configurations.
void validate_config(const SynthConfig& config);

std::string config_to_json(const SynthConfig& config);

struct SynthDataset {
  Manifest manifest;  // paths are "<id>.atns", relative to the output directory
  std::vector<AttentionRecord> records;
};

/// Deterministic in the config: example i draws from substream (seed, i).
SynthDataset generate(const SynthConfig& config, unsigned jobs = 1);

/// Writes the ATNS files, manifest.jsonl and synth_config.json.
void write_dataset(const SynthDataset& dataset, const SynthConfig& config,
                   const std::filesystem::path& directory, Dtype dtype = Dtype::kF32);

}  // namespace sinkprobe
