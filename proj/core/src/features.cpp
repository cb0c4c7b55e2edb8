#include "sinkprobe/features.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>
#include <nlohmann/json.hpp>

#include "sinkprobe/error.hpp"

namespace sinkprobe {
namespace {

constexpr std::array<std::string_view, 7> kFamilyNames = {
    "sink", "attnscore", "attnlogdet", "attneig", "lapeig", "lookback", "mtopdiv"};

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int shift = 0; shift < 32; shift += 8) {
    out.push_back(static_cast<std::uint8_t>((v >> shift) & 0xff));
  }
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t pos) {
  std::uint32_t v = 0;
  for (int k = 3; k >= 0; --k) v = (v << 8) | b[pos + k];
  return v;
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

constexpr std::size_t kFeatHeaderSize = 4 + 2 + 4 + 4 + 4 + 1;

}  // namespace

std::string_view family_name(FeatureFamily family) {
  return kFamilyNames.at(static_cast<std::size_t>(family));
}

std::optional<FeatureFamily> parse_family(std::string_view name) {
  for (std::size_t i = 0; i < kFamilyNames.size(); ++i) {
    if (kFamilyNames[i] == name) return static_cast<FeatureFamily>(i);
  }
  return std::nullopt;
}

bool family_uses_k(FeatureFamily family) {
  return family == FeatureFamily::kSink || family == FeatureFamily::kAttnEigval ||
         family == FeatureFamily::kLapEigval;
}

bool family_is_unsupervised(FeatureFamily family) {
  return family == FeatureFamily::kAttnScore;
}

std::vector<FeatureColumn> feature_columns(FeatureFamily family,
                                           std::size_t num_layers,
                                           std::size_t num_heads,
                                           std::size_t k) {
  std::vector<FeatureColumn> columns;
  if (family == FeatureFamily::kAttnScore) {
    columns.push_back({0, 0, 0});
    return columns;
  }
  const std::size_t per_head = family_uses_k(family) ? k : 1;
  columns.reserve(num_layers * num_heads * per_head);
  for (std::size_t l = 0; l < num_layers; ++l) {
    for (std::size_t h = 0; h < num_heads; ++h) {
      for (std::size_t r = 0; r < per_head; ++r) {
        columns.push_back({static_cast<std::uint32_t>(l + 1),
                           static_cast<std::uint32_t>(h + 1),
                           family_uses_k(family) ? static_cast<std::uint32_t>(r + 1) : 0u});
      }
    }
  }
  return columns;
}

FeatureMatrix FeatureMatrix::subset(std::span<const std::size_t> indices) const {
  FeatureMatrix out;
  out.family = family;
  out.k = k;
  out.rows = indices.size();
  out.cols = cols;
  out.columns = columns;
  out.values.reserve(indices.size() * cols);
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) {
    const auto r = row(i);
    out.values.insert(out.values.end(), r.begin(), r.end());
    out.labels.push_back(labels.at(i));
    if (!example_ids.empty()) out.example_ids.push_back(example_ids.at(i));
  }
  return out;
}

std::vector<std::uint8_t> encode_feat(const FeatureMatrix& m) {
  if (m.values.size() != m.rows * m.cols || m.labels.size() != m.rows) {
    throw_invalid("feature matrix shape is inconsistent");
  }
  std::vector<std::uint8_t> out;
  out.reserve(kFeatHeaderSize + m.values.size() * 4 + m.rows);
  for (char c : std::string_view("FEAT")) out.push_back(static_cast<std::uint8_t>(c));
  put_u16(out, kFeatVersion);
  put_u32(out, static_cast<std::uint32_t>(m.rows));
  put_u32(out, static_cast<std::uint32_t>(m.cols));
  put_u32(out, static_cast<std::uint32_t>(m.k));
  out.push_back(static_cast<std::uint8_t>(m.family));
  for (double v : m.values) {
    put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  for (int label : m.labels) out.push_back(static_cast<std::uint8_t>(label));
  return out;
}

FeatureMatrix decode_feat(std::span<const std::uint8_t> b) {
  if (b.size() < kFeatHeaderSize) throw_data("truncated FEAT header");
  if (std::string_view(reinterpret_cast<const char*>(b.data()), 4) != "FEAT") {
    throw_data("bad FEAT magic");
  }
  const auto version = static_cast<std::uint16_t>(b[4] | (b[5] << 8));
  if (version != kFeatVersion) {
    throw_data("unsupported FEAT version " + std::to_string(version));
  }
  FeatureMatrix m;
  m.rows = get_u32(b, 6);
  m.cols = get_u32(b, 10);
  m.k = get_u32(b, 14);
  if (b[18] >= kFamilyNames.size()) throw_data("unknown FEAT family tag");
  m.family = static_cast<FeatureFamily>(b[18]);
  const std::size_t expected = kFeatHeaderSize + m.rows * m.cols * 4 + m.rows;
  if (b.size() != expected) throw_data("FEAT payload size mismatch");
  m.values.resize(m.rows * m.cols);
  std::size_t pos = kFeatHeaderSize;
  for (double& v : m.values) {
    v = std::bit_cast<float>(get_u32(b, pos));
    if (!std::isfinite(v)) throw_data("non-finite value in FEAT payload");
    pos += 4;
  }
  m.labels.resize(m.rows);
  for (int& label : m.labels) {
    label = b[pos++];
    if (label > 1) throw_data("FEAT label must be 0 or 1");
  }
  return m;
}

std::filesystem::path index_sidecar_path(const std::filesystem::path& feat) {
  return std::filesystem::path(feat.string() + ".index.jsonl");
}

std::filesystem::path ids_sidecar_path(const std::filesystem::path& feat) {
  return std::filesystem::path(feat.string() + ".ids.jsonl");
}

void save_feature_matrix(const std::filesystem::path& path,
                         const FeatureMatrix& m) {
  if (m.columns.size() != m.cols || m.example_ids.size() != m.rows) {
    throw_invalid("feature matrix lacks column index or example ids");
  }
  const auto bytes = encode_feat(m);
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw_data("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
  }
  {
    std::ofstream out(index_sidecar_path(path), std::ios::trunc);
    for (std::size_t c = 0; c < m.columns.size(); ++c) {
      nlohmann::ordered_json j;
      j["col"] = c;
      j["layer"] = m.columns[c].layer;
      j["head"] = m.columns[c].head;
      j["rank"] = m.columns[c].rank;
      out << j.dump() << '\n';
    }
  }
  {
    std::ofstream out(ids_sidecar_path(path), std::ios::trunc);
    for (std::size_t r = 0; r < m.example_ids.size(); ++r) {
      nlohmann::ordered_json j;
      j["row"] = r;
      j["id"] = m.example_ids[r];
      out << j.dump() << '\n';
    }
  }
}

FeatureMatrix load_feature_matrix(const std::filesystem::path& path) {
  FeatureMatrix m = decode_feat(read_file(path));
  auto read_lines = [](const std::filesystem::path& p) {
    std::ifstream in(p);
    if (!in) throw_data("cannot open " + p.string());
    std::vector<nlohmann::json> lines;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      try {
        lines.push_back(nlohmann::json::parse(line));
      } catch (const nlohmann::json::exception& e) {
        throw_data(p.string() + ": " + e.what());
      }
    }
    return lines;
  };
  try {
    for (const auto& j : read_lines(index_sidecar_path(path))) {
      m.columns.push_back({j.at("layer").get<std::uint32_t>(),
                           j.at("head").get<std::uint32_t>(),
                           j.at("rank").get<std::uint32_t>()});
    }
    for (const auto& j : read_lines(ids_sidecar_path(path))) {
      m.example_ids.push_back(j.at("id").get<std::string>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw_data(path.string() + " sidecar: " + e.what());
  }
  if (m.columns.size() != m.cols) throw_data("FEAT index sidecar has wrong length");
  if (m.example_ids.size() != m.rows) throw_data("FEAT ids sidecar has wrong length");
  return m;
}

}  // namespace sinkprobe
