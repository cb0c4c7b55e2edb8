#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "sinkprobe/record.hpp"

namespace sinkprobe {

struct ManifestEntry {
  std::string id;
  std::string path;  // relative paths resolve against the manifest directory
  Label label = Label::kUnknown;
  std::size_t prompt_len = 0;
  std::string dataset;
};

/// Dataset index, stored as JSON lines:
///   {"id": str, "path": str, "label": 0|1|null, "prompt_len": int, "dataset": str}
class Manifest {
 public:
  Manifest() = default;
  Manifest(std::filesystem::path base_dir, std::vector<ManifestEntry> entries);

  /// Parses and checks id uniqueness and that every path resolves.
  static Manifest load(const std::filesystem::path& path);
  static Manifest parse(const std::string& text,
                        const std::filesystem::path& base_dir);

  std::string serialize() const;
  void save(const std::filesystem::path& path) const;

  const std::vector<ManifestEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  const std::filesystem::path& base_dir() const { return base_dir_; }
  std::filesystem::path resolve(const ManifestEntry& entry) const;

  /// Loads the record behind an entry and cross-checks label and prompt
  /// length against the file header.
  AttentionRecord load_record(std::size_t index) const;

 private:
  std::filesystem::path base_dir_;
  std::vector<ManifestEntry> entries_;
};

}  // namespace sinkprobe
