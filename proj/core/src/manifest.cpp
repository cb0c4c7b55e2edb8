#include "sinkprobe/manifest.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <unordered_set>

#include "sinkprobe/atns.hpp"
#include "sinkprobe/error.hpp"

namespace sinkprobe {

using ordered_json = nlohmann::ordered_json;

Manifest::Manifest(std::filesystem::path base_dir,
                   std::vector<ManifestEntry> entries)
    : base_dir_(std::move(base_dir)), entries_(std::move(entries)) {}

Manifest Manifest::parse(const std::string& text,
                         const std::filesystem::path& base_dir) {
  std::vector<ManifestEntry> entries;
  std::unordered_set<std::string> seen;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto where = "manifest line " + std::to_string(line_no);
    ManifestEntry e;
    try {
      const auto j = nlohmann::json::parse(line);
      e.id = j.at("id").get<std::string>();
      e.path = j.at("path").get<std::string>();
      const auto& label = j.at("label");
      if (label.is_null()) {
        e.label = Label::kUnknown;
      } else {
        const int v = label.get<int>();
        if (v != 0 && v != 1) throw_data(where + ": label must be 0, 1 or null");
        e.label = static_cast<Label>(v);
      }
      const auto prompt_len = j.at("prompt_len").get<long long>();
      if (prompt_len < 0) throw_data(where + ": negative prompt_len");
      e.prompt_len = static_cast<std::size_t>(prompt_len);
      e.dataset = j.value("dataset", std::string{});
    } catch (const nlohmann::json::exception& ex) {
      throw_data(where + ": " + ex.what());
    }
    if (!seen.insert(e.id).second) throw_data(where + ": duplicate id '" + e.id + "'");
    entries.push_back(std::move(e));
  }
  return Manifest(base_dir, std::move(entries));
}

Manifest Manifest::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw_data("cannot open manifest " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  Manifest m = parse(text.str(), path.parent_path());
  for (const auto& e : m.entries_) {
    if (!std::filesystem::is_regular_file(m.resolve(e))) {
      throw_data("manifest entry '" + e.id + "': missing file " +
                 m.resolve(e).string());
    }
  }
  return m;
}

std::string Manifest::serialize() const {
  std::string out;
  for (const auto& e : entries_) {
    ordered_json j;
    j["id"] = e.id;
    j["path"] = e.path;
    if (e.label == Label::kUnknown) {
      j["label"] = nullptr;
    } else {
      j["label"] = static_cast<int>(e.label);
    }
    j["prompt_len"] = e.prompt_len;
    j["dataset"] = e.dataset;
    out += j.dump();
    out += '\n';
  }
  return out;
}

void Manifest::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw_data("cannot write manifest " + path.string());
  out << serialize();
}

std::filesystem::path Manifest::resolve(const ManifestEntry& entry) const {
  std::filesystem::path p(entry.path);
  return p.is_absolute() ? p : base_dir_ / p;
}

AttentionRecord Manifest::load_record(std::size_t index) const {
  const auto& e = entries_.at(index);
  AttentionRecord r = sinkprobe::load_record(resolve(e));
  r.example_id = e.id;
  if (r.prompt_len != e.prompt_len) {
    throw_data("record '" + e.id + "': prompt_len differs between manifest and " +
               resolve(e).string());
  }
  if (r.label != e.label) {
    throw_data("record '" + e.id + "': label differs between manifest and " +
               resolve(e).string());
  }
  return r;
}

}  // namespace sinkprobe
