#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "sinkprobe/error.hpp"
#include "sinkprobe/record.hpp"

namespace test_support {

using sinkprobe::AttentionRecord;
using sinkprobe::Label;

// Random causal row-stochastic record. Roughly a quarter of the entries are
// exactly zero so that ties and empty columns show up.
inline AttentionRecord random_record(std::mt19937_64& gen, std::size_t layers,
                                     std::size_t heads, std::size_t seq_len,
                                     std::size_t prompt_len,
                                     Label label = Label::kUnknown,
                                     bool with_norms = false) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  AttentionRecord r = AttentionRecord::zeros(layers, heads, seq_len, prompt_len, label);
  std::vector<double> row(seq_len);
  for (std::size_t l = 0; l < layers; ++l) {
    for (std::size_t h = 0; h < heads; ++h) {
      auto head = r.head(l, h);
      for (std::size_t u = 0; u < seq_len; ++u) {
        double total = 0.0;
        for (std::size_t i = 0; i <= u; ++i) {
          row[i] = unit(gen) < 0.25 ? 0.0 : unit(gen);
          total += row[i];
        }
        if (total == 0.0) {
          row[u] = 1.0;
          total = 1.0;
        }
        for (std::size_t i = 0; i <= u; ++i) {
          head[AttentionRecord::row_offset(u) + i] = static_cast<float>(row[i] / total);
        }
      }
    }
  }
  if (with_norms) {
    r.output_norms.resize(layers * heads * seq_len);
    for (float& v : r.output_norms) v = static_cast<float>(unit(gen) * 3.0);
  }
  return r;
}

// Single-head record from explicit lower-triangular rows.
inline AttentionRecord single_head(const std::vector<std::vector<double>>& rows,
                                   std::size_t prompt_len = 0,
                                   Label label = Label::kUnknown) {
  AttentionRecord r = AttentionRecord::zeros(1, 1, rows.size(), prompt_len, label);
  auto head = r.head(0, 0);
  for (std::size_t u = 0; u < rows.size(); ++u) {
    for (std::size_t i = 0; i <= u; ++i) {
      head[AttentionRecord::row_offset(u) + i] =
          i < rows[u].size() ? static_cast<float>(rows[u][i]) : 0.0f;
    }
  }
  return r;
}

inline AttentionRecord identity_record(std::size_t layers, std::size_t heads,
                                       std::size_t seq_len, std::size_t prompt_len = 0) {
  AttentionRecord r = AttentionRecord::zeros(layers, heads, seq_len, prompt_len);
  for (std::size_t l = 0; l < layers; ++l) {
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t u = 0; u < seq_len; ++u) {
        r.head(l, h)[AttentionRecord::row_offset(u) + u] = 1.0f;
      }
    }
  }
  return r;
}

// Row u attends 1/(u+1) to every visible token.
inline AttentionRecord uniform_record(std::size_t layers, std::size_t heads,
                                      std::size_t seq_len, std::size_t prompt_len = 0) {
  AttentionRecord r = AttentionRecord::zeros(layers, heads, seq_len, prompt_len);
  for (std::size_t l = 0; l < layers; ++l) {
    for (std::size_t h = 0; h < heads; ++h) {
      for (std::size_t u = 0; u < seq_len; ++u) {
        for (std::size_t i = 0; i <= u; ++i) {
          r.head(l, h)[AttentionRecord::row_offset(u) + i] =
              static_cast<float>(1.0 / static_cast<double>(u + 1));
        }
      }
    }
  }
  return r;
}

// Kind of the sinkprobe::Error thrown by fn, or nullopt if nothing was thrown.
template <typename Fn>
std::optional<sinkprobe::ErrorKind> error_kind(Fn&& fn) {
  try {
    fn();
  } catch (const sinkprobe::Error& e) {
    return e.kind();
  }
  return std::nullopt;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("sinkprobe_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

// Relative path -> file contents for every regular file under dir.
inline std::map<std::string, std::string> directory_bytes(const std::filesystem::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    out[std::filesystem::relative(e.path(), dir).generic_string()] = buf.str();
  }
  return out;
}

}  // namespace test_support
