#pragma once

// JSON and CSV serialization of models and reports. JSON is the complete
// record; CSV is a flat projection for plotting.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "sinkprobe/analysis.hpp"
#include "sinkprobe/evaluation.hpp"
#include "sinkprobe/probe.hpp"

namespace sinkprobe {

std::string_view penalty_name(Penalty penalty);
std::optional<Penalty> parse_penalty(std::string_view name);

std::string model_to_json(const ProbeModel& model);
/// Throws Error(kData) on malformed input.
ProbeModel model_from_json(std::string_view text);
void save_model(const std::filesystem::path& path, const ProbeModel& model);
ProbeModel load_model(const std::filesystem::path& path);

/// `best` is the index of the selected report for sweeps.
std::string eval_reports_to_json(std::span<const EvalReport> reports,
                                 std::optional<std::size_t> best = std::nullopt);
/// One row per (family, k, fold) plus a "mean" and "std" row per report.
std::string eval_reports_to_csv(std::span<const EvalReport> reports);

std::string importance_to_json(const ImportanceReport& report);
/// One row per layer.
std::string importance_to_csv(const ImportanceReport& report);

std::string location_to_json(const SinkLocationReport& report);
/// One row per rank (0-based).
std::string location_to_csv(const SinkLocationReport& report);

std::string norms_to_json(const NormDiagnostic& diagnostic);
/// One row per layer.
std::string norms_to_csv(const NormDiagnostic& diagnostic);

/// Shortest round-trip decimal form; "nan" and "inf" for non-finite values.
std::string format_number(double value);

void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

}  // namespace sinkprobe
