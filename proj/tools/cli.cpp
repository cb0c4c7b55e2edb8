#include "cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <charconv>
#include <filesystem>
#include <optional>
#include <ostream>

#include "sinkprobe/analysis.hpp"
#include "sinkprobe/error.hpp"
#include "sinkprobe/evaluation.hpp"
#include "sinkprobe/extraction.hpp"
#include "sinkprobe/parallel.hpp"
#include "sinkprobe/reports.hpp"
#include "sinkprobe/synth.hpp"

namespace sinkprobe::cli {
namespace {

namespace fs = std::filesystem;

enum class Format { kJson, kCsv, kBoth };

struct Common {
  unsigned jobs = 0;
  std::string format = "json";
  std::string out;
};

struct SynthArgs {
  SynthConfig config;
  std::string lengths = "16..32";
  std::string dtype = "f32";
  std::string norm_shift;
};

struct ExtractArgs {
  std::string manifest;
  std::string family;
  std::size_t k = 0;
};

struct TrainArgs {
  std::vector<std::string> features;
  std::string manifest;
  std::string family;
  std::size_t k = 0;
  std::string penalty = "l2";
  std::optional<double> C;
  std::string weights = "balanced";
  std::uint64_t seed = 0;
  std::size_t folds = kDefaultFolds;
  std::vector<std::size_t> sweep;
  std::string model;
};

std::size_t parse_size(const std::string& text, const std::string& what) {
  std::size_t value = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) {
    throw_invalid("invalid " + what + ": '" + text + "'");
  }
  return value;
}

// "MIN..MAX" or a single length.
std::pair<std::size_t, std::size_t> parse_range(const std::string& text) {
  const auto dots = text.find("..");
  if (dots == std::string::npos) {
    const std::size_t t = parse_size(text, "--t");
    return {t, t};
  }
  return {parse_size(text.substr(0, dots), "--t"), parse_size(text.substr(dots + 2), "--t")};
}

Format parse_format(const std::string& name) {
  if (name == "json") return Format::kJson;
  if (name == "csv") return Format::kCsv;
  if (name == "both") return Format::kBoth;
  throw_invalid("--format must be json, csv or both");
}

FeatureFamily require_family(const std::string& name) {
  const auto family = parse_family(name);
  if (!family) throw_invalid("unknown feature family '" + name + "'");
  return *family;
}

unsigned jobs_of(const Common& c) { return c.jobs > 0 ? c.jobs : default_jobs(); }

// Writes a report. Without --out the JSON (or CSV) goes to stdout; with
// --format both, --out names the JSON file and the CSV lands next to it.
void emit(const Common& common, const std::string& json, const std::string& csv,
          std::ostream& out) {
  const Format format = parse_format(common.format);
  if (common.out.empty()) {
    out << (format == Format::kCsv ? csv : json);
    return;
  }
  const fs::path path(common.out);
  switch (format) {
    case Format::kJson:
      write_text(path, json);
      break;
    case Format::kCsv:
      write_text(path, csv);
      break;
    case Format::kBoth: {
      fs::path json_path = path;
      fs::path csv_path = path;
      write_text(json_path.replace_extension(".json"), json);
      write_text(csv_path.replace_extension(".csv"), csv);
      break;
    }
  }
}

TrainOptions train_options(const TrainArgs& a) {
  const auto penalty = parse_penalty(a.penalty);
  if (!penalty) throw_invalid("--penalty must be l1 or l2");
  TrainOptions o;
  o.reg.penalty = *penalty;
  o.reg.C = a.C.value_or(*penalty == Penalty::kL1 ? kDefaultL1C : kDefaultL2C);
  if (a.weights == "balanced") {
    o.weighting = ClassWeighting::kBalanced;
  } else if (a.weights == "uniform") {
    o.weighting = ClassWeighting::kUniform;
  } else {
    throw_invalid("--weights must be balanced or uniform");
  }
  return o;
}

void report_batch(const BatchResult& batch, std::ostream& err) {
  if (batch.excluded_unknown > 0) {
    err << "excluded " << batch.excluded_unknown << " example(s) with unknown label\n";
  }
  for (const auto& f : batch.skipped) {
    err << "skipped " << f.example_id << ": " << f.message << '\n';
  }
  if (!batch.skipped.empty()) err << "skipped " << batch.skipped.size() << " example(s)\n";
}

void cmd_synth(const SynthArgs& a, const Common& common, std::ostream& out) {
  SynthConfig config = a.config;
  std::tie(config.min_len, config.max_len) = parse_range(a.lengths);
  if (!a.norm_shift.empty()) {
    try {
      config.norm_shift = std::stod(a.norm_shift);
    } catch (const std::exception&) {
      throw_invalid("invalid --norm-shift '" + a.norm_shift + "'");
    }
  }
  Dtype dtype;
  if (a.dtype == "f32") {
    dtype = Dtype::kF32;
  } else if (a.dtype == "f16") {
    dtype = Dtype::kF16;
  } else {
    throw_invalid("--dtype must be f32 or f16");
  }
  const SynthDataset dataset = generate(config, jobs_of(common));
  write_dataset(dataset, config, common.out, dtype);
  out << "wrote " << dataset.records.size() << " examples to " << common.out << '\n';
}

void cmd_extract(const ExtractArgs& a, const Common& common, std::ostream& out,
                 std::ostream& err) {
  const FeatureFamily family = require_family(a.family);
  if (family_uses_k(family) && a.k == 0) {
    throw_invalid("--k is required for family '" + a.family + "'");
  }
  const Manifest manifest = Manifest::load(a.manifest);
  const BatchResult batch = batch_features(manifest, family, a.k, jobs_of(common));
  report_batch(batch, err);
  if (batch.matrix.rows == 0) throw_data("no examples left to write");
  save_feature_matrix(common.out, batch.matrix);
  out << "wrote " << batch.matrix.rows << " x " << batch.matrix.cols << " "
      << family_name(family) << " features to " << common.out << '\n';
}

void cmd_train(const TrainArgs& a, const Common& common, std::ostream& out) {
  if (a.features.size() != 1) throw_invalid("train takes exactly one --features file");
  const FeatureMatrix features = load_feature_matrix(a.features.front());
  if (family_is_unsupervised(features.family)) {
    throw_invalid("family '" + std::string(family_name(features.family)) +
                  "' is scored directly and has no probe");
  }
  const ProbeModel model = train(features, train_options(a));
  save_model(common.out, model);
  out << "trained " << penalty_name(model.reg.penalty) << " probe on " << features.rows
      << " examples: " << (model.converged ? "converged" : "not converged") << " after "
      << model.iterations << " iterations\n";
}

void cmd_eval(const TrainArgs& a, const Common& common, bool sweep, std::ostream& out,
              std::ostream& err) {
  EvalConfig base;
  base.train = train_options(a);
  base.n_folds = a.folds;
  base.seed = a.seed;
  const unsigned jobs = jobs_of(common);

  std::vector<EvalReport> reports;
  std::optional<std::size_t> best;
  if (!a.features.empty()) {
    if (!a.manifest.empty() || sweep || !a.sweep.empty()) {
      throw_invalid("--features cannot be combined with --manifest or a k sweep");
    }
    for (const auto& path : a.features) {
      const FeatureMatrix features = load_feature_matrix(path);
      EvalConfig config = base;
      config.family = features.family;
      config.k = features.k;
      reports.push_back(cross_validate(features, config, jobs));
    }
  } else {
    if (a.manifest.empty() || a.family.empty()) {
      throw_invalid("evaluation needs --features, or --manifest with --family");
    }
    const FeatureFamily family = require_family(a.family);
    const Manifest manifest = Manifest::load(a.manifest);
    if (sweep || !a.sweep.empty()) {
      if (!family_uses_k(family)) {
        throw_invalid("family '" + a.family + "' has no top-k parameter to sweep");
      }
      const std::vector<std::size_t> grid = a.sweep.empty() ? kDefaultKGrid : a.sweep;
      SweepResult result = sweep_k(manifest, family, grid, base, jobs);
      reports = std::move(result.reports);
      best = result.best;
    } else {
      if (family_uses_k(family) && a.k == 0) {
        throw_invalid("--k is required for family '" + a.family + "'");
      }
      const BatchResult batch = batch_features(manifest, family, a.k, jobs);
      report_batch(batch, err);
      EvalConfig config = base;
      config.family = family;
      config.k = a.k;
      reports.push_back(cross_validate(batch.matrix, config, jobs));
    }
  }
  for (const auto& r : reports) {
    if (r.unconverged_fits > 0) {
      err << "warning: " << r.unconverged_fits << " fold fit(s) for "
          << family_name(r.config.family) << " did not converge\n";
    }
  }
  emit(common, eval_reports_to_json(reports, best), eval_reports_to_csv(reports), out);
  if (!common.out.empty()) {
    for (const auto& r : reports) {
      out << family_name(r.config.family);
      if (family_uses_k(r.config.family)) out << " k=" << r.config.k;
      out << ": mean AUC " << format_number(r.mean_auc) << " +/- "
          << format_number(r.std_auc) << '\n';
    }
    if (best) out << "best k=" << reports[*best].config.k << '\n';
  }
}

ImportanceReport load_importance(const TrainArgs& a) {
  if (a.model.empty() || a.features.size() != 1) {
    throw_invalid("importance needs --model and one --features file for the column index");
  }
  const ProbeModel model = load_model(a.model);
  const FeatureMatrix features = load_feature_matrix(a.features.front());
  if (features.family != model.family || features.cols != model.coefficients.size()) {
    throw_invalid("feature file does not match the model's family or dimension");
  }
  return importance_report(model, features.columns);
}

void cmd_importance(const TrainArgs& a, const Common& common, std::ostream& out) {
  const ImportanceReport report = load_importance(a);
  emit(common, importance_to_json(report), importance_to_csv(report), out);
  if (!common.out.empty()) {
    out << "important features: " << report.total_important << " of "
        << report.total_features << " (" << format_number(report.percent_important())
        << "%)\n";
  }
}

void cmd_location(const TrainArgs& a, const Common& common, std::ostream& out) {
  if (a.k == 0) throw_invalid("--k is required");
  const Manifest manifest = Manifest::load(a.manifest);
  const SinkLocationReport report = sink_location(manifest, a.k, jobs_of(common));
  emit(common, location_to_json(report), location_to_csv(report), out);
}

void cmd_norms(const TrainArgs& a, const Common& common, std::ostream& out) {
  const ImportanceReport importance = load_importance(a);
  const Manifest manifest = Manifest::load(a.manifest);
  const NormDiagnostic diagnostic = norm_diagnostic(manifest, importance, jobs_of(common));
  emit(common, norms_to_json(diagnostic), norms_to_csv(diagnostic), out);
}

void add_common(CLI::App* cmd, Common& common, bool out_required) {
  cmd->add_option("--jobs", common.jobs, "Worker threads (default: SINKPROBE_JOBS or all cores)");
  auto* out = cmd->add_option("--out", common.out, "Output path");
  if (out_required) out->required();
}

void add_format(CLI::App* cmd, Common& common) {
  cmd->add_option("--format", common.format, "Report format: json, csv or both")
      ->check(CLI::IsMember({"json", "csv", "both"}));
}

void add_probe_options(CLI::App* cmd, TrainArgs& a) {
  cmd->add_option("--penalty", a.penalty, "l1 or l2")->check(CLI::IsMember({"l1", "l2"}));
  cmd->add_option("--C", a.C, "Inverse regularization strength (default 0.75 for l1, 1 for l2)");
  cmd->add_option("--weights", a.weights, "balanced or uniform class weights")
      ->check(CLI::IsMember({"balanced", "uniform"}));
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Attention-sink hallucination probe toolkit", "sinkprobe"};
  app.require_subcommand(1);
  Common common;

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic planted-sink dataset");
  synth_cmd->add_option("--n", synth.config.n_examples, "Number of examples");
  synth_cmd->add_option("--layers", synth.config.num_layers, "Layers");
  synth_cmd->add_option("--heads", synth.config.num_heads, "Heads per layer");
  synth_cmd->add_option("--t", synth.lengths, "Sequence length range MIN..MAX");
  synth_cmd->add_option("--prompt-fraction", synth.config.prompt_fraction);
  synth_cmd->add_option("--gamma", synth.config.concentration, "Row dispersion");
  synth_cmd->add_option("--delta", synth.config.sink_gap, "Planted sink mass");
  synth_cmd->add_option("--planted-layers", synth.config.planted_layers,
                        "1-based layers carrying the planted sink (default: all)")
      ->delimiter(',');
  synth_cmd->add_option("--response-sink-prob", synth.config.response_sink_prob);
  synth_cmd->add_option("--bos-mass", synth.config.bos_mass,
                        "Row mass routed to token 1 in every example");
  synth_cmd->add_option("--norm-shift", synth.norm_shift,
                        "Emit output norms, shifted by this amount in planted class-1 layers");
  synth_cmd->add_option("--dtype", synth.dtype, "f32 or f16")
      ->check(CLI::IsMember({"f32", "f16"}));
  synth_cmd->add_option("--seed", synth.config.seed);
  add_common(synth_cmd, common, true);

  ExtractArgs extract;
  auto* extract_cmd = app.add_subcommand("extract", "Compute a feature matrix over a manifest");
  extract_cmd->add_option("--manifest", extract.manifest)->required();
  extract_cmd->add_option("--family", extract.family)->required();
  extract_cmd->add_option("--k", extract.k, "Top-k for ranked families");
  add_common(extract_cmd, common, true);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Fit a probe on a feature file");
  train_cmd->add_option("--features", train_args.features)->required();
  add_probe_options(train_cmd, train_args);
  add_common(train_cmd, common, true);

  auto add_eval = [&](const char* name, const char* help) {
    auto* cmd = app.add_subcommand(name, help);
    cmd->add_option("--features", train_args.features, "One or more FEAT files");
    cmd->add_option("--manifest", train_args.manifest);
    cmd->add_option("--family", train_args.family);
    cmd->add_option("--k", train_args.k);
    cmd->add_option("--sweep-k", train_args.sweep, "Comma-separated k grid")->delimiter(',');
    cmd->add_option("--seed", train_args.seed, "Fold seed");
    cmd->add_option("--folds", train_args.folds)->check(CLI::Range(2, 1000));
    add_probe_options(cmd, train_args);
    add_common(cmd, common, false);
    add_format(cmd, common);
    return cmd;
  };
  auto* eval_cmd = add_eval("eval", "Cross-validate probes");
  auto* sweep_cmd = add_eval("sweep", "Cross-validate a ranked family over a k grid");

  auto* analyze_cmd = app.add_subcommand("analyze", "Interpretability reports");
  analyze_cmd->require_subcommand(1);
  auto* importance_cmd = analyze_cmd->add_subcommand("importance", "L1 coefficient importance");
  importance_cmd->add_option("--model", train_args.model)->required();
  importance_cmd->add_option("--features", train_args.features, "FEAT file with the column index")
      ->required();
  add_common(importance_cmd, common, false);
  add_format(importance_cmd, common);
  auto* location_cmd = analyze_cmd->add_subcommand("sink-location", "Prompt share of ranked sinks");
  location_cmd->add_option("--manifest", train_args.manifest)->required();
  location_cmd->add_option("--k", train_args.k)->required();
  add_common(location_cmd, common, false);
  add_format(location_cmd, common);
  auto* norms_cmd = analyze_cmd->add_subcommand("norms", "Output norms at important sinks");
  norms_cmd->add_option("--manifest", train_args.manifest)->required();
  norms_cmd->add_option("--model", train_args.model)->required();
  norms_cmd->add_option("--features", train_args.features, "FEAT file with the column index")
      ->required();
  add_common(norms_cmd, common, false);
  add_format(norms_cmd, common);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (synth_cmd->parsed()) {
      cmd_synth(synth, common, out);
    } else if (extract_cmd->parsed()) {
      cmd_extract(extract, common, out, err);
    } else if (train_cmd->parsed()) {
      cmd_train(train_args, common, out);
    } else if (eval_cmd->parsed()) {
      cmd_eval(train_args, common, false, out, err);
    } else if (sweep_cmd->parsed()) {
      cmd_eval(train_args, common, true, out, err);
    } else if (importance_cmd->parsed()) {
      cmd_importance(train_args, common, out);
    } else if (location_cmd->parsed()) {
      cmd_location(train_args, common, out);
    } else if (norms_cmd->parsed()) {
      cmd_norms(train_args, common, out);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    switch (e.kind()) {
      case ErrorKind::kInvalidArgument:
        return kUsage;
      case ErrorKind::kData:
        return kDataError;
      case ErrorKind::kMissingCapability:
        return kMissingCapability;
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kOk;
}

}  // namespace sinkprobe::cli
