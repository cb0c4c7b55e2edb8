#include "sinkprobe/reports.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <nlohmann/json.hpp>
#include <sstream>

#include "sinkprobe/error.hpp"

namespace sinkprobe {
namespace {

using Json = nlohmann::ordered_json;

Json optional_number(const std::optional<double>& v) {
  return v ? Json(*v) : Json(nullptr);
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

Json eval_json(const EvalReport& r) {
  Json config;
  config["family"] = family_name(r.config.family);
  if (family_uses_k(r.config.family)) {
    config["k"] = r.config.k;
  } else {
    config["k"] = nullptr;
  }
  if (family_is_unsupervised(r.config.family)) {
    config["penalty"] = nullptr;
    config["C"] = nullptr;
  } else {
    config["penalty"] = penalty_name(r.config.train.reg.penalty);
    config["C"] = r.config.train.reg.C;
  }
  config["class_weight"] =
      r.config.train.weighting == ClassWeighting::kBalanced ? "balanced" : "uniform";
  config["n_folds"] = r.config.n_folds;
  config["seed"] = r.config.seed;

  Json j;
  j["config"] = config;
  j["fold_auc"] = r.fold_auc;
  j["mean_auc"] = r.mean_auc;
  j["std_auc"] = r.std_auc;
  j["unconverged_fits"] = r.unconverged_fits;
  Json map = Json::object();
  for (const auto& f : r.fold_map) map[f.example_id] = f.fold + 1;
  j["fold_map"] = map;
  return j;
}

}  // namespace

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

std::string_view penalty_name(Penalty penalty) {
  return penalty == Penalty::kL1 ? "l1" : "l2";
}

std::optional<Penalty> parse_penalty(std::string_view name) {
  if (name == "l1") return Penalty::kL1;
  if (name == "l2") return Penalty::kL2;
  return std::nullopt;
}

std::string model_to_json(const ProbeModel& m) {
  Json j;
  j["family"] = family_name(m.family);
  j["k"] = m.k;
  j["penalty"] = penalty_name(m.reg.penalty);
  j["C"] = m.reg.C;
  j["mu"] = m.standardizer.mean;
  j["sigma"] = m.standardizer.scale;
  j["beta"] = m.coefficients;
  j["intercept"] = m.intercept;
  j["converged"] = m.converged;
  j["iterations"] = m.iterations;
  return dump(j);
}

ProbeModel model_from_json(std::string_view text) {
  ProbeModel m;
  try {
    const Json j = Json::parse(text);
    const auto family = parse_family(j.at("family").get<std::string>());
    if (!family) throw_data("model names an unknown feature family");
    m.family = *family;
    m.k = j.at("k").get<std::size_t>();
    const auto penalty = parse_penalty(j.at("penalty").get<std::string>());
    if (!penalty) throw_data("model names an unknown penalty");
    m.reg.penalty = *penalty;
    m.reg.C = j.at("C").get<double>();
    m.standardizer.mean = j.at("mu").get<std::vector<double>>();
    m.standardizer.scale = j.at("sigma").get<std::vector<double>>();
    m.coefficients = j.at("beta").get<std::vector<double>>();
    m.intercept = j.at("intercept").get<double>();
    m.converged = j.at("converged").get<bool>();
    m.iterations = j.at("iterations").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw_data(std::string("malformed model file: ") + e.what());
  }
  const std::size_t d = m.coefficients.size();
  if (m.standardizer.mean.size() != d || m.standardizer.scale.size() != d) {
    throw_data("model file has mismatched mu, sigma and beta lengths");
  }
  m.standardizer.constant.assign(d, false);
  return m;
}

void save_model(const std::filesystem::path& path, const ProbeModel& model) {
  write_text(path, model_to_json(model));
}

ProbeModel load_model(const std::filesystem::path& path) {
  try {
    return model_from_json(read_text(path));
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

std::string eval_reports_to_json(std::span<const EvalReport> reports,
                                 std::optional<std::size_t> best) {
  Json j;
  Json list = Json::array();
  for (const auto& r : reports) list.push_back(eval_json(r));
  j["reports"] = list;
  if (best) {
    j["best"] = {{"family", family_name(reports[*best].config.family)},
                 {"k", reports[*best].config.k},
                 {"mean_auc", reports[*best].mean_auc}};
  }
  return dump(j);
}

std::string eval_reports_to_csv(std::span<const EvalReport> reports) {
  std::ostringstream out;
  out << "family,k,fold,auc\n";
  for (const auto& r : reports) {
    const std::string prefix = std::string(family_name(r.config.family)) + "," +
                               (family_uses_k(r.config.family) ? std::to_string(r.config.k) : "") +
                               ",";
    for (std::size_t f = 0; f < r.fold_auc.size(); ++f) {
      out << prefix << (f + 1) << ',' << format_number(r.fold_auc[f]) << '\n';
    }
    out << prefix << "mean," << format_number(r.mean_auc) << '\n';
    out << prefix << "std," << format_number(r.std_auc) << '\n';
  }
  return out.str();
}

std::string importance_to_json(const ImportanceReport& r) {
  Json j;
  j["total_features"] = r.total_features;
  j["total_important"] = r.total_important;
  j["percent_important"] = r.percent_important();
  Json features = Json::array();
  for (const auto& f : r.important) {
    Json e;
    e["col"] = f.column;
    e["layer"] = f.id.layer;
    e["head"] = f.id.head;
    e["rank"] = f.id.rank;
    e["beta"] = f.coefficient;
    e["odds_ratio"] = f.odds_ratio;
    features.push_back(e);
  }
  j["important"] = features;
  j["layer_importance"] = r.layer_importance;
  Json bins = Json::array();
  for (std::size_t b = 0; b < r.depth_bins.size(); ++b) {
    bins.push_back({{"depth_lo", static_cast<double>(b) * kDepthBinWidth},
                    {"depth_hi", static_cast<double>(b + 1) * kDepthBinWidth},
                    {"mean_importance", optional_number(r.depth_bins[b])}});
  }
  j["depth_bins"] = bins;
  return dump(j);
}

std::string importance_to_csv(const ImportanceReport& r) {
  std::vector<std::size_t> counts(r.num_layers, 0);
  for (const auto& f : r.important) {
    if (f.id.layer > 0 && f.id.layer <= r.num_layers) ++counts[f.id.layer - 1];
  }
  std::ostringstream out;
  out << "layer,relative_depth,importance,important_features\n";
  for (std::size_t l = 0; l < r.num_layers; ++l) {
    out << (l + 1) << ','
        << format_number(static_cast<double>(l + 1) / static_cast<double>(r.num_layers))
        << ',' << format_number(r.layer_importance[l]) << ',' << counts[l] << '\n';
  }
  return out.str();
}

std::string location_to_json(const SinkLocationReport& r) {
  Json j;
  j["examples"] = r.examples;
  Json ranks = Json::array();
  for (std::size_t k = 0; k < r.prompt_frequency.size(); ++k) {
    ranks.push_back({{"rank", k}, {"prompt_frequency", optional_number(r.prompt_frequency[k])}});
  }
  j["ranks"] = ranks;
  return dump(j);
}

std::string location_to_csv(const SinkLocationReport& r) {
  std::ostringstream out;
  out << "rank,prompt_frequency\n";
  for (std::size_t k = 0; k < r.prompt_frequency.size(); ++k) {
    out << k << ',';
    if (r.prompt_frequency[k]) out << format_number(*r.prompt_frequency[k]);
    out << '\n';
  }
  return out.str();
}

std::string norms_to_json(const NormDiagnostic& d) {
  Json j;
  Json layers = Json::array();
  for (const auto& l : d.layers) {
    Json e;
    e["layer"] = l.layer;
    e["importance"] = l.importance;
    e["defined"] = l.defined;
    if (l.defined) {
      e["mean_hallucinated"] = l.mean_hallucinated;
      e["mean_non_hallucinated"] = l.mean_non_hallucinated;
      e["difference"] = l.difference;
      e["standard_error"] = l.standard_error;
    } else {
      e["mean_hallucinated"] = nullptr;
      e["mean_non_hallucinated"] = nullptr;
      e["difference"] = nullptr;
      e["standard_error"] = nullptr;
    }
    e["n_hallucinated"] = l.n_hallucinated;
    e["n_non_hallucinated"] = l.n_non_hallucinated;
    layers.push_back(e);
  }
  j["layers"] = layers;
  return dump(j);
}

std::string norms_to_csv(const NormDiagnostic& d) {
  std::ostringstream out;
  out << "layer,importance,difference,standard_error,mean_hallucinated,"
         "mean_non_hallucinated\n";
  for (const auto& l : d.layers) {
    out << l.layer << ',' << format_number(l.importance) << ',';
    if (l.defined) {
      out << format_number(l.difference) << ',' << format_number(l.standard_error) << ','
          << format_number(l.mean_hallucinated) << ','
          << format_number(l.mean_non_hallucinated);
    } else {
      out << ",,,";
    }
    out << '\n';
  }
  return out.str();
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_data("cannot open " + path.string() + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw_data("failed writing " + path.string());
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data("cannot open " + path.string());
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace sinkprobe
