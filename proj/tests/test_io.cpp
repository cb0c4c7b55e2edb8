#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "sinkprobe/atns.hpp"
#include "sinkprobe/evaluation.hpp"
#include "sinkprobe/extraction.hpp"
#include "sinkprobe/parallel.hpp"
#include "sinkprobe/reports.hpp"
#include "sinkprobe/sink_features.hpp"
#include "sinkprobe/synth.hpp"
#include "support.hpp"

using namespace sinkprobe;
using test_support::error_kind;

namespace {

SynthConfig tiny() {
  SynthConfig c;
  c.n_examples = 20;
  c.num_layers = 2;
  c.num_heads = 2;
  c.min_len = 6;
  c.max_len = 10;
  return c;
}

}  // namespace

TEST(Synth, RejectsInfeasibleConfigs) {
  auto c = tiny();
  c.min_len = 12;
  EXPECT_EQ(error_kind([&] { validate_config(c); }), ErrorKind::kInvalidArgument);
  c = tiny();
  c.prompt_fraction = 1.0;
  EXPECT_EQ(error_kind([&] { validate_config(c); }), ErrorKind::kInvalidArgument);
  c = tiny();
  c.min_len = 1;
  EXPECT_EQ(error_kind([&] { validate_config(c); }), ErrorKind::kInvalidArgument);
  c = tiny();
  c.planted_layers = {3};
  EXPECT_EQ(error_kind([&] { validate_config(c); }), ErrorKind::kInvalidArgument);
  c = tiny();
  c.sink_gap = -0.1;
  EXPECT_EQ(error_kind([&] { validate_config(c); }), ErrorKind::kInvalidArgument);
  c = tiny();
  c.n_examples = 1;
  EXPECT_EQ(error_kind([&] { validate_config(c); }), ErrorKind::kInvalidArgument);
  EXPECT_FALSE(error_kind([] { validate_config(tiny()); }).has_value());
}

TEST(Synth, BalancedValidAndDeterministic) {
  const auto a = generate(tiny());
  const auto b = generate(tiny(), 4);
  ASSERT_EQ(a.records.size(), 20u);
  std::size_t positives = 0;
  for (std::size_t i = 0; i < 20; ++i) {
    const auto& r = a.records[i];
    EXPECT_NO_THROW(check_record(r));
    EXPECT_GE(r.seq_len, 6u);
    EXPECT_LE(r.seq_len, 10u);
    EXPECT_EQ(r.prompt_len, static_cast<std::size_t>(std::lround(0.5 * double(r.seq_len))));
    EXPECT_EQ(r.attention, b.records[i].attention);
    EXPECT_EQ(r.example_id, a.manifest.entries()[i].id);
    EXPECT_EQ(r.label, a.manifest.entries()[i].label);
    positives += r.label == Label::kHallucinated ? 1 : 0;
  }
  EXPECT_EQ(positives, 10u);
  auto other = tiny();
  other.seed = 8;
  EXPECT_NE(generate(other).records[0].attention, a.records[0].attention);
}

TEST(Synth, FirstTokenSinkGrowsWithGap) {
  std::vector<SynthDataset> sets;
  for (double gap : {0.0, 0.1, 0.3}) {
    auto c = tiny();
    c.sink_gap = gap;
    sets.push_back(generate(c));
  }
  for (std::size_t i = 0; i < 20; ++i) {
    const auto s0 = sink_scores(sets[0].records[i]).scores[0];
    const auto s1 = sink_scores(sets[1].records[i]).scores[0];
    const auto s2 = sink_scores(sets[2].records[i]).scores[0];
    if (sets[0].records[i].label == Label::kHallucinated) {
      EXPECT_GT(s1, s0);
      EXPECT_GT(s2, s1);
    } else {
      EXPECT_EQ(s0, s1);
      EXPECT_EQ(s1, s2);
    }
  }
}

TEST(Synth, NormShiftOnlyInPlantedLayers) {
  auto c = tiny();
  c.planted_layers = {2};
  c.norm_shift = 5.0;
  const auto data = generate(c);
  for (const auto& r : data.records) {
    ASSERT_TRUE(r.has_output_norms());
    const bool shifted = r.label == Label::kHallucinated;
    for (float v : r.norms(0, 0)) EXPECT_LT(v, 5.0f);
    for (float v : r.norms(1, 1)) EXPECT_EQ(v >= 5.0f, shifted);
  }
}

TEST(Synth, WrittenDatasetLoadsBack) {
  const auto dir = test_support::scratch_dir("synth_write");
  const auto data = generate(tiny());
  write_dataset(data, tiny(), dir);
  const auto manifest = Manifest::load(dir / "manifest.jsonl");
  ASSERT_EQ(manifest.size(), 20u);
  EXPECT_EQ(manifest.load_record(3).attention, data.records[3].attention);
  EXPECT_TRUE(std::filesystem::exists(dir / "synth_config.json"));
  const auto config = nlohmann::json::parse(read_text(dir / "synth_config.json"));
  EXPECT_EQ(config["seed"], 7);
}

TEST(Feat, RoundTripWithSidecars) {
  const auto dir = test_support::scratch_dir("feat");
  const auto data = generate(tiny());
  const auto m = batch_features(data.records, FeatureFamily::kSink, 3).matrix;
  save_feature_matrix(dir / "x.feat", m);
  EXPECT_TRUE(std::filesystem::exists(index_sidecar_path(dir / "x.feat")));
  EXPECT_TRUE(std::filesystem::exists(ids_sidecar_path(dir / "x.feat")));
  const auto back = load_feature_matrix(dir / "x.feat");
  EXPECT_EQ(back.rows, m.rows);
  EXPECT_EQ(back.cols, m.cols);
  EXPECT_EQ(back.k, 3u);
  EXPECT_EQ(back.family, FeatureFamily::kSink);
  EXPECT_EQ(back.labels, m.labels);
  EXPECT_EQ(back.example_ids, m.example_ids);
  EXPECT_EQ(back.columns, m.columns);
  for (std::size_t i = 0; i < m.values.size(); ++i) {
    EXPECT_EQ(back.values[i], static_cast<double>(static_cast<float>(m.values[i])));
  }
  auto bytes = encode_feat(m);
  bytes.pop_back();
  EXPECT_EQ(error_kind([&] { decode_feat(bytes); }), ErrorKind::kData);
}

TEST(Reports, ModelJsonRoundTrip) {
  ProbeModel model;
  model.family = FeatureFamily::kLapEigval;
  model.k = 4;
  model.reg = {Penalty::kL1, 0.75};
  model.standardizer.mean = {0.1, -2.5};
  model.standardizer.scale = {1.0 / 3.0, 1.0};
  model.standardizer.constant = {false, true};
  model.coefficients = {0.123456789012345, 0.0};
  model.intercept = -1e-300;
  model.converged = true;
  model.iterations = 17;
  const auto back = model_from_json(model_to_json(model));
  EXPECT_EQ(back.family, model.family);
  EXPECT_EQ(back.k, 4u);
  EXPECT_EQ(back.reg.penalty, Penalty::kL1);
  EXPECT_EQ(back.reg.C, 0.75);
  EXPECT_EQ(back.standardizer.mean, model.standardizer.mean);
  EXPECT_EQ(back.standardizer.scale, model.standardizer.scale);
  EXPECT_EQ(back.coefficients, model.coefficients);
  EXPECT_EQ(back.intercept, model.intercept);
  EXPECT_EQ(back.iterations, 17u);
  EXPECT_EQ(model_to_json(back), model_to_json(model));
  EXPECT_EQ(error_kind([] { model_from_json("{\"family\": 3}"); }), ErrorKind::kData);
  EXPECT_EQ(error_kind([] { model_from_json("[1,"); }), ErrorKind::kData);
}

TEST(Reports, EvalJsonUsesOneBasedFolds) {
  EvalReport r;
  r.config.family = FeatureFamily::kSink;
  r.config.k = 5;
  r.fold_auc = {1.0, 0.5};
  r.mean_auc = 0.75;
  r.std_auc = 0.25;
  r.fold_map = {{"a", 0}, {"b", 1}};
  const std::vector<EvalReport> reports = {r};
  const auto j = nlohmann::json::parse(eval_reports_to_json(reports, 0));
  EXPECT_EQ(j["reports"][0]["fold_map"]["a"], 1);
  EXPECT_EQ(j["reports"][0]["fold_map"]["b"], 2);
  EXPECT_EQ(j["reports"][0]["config"]["family"], "sink");
  EXPECT_EQ(j["best"]["k"], 5);
  const auto csv = eval_reports_to_csv(reports);
  EXPECT_EQ(csv, "family,k,fold,auc\nsink,5,1,1\nsink,5,2,0.5\nsink,5,mean,0.75\nsink,5,std,0.25\n");
}

TEST(Reports, NumberFormatting) {
  EXPECT_EQ(format_number(0.1), "0.1");
  EXPECT_EQ(format_number(1.0), "1");
  EXPECT_EQ(format_number(-2.5e-10), "-2.5e-10");
  EXPECT_EQ(format_number(NAN), "nan");
  EXPECT_EQ(format_number(INFINITY), "inf");
  EXPECT_EQ(std::stod(format_number(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(Reports, PenaltyNames) {
  EXPECT_EQ(parse_penalty(penalty_name(Penalty::kL1)), Penalty::kL1);
  EXPECT_EQ(parse_penalty("l2"), Penalty::kL2);
  EXPECT_FALSE(parse_penalty("l3").has_value());
}

TEST(Parallel, EveryIndexOnceAndLowestErrorWins) {
  for (unsigned jobs : {1u, 2u, 5u}) {
    std::vector<std::atomic<int>> hits(100);
    parallel_for(100, jobs, [&](std::size_t i) { ++hits[i]; });
    for (auto& h : hits) ASSERT_EQ(h.load(), 1);
    try {
      parallel_for(50, jobs, [](std::size_t i) {
        if (i % 10 == 7) throw std::runtime_error(std::to_string(i));
      });
      FAIL() << "expected an exception";
    } catch (const std::runtime_error& e) {
      EXPECT_STREQ(e.what(), "7");
    }
  }
}
