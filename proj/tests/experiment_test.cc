/*
 * Copyright 2026 The FSIW Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "fsiw/experiment.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "fsiw/errors.h"

namespace fsiw {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<ClickRecord> EvenlySpaced(Timestamp start, Timestamp end, Duration step) {
  std::vector<ClickRecord> records;
  for (Timestamp t = start; t < end; t += step) {
    ClickRecord r;
    r.click_ts = t;
    records.push_back(r);
  }
  return records;
}

json SmallExperiment() {
  return json::parse(R"({
    "simulator": {"n_samples": 20000, "n_fields": 3, "cardinality": 6,
                  "mean_delay": "2d", "time_span": "10d"},
    "hashing": {"dim": 4096},
    "split": {"train_window": "7d", "test_window": "1d", "n_splits": 2},
    "fsiw": {"tau": "2d"},
    "metrics": {"bootstrap": 100}
  })");
}

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

fs::path TempDir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("fsiw_test_" + name);
  fs::remove_all(dir);
  return dir;
}

TEST(ParseDurationTest, Units) {
  EXPECT_EQ(ParseDuration(json(45)), 45);
  EXPECT_EQ(ParseDuration(json("45")), 45);
  EXPECT_EQ(ParseDuration(json("45s")), 45);
  EXPECT_EQ(ParseDuration(json("15m")), 900);
  EXPECT_EQ(ParseDuration(json("6h")), 6 * kHour);
  EXPECT_EQ(ParseDuration(json("7d")), 7 * kDay);
  EXPECT_EQ(ParseDuration(json("2w")), 14 * kDay);
  EXPECT_EQ(ParseDuration(json("1.5d")), 36 * kHour);
  EXPECT_THROW(ParseDuration(json("abc")), ConfigError);
  EXPECT_THROW(ParseDuration(json("")), ConfigError);
  EXPECT_THROW(ParseDuration(json::array()), ConfigError);
}

TEST(ConfigTest, DefaultsParse) {
  const ExperimentConfig config = ParseConfig(json::object());
  EXPECT_EQ(config.split.train_window, 21 * kDay);
  EXPECT_EQ(config.tau, 7 * kDay);
  EXPECT_EQ(config.hashing.dim, 1u << 17);
  EXPECT_EQ(config.trainers.size(), 3u);
  EXPECT_EQ(config.l2, 100.0);
  EXPECT_EQ(config.simulator.cvr_weights.size(), 64u);
}

TEST(ConfigTest, Overrides) {
  const std::vector<std::string> overrides = {"train.l2=5", "split.train_window=14d",
                                              "trainers=[\"dfm\"]", "seed=9",
                                              "train.optimizer.method=gd"};
  const ExperimentConfig config = ParseConfig(json::object(), overrides);
  EXPECT_EQ(config.l2, 5.0);
  EXPECT_EQ(config.split.train_window, 14 * kDay);
  ASSERT_EQ(config.trainers.size(), 1u);
  EXPECT_EQ(config.trainers[0], TrainerKind::kDfm);
  EXPECT_EQ(config.seed, 9u);
  EXPECT_EQ(config.optimizer.method, OptimizerMethod::kGradientDescent);
  EXPECT_EQ(config.effective["train"]["l2"], 5);
}

TEST(ConfigTest, Errors) {
  EXPECT_THROW(ParseConfig(json::parse(R"({"train": {"l3": 1}})")), ConfigError);
  const std::vector<std::string> unknown = {"train.nope=1"};
  EXPECT_THROW(ParseConfig(json::object(), unknown), ConfigError);
  const std::vector<std::string> malformed = {"train.l2"};
  EXPECT_THROW(ParseConfig(json::object(), malformed), ConfigError);
  const std::vector<std::string> long_tau = {"fsiw.tau=21d"};
  EXPECT_THROW(ParseConfig(json::object(), long_tau), ConfigError);
  const std::vector<std::string> bad_dim = {"hashing.dim=1000"};
  EXPECT_THROW(ParseConfig(json::object(), bad_dim), ConfigError);
  const std::vector<std::string> bad_trainer = {"trainers=[\"xgb\"]"};
  EXPECT_THROW(ParseConfig(json::object(), bad_trainer), ConfigError);
  const std::vector<std::string> wrong_type = {"train.l2=\"high\""};
  EXPECT_THROW(ParseConfig(json::object(), wrong_type), ConfigError);
}

TEST(ConfigTest, HashIsStable) {
  const ExperimentConfig a = ParseConfig(SmallExperiment());
  const ExperimentConfig b = ParseConfig(SmallExperiment());
  EXPECT_EQ(ConfigHash(a), ConfigHash(b));
  const std::vector<std::string> other = {"seed=1"};
  EXPECT_NE(ConfigHash(a), ConfigHash(ParseConfig(SmallExperiment(), other)));
}

TEST(RollingSplitsTest, SevenSplitsOverFourWeeks) {
  const auto records = EvenlySpaced(0, 28 * kDay, kHour);
  SplitSpec spec;
  const auto splits = RollingSplits(records, spec, 0, 28 * kDay);
  ASSERT_EQ(splits.size(), 7u);
  for (int k = 0; k < 7; ++k) {
    const Split& s = splits[k];
    EXPECT_EQ(s.train_start, k * kDay);
    EXPECT_EQ(s.train_end, k * kDay + 21 * kDay);
    EXPECT_EQ(s.observation_time, s.train_end);
    EXPECT_EQ(s.test_end, s.train_end + kDay);
    EXPECT_EQ(s.train.size(), 21u * 24u);
    EXPECT_EQ(s.test.size(), 24u);
    EXPECT_TRUE(s.validation.empty());
    for (const auto i : s.train) {
      EXPECT_GE(records[i].click_ts, s.train_start);
      EXPECT_LT(records[i].click_ts, s.train_end);
    }
    for (const auto i : s.test) {
      EXPECT_GE(records[i].click_ts, s.train_end);
      EXPECT_LT(records[i].click_ts, s.test_end);
    }
  }
}

TEST(RollingSplitsTest, SpanEdgeCases) {
  const auto records = EvenlySpaced(0, 22 * kDay, kHour);
  SplitSpec spec;
  spec.stride = 5 * kDay;
  EXPECT_EQ(RollingSplits(records, spec, 0, 22 * kDay).size(), 1u);
  EXPECT_THROW(RollingSplits(records, spec, 0, 22 * kDay - 1), ConfigError);
  spec.n_splits = 1;
  EXPECT_EQ(RollingSplits(EvenlySpaced(0, 40 * kDay, kHour), spec, 0, 40 * kDay).size(), 1u);
}

TEST(RollingSplitsTest, ValidationWindow) {
  const auto records = EvenlySpaced(0, 10 * kDay, kHour);
  SplitSpec spec;
  spec.train_window = 7 * kDay;
  spec.validation_window = kDay;
  const auto splits = RollingSplits(records, spec, 0, 10 * kDay);
  ASSERT_EQ(splits.size(), 2u);
  EXPECT_EQ(splits[0].observation_time, 8 * kDay);
  EXPECT_EQ(splits[0].validation.size(), 24u);
  EXPECT_EQ(splits[0].test.size(), 24u);
  EXPECT_GE(records[splits[0].test.front()].click_ts, 8 * kDay);
}

TEST(CheckProvenanceTest, RejectsLeaks) {
  auto records = EvenlySpaced(0, 10 * kDay, kHour);
  records[5].conv_ts = records[5].click_ts + 3 * kDay;
  SplitSpec spec;
  spec.train_window = 7 * kDay;
  const auto splits = RollingSplits(records, spec, 0, 10 * kDay);
  const auto features = HashAll(records, {1u << 4, 0});
  const Split& split = splits[0];
  auto samples = SnapshotLabels(records, features, split.train, split.observation_time);
  EXPECT_NO_THROW(CheckProvenance(split, records, samples));

  auto with_test = samples;
  with_test.push_back(samples.front());
  with_test.back().source = split.test.front();
  EXPECT_THROW(CheckProvenance(split, records, with_test), Error);

  // A label that could only be known after the observation time.
  auto leaked = samples;
  records[10].conv_ts = split.observation_time + 1;
  leaked[10].y = 1;
  EXPECT_THROW(CheckProvenance(split, records, leaked), Error);
}

TEST(PipelineTest, DeterministicOutputs) {
  const fs::path a = TempDir("det_a");
  const fs::path b = TempDir("det_b");
  std::vector<std::string> oa = {"output_dir=\"" + a.string() + "\""};
  std::vector<std::string> ob = {"output_dir=\"" + b.string() + "\""};
  const auto ra = RunPipeline(ParseConfig(SmallExperiment(), oa));
  const auto rb = RunPipeline(ParseConfig(SmallExperiment(), ob));
  ASSERT_EQ(ra.reports.size(), 6u);
  EXPECT_EQ(ra.n_splits, 2);
  for (const auto* name : {"reports.csv", "reports.json", "summary.csv",
                           "split_000/report.csv", "split_001/lr_fsiw.model",
                           "split_000/weights.tsv", "split_001/dfm.predictions.tsv"}) {
    EXPECT_FALSE(ReadFile(a / name).empty()) << name;
    EXPECT_EQ(ReadFile(a / name), ReadFile(b / name)) << name;
  }
  // The manifest differs only through output_dir.
  const json ma = json::parse(ReadFile(a / "manifest.json"));
  EXPECT_EQ(ma["seed"], 0);
  EXPECT_EQ(ma["tool"], "fsiw");
  EXPECT_EQ(ma["config"]["split"]["n_splits"], 2);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(PipelineTest, ThreadCountDoesNotChangeReports) {
  std::vector<std::string> threads = {"threads=2"};
  const auto one = RunPipeline(ParseConfig(SmallExperiment()));
  const auto two = RunPipeline(ParseConfig(SmallExperiment(), threads));
  ASSERT_EQ(one.reports.size(), two.reports.size());
  for (std::size_t i = 0; i < one.reports.size(); ++i) {
    EXPECT_EQ(ToCsvRow(one.reports[i]), ToCsvRow(two.reports[i]));
  }
}

TEST(PipelineTest, ReportSchemaIndependentOfTrainers) {
  const fs::path dir = TempDir("schema");
  std::vector<std::string> overrides = {"trainers=[\"dfm\"]",
                                        "output_dir=\"" + dir.string() + "\""};
  RunPipeline(ParseConfig(SmallExperiment(), overrides));
  const std::string csv = ReadFile(dir / "reports.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), EvalReportCsvHeader());
  fs::remove_all(dir);
}

TEST(PipelineTest, NoDelayMakesWeightingANoOp) {
  json config = SmallExperiment();
  config["simulator"]["mean_delay"] = "1s";
  config["simulator"]["rate_weight_scale"] = 0.0;
  config["trainers"] = {"naive_lr", "lr_fsiw"};
  const auto result = RunPipeline(ParseConfig(config));
  for (std::size_t i = 0; i < result.reports.size(); i += 2) {
    EXPECT_EQ(result.reports[i].trainer, "naive_lr");
    EXPECT_NEAR(result.reports[i].ll, result.reports[i + 1].ll, 1e-4);
  }
}

TEST(PipelineTest, OracleWeightsBeatNaiveUnderHeavyDelay) {
  json config = SmallExperiment();
  config["simulator"]["n_samples"] = 60000;
  config["simulator"]["mean_delay"] = "3d";
  config["fsiw"]["weight_source"] = "oracle";
  config["trainers"] = {"naive_lr", "lr_fsiw"};
  const auto result = RunPipeline(ParseConfig(config));
  for (std::size_t i = 0; i < result.reports.size(); i += 2) {
    EXPECT_LT(result.reports[i + 1].ll, result.reports[i].ll);
  }
}

TEST(PipelineTest, OracleWithoutTruthNamesSplitAndTrainer) {
  const ExperimentConfig config = ParseConfig(SmallExperiment(),
                                              std::vector<std::string>{
                                                  "fsiw.weight_source=oracle"});
  Dataset dataset = LoadDataset(config);
  dataset.has_truth = false;
  try {
    RunPipeline(config, dataset);
    FAIL();
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    EXPECT_NE(what.find("split 0"), std::string::npos) << what;
    EXPECT_NE(what.find("trainer lr_fsiw"), std::string::npos) << what;
  }
}

TEST(SweepTest, SingletonMatchesPipeline) {
  std::vector<std::string> only_fsiw = {"trainers=[\"lr_fsiw\"]", "fsiw.tau=3d"};
  const ExperimentConfig config = ParseConfig(SmallExperiment(), only_fsiw);
  const Dataset dataset = LoadDataset(config);
  const auto pipeline = RunPipeline(config, dataset);
  const std::vector<Duration> taus = {3 * kDay};
  const auto sweep = DeadlineSweep(config, dataset, taus);
  ASSERT_EQ(sweep.size(), 1u);
  ASSERT_EQ(sweep[0].reports.size(), pipeline.reports.size());
  for (std::size_t i = 0; i < pipeline.reports.size(); ++i) {
    EXPECT_EQ(ToCsvRow(sweep[0].reports[i]), ToCsvRow(pipeline.reports[i]));
  }
  const std::vector<Duration> too_long = {7 * kDay};
  EXPECT_THROW(DeadlineSweep(config, dataset, too_long), ConfigError);
}

TEST(TsvSourceTest, ObservationMarginIsEnforced) {
  const fs::path dir = TempDir("tsv");
  fs::create_directories(dir);
  const ExperimentConfig sim_config = ParseConfig(SmallExperiment());
  const auto samples = GenerateDataset(sim_config.simulator);
  {
    std::ofstream out(dir / "log.tsv");
    // Logs stop at day 12; later conversions are not recorded.
    std::vector<ClickRecord> records;
    for (const auto& s : samples) {
      records.push_back(s.record);
      if (s.record.conv_ts && *s.record.conv_ts >= 12 * kDay) records.back().conv_ts.reset();
    }
    WriteRecords(out, records);
    std::ofstream truth(dir / "truth.tsv");
    WriteTruth(truth, samples);
  }
  json config = SmallExperiment();
  config["data"] = {{"source", "tsv"}, {"path", (dir / "log.tsv").string()},
                    {"observation_margin", "30d"}};
  config["schema"] = {{"n_fields", 3}};
  config["split"]["start_ts"] = 0;
  EXPECT_THROW(RunPipeline(ParseConfig(config)), ConfigError);

  config["data"]["observation_margin"] = "1h";
  config["trainers"] = {"naive_lr"};
  EXPECT_NO_THROW(RunPipeline(ParseConfig(config)));

  // With a truth file the simulator labels are used and no margin applies.
  config["data"]["observation_margin"] = "30d";
  config["data"]["truth_path"] = (dir / "truth.tsv").string();
  const auto from_tsv = RunPipeline(ParseConfig(config));
  std::vector<std::string> naive_only = {"trainers=[\"naive_lr\"]"};
  const auto from_sim = RunPipeline(ParseConfig(SmallExperiment(), naive_only));
  ASSERT_EQ(from_tsv.reports.size(), from_sim.reports.size());
  for (std::size_t i = 0; i < from_sim.reports.size(); ++i) {
    EXPECT_EQ(from_tsv.reports[i].mean_label, from_sim.reports[i].mean_label);
    EXPECT_EQ(from_tsv.reports[i].n_test, from_sim.reports[i].n_test);
  }
  fs::remove_all(dir);
}

}  // namespace
}  // namespace fsiw
