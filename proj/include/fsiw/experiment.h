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

// End-to-end experiments: rolling train/test splits, snapshot labeling,
// importance weight estimation, CVR training and evaluation.
//
// Configuration is a JSON document. Every field has a default (see
// DefaultConfigJson()) and may be overridden by a dotted path such as
// "train.l2=50" or "split.train_window=14d". Durations are either numbers of
// seconds or strings with an s/m/h/d/w suffix.

#ifndef FSIW_EXPERIMENT_H_
#define FSIW_EXPERIMENT_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "fsiw/core_data.h"
#include "fsiw/cvr_training.h"
#include "fsiw/evaluation.h"
#include "fsiw/optimizer.h"
#include "fsiw/simulator.h"
#include "fsiw/weight_estimation.h"

namespace fsiw {

enum class TrainerKind { kNaiveLr, kLrFsiw, kDfm };
std::string ToString(TrainerKind trainer);
TrainerKind ParseTrainer(const std::string& name);

// Where the LR-FSIW weights come from. kOracle needs simulator truth.
enum class WeightSource { kEstimated, kOracle };

struct SplitSpec {
  Duration train_window = 21 * kDay;
  Duration test_window = kDay;
  Duration stride = kDay;
  int n_splits = 0;  // 0: as many as fit in the data span.
  Duration validation_window = 0;
  std::optional<Timestamp> start;
};

struct DataSourceConfig {
  enum class Kind { kSimulator, kTsv };
  Kind kind = Kind::kSimulator;
  std::string path;
  std::string truth_path;
  // How long a click must be tracked before its label is final (TSV only).
  Duration observation_margin = 30 * kDay;
  std::optional<Timestamp> start_ts;
  std::optional<Timestamp> end_ts;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  int threads = 1;
  std::string output_dir;
  DataSourceConfig data;
  Schema schema;
  SimConfig simulator;
  HashConfig hashing;
  SplitSpec split;

  Duration tau = 7 * kDay;
  std::vector<Duration> sweep_taus;
  double clip_floor = 0.01;
  WeightSource weight_source = WeightSource::kEstimated;
  WeightModelConfig weight_pos;
  WeightModelConfig weight_neg;

  std::vector<TrainerKind> trainers = {TrainerKind::kNaiveLr,
                                       TrainerKind::kLrFsiw, TrainerKind::kDfm};
  // Coefficient on the summed loss when l2_scale_by_n is set and the
  // normalization is "mean" (the optimizer then sees l2 / n).
  double l2 = 100.0;
  bool l2_scale_by_n = true;
  OptimizerConfig optimizer;
  EvalConfig metrics;

  bool dump_artificial = false;
  bool dump_predictions = true;
  bool dump_models = true;
  bool dump_weights = true;

  // The fully resolved JSON this config was parsed from.
  nlohmann::json effective;

  void Validate() const;
};

nlohmann::json DefaultConfigJson();

// Parses "30", "45s", "15m", "6h", "7d", "2w" or a JSON number.
Duration ParseDuration(const nlohmann::json& value);

// Applies "a.b.c=value" to `config`. The value is parsed as JSON when
// possible and kept as a string otherwise. Throws ConfigError on unknown
// paths.
void ApplyOverride(nlohmann::json& config, const std::string& assignment);

// Merges `user` over the defaults, applies overrides, then parses.
ExperimentConfig ParseConfig(const nlohmann::json& user,
                             std::span<const std::string> overrides = {});
ExperimentConfig LoadConfigFile(const std::string& path,
                                std::span<const std::string> overrides = {});

// 64-bit FNV-1a of the canonical dump of `config.effective`, as hex.
std::string ConfigHash(const ExperimentConfig& config);

struct Dataset {
  std::vector<ClickRecord> records;
  std::vector<FeatureVector> features;
  Timestamp start = 0;  // Data span is [start, end).
  Timestamp end = 0;
  // Ground truth, present for simulated data.
  bool has_truth = false;
  std::vector<int> truth_c;
  std::vector<double> truth_p;
  std::vector<double> truth_rate;
  DelayFamily delay_family;
};

Dataset LoadDataset(const ExperimentConfig& config);
Dataset DatasetFromSimulation(std::span<const SimSample> samples,
                              const SimConfig& sim, const HashConfig& hashing);

struct Split {
  int index = 0;
  Timestamp train_start = 0;
  Timestamp train_end = 0;
  // Training and validation labels are observed here.
  Timestamp observation_time = 0;
  Timestamp test_end = 0;
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

// Split k trains on [start + k stride, start + k stride + train_window),
// validates on the following validation_window and tests on the following
// test_window. Throws ConfigError if the span is too short.
std::vector<Split> RollingSplits(std::span<const ClickRecord> records,
                                 const SplitSpec& spec, Timestamp data_start,
                                 Timestamp data_end);
// Span taken from the records: [min click_ts, max click_ts + 1).
std::vector<Split> RollingSplits(std::span<const ClickRecord> records,
                                 const SplitSpec& spec);

// Throws Error if a training sample does not come from the split's
// training/validation records or carries information from after the
// observation time.
void CheckProvenance(const Split& split, std::span<const ClickRecord> records,
                     std::span<const LabeledSample> samples);

struct PipelineResult {
  std::vector<EvalReport> reports;  // One per split per trainer.
  int n_splits = 0;
};

PipelineResult RunPipeline(const ExperimentConfig& config);
PipelineResult RunPipeline(const ExperimentConfig& config,
                           const Dataset& dataset);

struct SweepRow {
  Duration tau = 0;
  double ll = 0.0;
  double nll = 0.0;
  double pr_auc = 0.0;
  std::vector<EvalReport> reports;
};

// Runs the lr_fsiw pipeline once per tau, everything else fixed.
std::vector<SweepRow> DeadlineSweep(const ExperimentConfig& config,
                                    std::span<const Duration> taus);
std::vector<SweepRow> DeadlineSweep(const ExperimentConfig& config,
                                    const Dataset& dataset,
                                    std::span<const Duration> taus);

// Per trainer mean of each metric across splits with a bootstrap interval
// over splits.
void WriteSummaryCsv(std::ostream& out, std::span<const EvalReport> reports,
                     const EvalConfig& metrics);

}  // namespace fsiw

#endif  // FSIW_EXPERIMENT_H_
