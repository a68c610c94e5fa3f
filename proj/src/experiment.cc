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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <thread>

#include "fsiw/errors.h"
#include "fsiw/random.h"
#include "fsiw/relabeling.h"
#include "fsiw/version.h"

namespace fsiw {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Object keys of `user` must exist in `defaults` wherever the default is an
// object.
void CheckKnownKeys(const json& user, const json& defaults,
                    const std::string& prefix) {
  if (!user.is_object() || !defaults.is_object()) return;
  for (const auto& [key, value] : user.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!defaults.contains(key)) throw ConfigError("unknown config key '" + path + "'");
    CheckKnownKeys(value, defaults.at(key), path);
  }
}

std::optional<Timestamp> OptionalTimestamp(const json& value) {
  if (value.is_null()) return std::nullopt;
  return value.get<Timestamp>();
}

std::vector<Duration> DurationList(const json& value) {
  std::vector<Duration> out;
  for (const auto& item : value) out.push_back(ParseDuration(item));
  return out;
}

OptimizerConfig ParseOptimizer(const json& j, LossNormalization normalization,
                               int patience) {
  OptimizerConfig opt;
  opt.method = ParseOptimizerMethod(j.at("method").get<std::string>());
  opt.max_iterations = j.at("max_iterations").get<int>();
  opt.tolerance = j.at("tolerance").get<double>();
  opt.lbfgs_memory = j.at("lbfgs_memory").get<int>();
  opt.batch_size = j.at("batch_size").get<std::size_t>();
  opt.learning_rate = j.at("learning_rate").get<double>();
  opt.normalization = normalization;
  opt.patience = patience;
  return opt;
}

WeightModelConfig ParseWeightModel(const json& j, const json& fsiw_json) {
  WeightModelConfig config;
  config.l2 = j.at("l2").get<double>();
  config.basis.edges = DurationList(fsiw_json.at("time_bins"));
  config.holdout_fraction = fsiw_json.at("holdout_fraction").get<double>();
  config.optimizer.method = OptimizerMethod::kLbfgs;
  config.optimizer.max_iterations = j.at("max_iterations").get<int>();
  config.optimizer.tolerance = j.at("tolerance").get<double>();
  config.optimizer.patience = j.at("patience").get<int>();
  return config;
}

std::string FormatIndex(int index) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "split_%03d", index);
  return buffer;
}

// Re-throws the active exception with `context` prepended, keeping its type.
[[noreturn]] void RethrowWithContext(const std::string& context) {
  try {
    throw;
  } catch (const ConfigError& e) {
    throw ConfigError(context + ": " + e.what());
  } catch (const TrainingError& e) {
    throw TrainingError(context + ": " + e.what());
  } catch (const DomainError& e) {
    throw DomainError(context + ": " + e.what());
  } catch (const std::exception& e) {
    throw Error(context + ": " + e.what());
  }
}

void WriteFile(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
}

double EffectiveL2(const ExperimentConfig& config, std::size_t n) {
  if (config.l2_scale_by_n &&
      config.optimizer.normalization == LossNormalization::kMean && n > 0) {
    return config.l2 / static_cast<double>(n);
  }
  return config.l2;
}

std::vector<int> TestLabels(const ExperimentConfig& config,
                            const Dataset& dataset,
                            std::span<const std::size_t> indices) {
  std::vector<int> labels;
  labels.reserve(indices.size());
  for (const std::size_t i : indices) {
    if (dataset.has_truth) {
      labels.push_back(dataset.truth_c[i]);
    } else {
      const auto d = dataset.records[i].delay();
      labels.push_back(d && *d <= config.data.observation_margin ? 1 : 0);
    }
  }
  return labels;
}

struct SplitOutcome {
  std::vector<EvalReport> reports;
};

SplitOutcome RunSplit(const ExperimentConfig& config, const Dataset& dataset,
                      const Split& split) {
  const std::uint64_t split_seed =
      SplitMix64(config.seed ^ SplitMix64(0x51u + static_cast<std::uint64_t>(split.index)));
  const Timestamp observed = split.observation_time;
  std::vector<LabeledSample> train =
      SnapshotLabels(dataset.records, dataset.features, split.train, observed);
  std::vector<LabeledSample> validation = SnapshotLabels(
      dataset.records, dataset.features, split.validation, observed);
  CheckProvenance(split, dataset.records, train);
  CheckProvenance(split, dataset.records, validation);
  if (train.empty()) throw Error("split has no training samples");

  double positives = 0.0;
  for (const LabeledSample& s : train) positives += s.y;
  const double train_mean =
      std::clamp(positives / static_cast<double>(train.size()), 1e-6, 1.0 - 1e-6);

  const std::vector<int> test_labels = TestLabels(config, dataset, split.test);
  if (test_labels.empty()) throw Error("split has no test samples");

  fs::path dir;
  if (!config.output_dir.empty()) {
    dir = fs::path(config.output_dir) / FormatIndex(split.index);
    fs::create_directories(dir);
  }

  OptimizerConfig opt = config.optimizer;
  opt.seed = SplitMix64(split_seed ^ 0x0a);
  const double l2 = EffectiveL2(config, train.size());

  EvalConfig metrics = config.metrics;
  metrics.seed = SplitMix64(split_seed ^ 0x0c);

  SplitOutcome outcome;
  for (const TrainerKind trainer : config.trainers) {
    const std::string name = ToString(trainer);
    try {
      std::vector<double> preds;
      preds.reserve(split.test.size());
      std::ostringstream model_blob;

      if (trainer == TrainerKind::kDfm) {
        const DfmModel model = TrainDfm(train, l2, opt);
        for (const std::size_t i : split.test) {
          preds.push_back(PredictCvr(model, dataset.features[i]));
        }
        SaveModel(model_blob, model);
      } else {
        WeightedDataset weighted = WeightedDataset::Uniform(train);
        WeightedDataset weighted_validation =
            WeightedDataset::Uniform(validation);
        if (trainer == TrainerKind::kLrFsiw) {
          if (config.weight_source == WeightSource::kOracle) {
            if (!dataset.has_truth) {
              throw ConfigError("oracle weights need ground truth");
            }
            auto oracle = [&](WeightedDataset& data) {
              for (std::size_t k = 0; k < data.samples.size(); ++k) {
                const LabeledSample& s = data.samples[k];
                const double w = OracleFsiw(
                    dataset.delay_family, dataset.truth_p[s.source],
                    dataset.truth_rate[s.source], static_cast<double>(s.e), s.y);
                data.weights[k] = s.y == 1 ? std::min(w, 1.0 / config.clip_floor)
                                           : std::max(w, config.clip_floor);
              }
            };
            oracle(weighted);
            oracle(weighted_validation);
          } else {
            RelabelConfig relabel;
            relabel.tau = config.tau;
            relabel.training_end = observed;
            relabel.window = observed - split.train_start;
            const ArtificialDatasets artificial =
                BuildArtificialDatasets(train, relabel);
            WeightModelConfig pos = config.weight_pos;
            WeightModelConfig neg = config.weight_neg;
            pos.seed = SplitMix64(split_seed ^ 0x01);
            neg.seed = SplitMix64(split_seed ^ 0x02);
            WeightModelPair pair;
            pair.clip_floor = config.clip_floor;
            pair.model_pos = FitWeightModel(artificial.d1, pos).model;
            pair.model_neg = FitWeightModel(artificial.d0, neg).model;
            weighted = AssignFsiw(pair, train);
            weighted_validation = AssignFsiw(pair, validation);
            if (!dir.empty() && config.dump_artificial) {
              std::ofstream d1(dir / "d1.tsv", std::ios::binary);
              WriteArtificial(d1, artificial.d1);
              std::ofstream d0(dir / "d0.tsv", std::ios::binary);
              WriteArtificial(d0, artificial.d0);
            }
          }
          if (!dir.empty() && config.dump_weights) {
            std::ofstream out(dir / "weights.tsv", std::ios::binary);
            WriteWeights(out, weighted);
          }
        }
        const LinearCvrModel model = TrainWeightedLogistic(
            weighted, l2, opt,
            validation.empty() ? nullptr : &weighted_validation);
        for (const std::size_t i : split.test) {
          preds.push_back(PredictCvr(model, dataset.features[i]));
        }
        SaveModel(model_blob, model);
      }

      EvalReport report = Evaluate(test_labels, preds, train_mean, metrics);
      report.split = split.index;
      report.trainer = name;
      report.tau = trainer == TrainerKind::kLrFsiw ? config.tau : 0;
      outcome.reports.push_back(report);

      if (!dir.empty()) {
        if (config.dump_models) WriteFile(dir / (name + ".model"), model_blob.str());
        if (config.dump_predictions) {
          std::ostringstream out;
          out << "index\tsource\tc\tpred\n";
          char buffer[96];
          for (std::size_t k = 0; k < preds.size(); ++k) {
            std::snprintf(buffer, sizeof(buffer), "%zu\t%zu\t%d\t%.17g\n", k,
                          split.test[k], test_labels[k], preds[k]);
            out << buffer;
          }
          WriteFile(dir / (name + ".predictions.tsv"), out.str());
        }
      }
    } catch (...) {
      RethrowWithContext("split " + std::to_string(split.index) + ", trainer " + name);
    }
  }

  if (!dir.empty()) {
    std::ostringstream csv;
    WriteReportsCsv(csv, outcome.reports);
    WriteFile(dir / "report.csv", csv.str());
    std::ostringstream js;
    WriteReportsJson(js, outcome.reports);
    WriteFile(dir / "report.json", js.str());
  }
  return outcome;
}

void WriteManifest(const ExperimentConfig& config, const fs::path& path,
                   int n_splits) {
  json manifest;
  manifest["tool"] = "fsiw";
  manifest["version"] = kVersion;
  manifest["config_hash"] = ConfigHash(config);
  manifest["seed"] = config.seed;
  manifest["n_splits"] = n_splits;
  manifest["config"] = config.effective;
  WriteFile(path, manifest.dump(2) + "\n");
}

}  // namespace

std::string ToString(TrainerKind trainer) {
  switch (trainer) {
    case TrainerKind::kNaiveLr:
      return "naive_lr";
    case TrainerKind::kLrFsiw:
      return "lr_fsiw";
    case TrainerKind::kDfm:
      return "dfm";
  }
  return "?";
}

TrainerKind ParseTrainer(const std::string& name) {
  if (name == "naive_lr") return TrainerKind::kNaiveLr;
  if (name == "lr_fsiw") return TrainerKind::kLrFsiw;
  if (name == "dfm") return TrainerKind::kDfm;
  throw ConfigError("unknown trainer '" + name + "'");
}

json DefaultConfigJson() {
  return json::parse(R"({
    "seed": 0,
    "threads": 1,
    "output_dir": "",
    "data": {
      "source": "simulator",
      "path": "",
      "truth_path": "",
      "observation_margin": "30d",
      "start_ts": null,
      "end_ts": null
    },
    "schema": {"n_fields": 0, "fields": []},
    "simulator": {
      "n_samples": 100000,
      "n_fields": 4,
      "cardinality": 16,
      "cvr_bias": -1.5,
      "cvr_weights": [],
      "cvr_weight_scale": 0.5,
      "rate_bias": null,
      "mean_delay": "1d",
      "rate_weights": [],
      "rate_weight_scale": 0.5,
      "delay_family": "exponential",
      "modulation_depth": 0.0,
      "max_delay": 0,
      "time_span": "28d",
      "start_ts": 0,
      "seed": null
    },
    "hashing": {"dim": 131072, "seed": 0},
    "split": {
      "train_window": "21d",
      "test_window": "1d",
      "stride": "1d",
      "n_splits": 0,
      "validation_window": 0,
      "start_ts": null
    },
    "fsiw": {
      "tau": "7d",
      "sweep_taus": [],
      "clip_floor": 0.01,
      "weight_source": "estimated",
      "time_bins": ["1h", "6h", "12h", "1d", "2d", "4d", "7d"],
      "holdout_fraction": 0.1,
      "pos": {"l2": 1e-5, "max_iterations": 500, "tolerance": 1e-10, "patience": 5},
      "neg": {"l2": 1e-5, "max_iterations": 500, "tolerance": 1e-10, "patience": 5}
    },
    "trainers": ["naive_lr", "lr_fsiw", "dfm"],
    "train": {
      "l2": 100.0,
      "l2_scale_by_n": true,
      "normalization": "mean",
      "patience": 5,
      "optimizer": {
        "method": "lbfgs",
        "max_iterations": 1000,
        "tolerance": 1e-10,
        "lbfgs_memory": 10,
        "batch_size": 1024,
        "learning_rate": 0.1
      }
    },
    "metrics": {"bootstrap": 1000, "clip": 1e-15},
    "dump": {"artificial": false, "predictions": true, "models": true, "weights": true}
  })");
}

Duration ParseDuration(const json& value) {
  if (value.is_number_integer()) return value.get<Duration>();
  if (value.is_number()) return static_cast<Duration>(std::llround(value.get<double>()));
  if (!value.is_string()) throw ConfigError("duration must be a number or string");
  const std::string text = value.get<std::string>();
  if (text.empty()) throw ConfigError("empty duration");
  Duration unit = 1;
  std::string digits = text;
  switch (text.back()) {
    case 's': unit = 1; digits.pop_back(); break;
    case 'm': unit = 60; digits.pop_back(); break;
    case 'h': unit = kHour; digits.pop_back(); break;
    case 'd': unit = kDay; digits.pop_back(); break;
    case 'w': unit = 7 * kDay; digits.pop_back(); break;
    default: break;
  }
  try {
    std::size_t used = 0;
    const double amount = std::stod(digits, &used);
    if (used != digits.size()) throw std::invalid_argument(text);
    return static_cast<Duration>(std::llround(amount * static_cast<double>(unit)));
  } catch (const std::exception&) {
    throw ConfigError("malformed duration '" + text + "'");
  }
}

void ApplyOverride(json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override must look like key.path=value: '" + assignment + "'");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json* node = &config;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot - start);
    if (!node->is_object() || !node->contains(key)) {
      throw ConfigError("unknown config key '" + path + "'");
    }
    node = &(*node)[key];
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  json value = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = text;
  *node = value;
}

ExperimentConfig ParseConfig(const json& user,
                             std::span<const std::string> overrides) {
  const json defaults = DefaultConfigJson();
  CheckKnownKeys(user, defaults, "");
  json j = defaults;
  j.merge_patch(user);
  for (const std::string& o : overrides) ApplyOverride(j, o);

  ExperimentConfig c;
  try {
    c.seed = j.at("seed").get<std::uint64_t>();
    c.threads = j.at("threads").get<int>();
    c.output_dir = j.at("output_dir").get<std::string>();

    const json& data = j.at("data");
    const std::string source = data.at("source").get<std::string>();
    if (source == "simulator") {
      c.data.kind = DataSourceConfig::Kind::kSimulator;
    } else if (source == "tsv") {
      c.data.kind = DataSourceConfig::Kind::kTsv;
    } else {
      throw ConfigError("data.source must be 'simulator' or 'tsv'");
    }
    c.data.path = data.at("path").get<std::string>();
    c.data.truth_path = data.at("truth_path").get<std::string>();
    c.data.observation_margin = ParseDuration(data.at("observation_margin"));
    c.data.start_ts = OptionalTimestamp(data.at("start_ts"));
    c.data.end_ts = OptionalTimestamp(data.at("end_ts"));

    const json& schema = j.at("schema");
    if (!schema.at("fields").empty()) {
      for (const auto& field : schema.at("fields")) {
        FieldSpec spec;
        spec.name = field.value("name", "f" + std::to_string(c.schema.fields.size()));
        if (field.contains("bin_edges")) {
          spec.bin_edges = field.at("bin_edges").get<std::vector<double>>();
          if (!std::is_sorted(spec.bin_edges.begin(), spec.bin_edges.end())) {
            throw ConfigError("bin_edges of field " + spec.name + " must be sorted");
          }
        }
        c.schema.fields.push_back(std::move(spec));
      }
    } else {
      c.schema = Schema::Categorical(schema.at("n_fields").get<int>());
    }

    const json& sim = j.at("simulator");
    SimConfig& s = c.simulator;
    s.n_samples = sim.at("n_samples").get<std::size_t>();
    s.n_fields = sim.at("n_fields").get<int>();
    s.cardinality = sim.at("cardinality").get<int>();
    s.seed = sim.at("seed").is_null() ? c.seed : sim.at("seed").get<std::uint64_t>();
    const std::size_t n_coef = static_cast<std::size_t>(std::max(0, s.n_fields)) *
                               static_cast<std::size_t>(std::max(0, s.cardinality));
    s.cvr_bias = sim.at("cvr_bias").get<double>();
    s.cvr_weights = sim.at("cvr_weights").get<std::vector<double>>();
    if (s.cvr_weights.empty()) {
      s.cvr_weights = DrawCoefficients(n_coef, sim.at("cvr_weight_scale").get<double>(),
                                       SplitMix64(s.seed ^ 0xc0ffee));
    }
    s.rate_bias = sim.at("rate_bias").is_null()
                      ? -std::log(static_cast<double>(ParseDuration(sim.at("mean_delay"))))
                      : sim.at("rate_bias").get<double>();
    s.rate_weights = sim.at("rate_weights").get<std::vector<double>>();
    if (s.rate_weights.empty()) {
      s.rate_weights = DrawCoefficients(n_coef, sim.at("rate_weight_scale").get<double>(),
                                        SplitMix64(s.seed ^ 0xdecade));
    }
    const std::string family = sim.at("delay_family").get<std::string>();
    if (family == "exponential") {
      s.delay.kind = DelayFamily::Kind::kExponential;
    } else if (family == "daily_modulated") {
      s.delay.kind = DelayFamily::Kind::kDailyModulated;
    } else {
      throw ConfigError("delay_family must be 'exponential' or 'daily_modulated'");
    }
    s.delay.modulation_depth = sim.at("modulation_depth").get<double>();
    s.delay.max_delay = ParseDuration(sim.at("max_delay"));
    s.time_span = ParseDuration(sim.at("time_span"));
    s.start_ts = sim.at("start_ts").get<Timestamp>();

    c.hashing.dim = j.at("hashing").at("dim").get<std::uint32_t>();
    c.hashing.seed = j.at("hashing").at("seed").get<std::uint64_t>();

    const json& split = j.at("split");
    c.split.train_window = ParseDuration(split.at("train_window"));
    c.split.test_window = ParseDuration(split.at("test_window"));
    c.split.stride = ParseDuration(split.at("stride"));
    c.split.n_splits = split.at("n_splits").get<int>();
    c.split.validation_window = ParseDuration(split.at("validation_window"));
    c.split.start = OptionalTimestamp(split.at("start_ts"));

    const json& fsiw_json = j.at("fsiw");
    c.tau = ParseDuration(fsiw_json.at("tau"));
    c.sweep_taus = DurationList(fsiw_json.at("sweep_taus"));
    c.clip_floor = fsiw_json.at("clip_floor").get<double>();
    const std::string weights = fsiw_json.at("weight_source").get<std::string>();
    if (weights == "estimated") {
      c.weight_source = WeightSource::kEstimated;
    } else if (weights == "oracle") {
      c.weight_source = WeightSource::kOracle;
    } else {
      throw ConfigError("fsiw.weight_source must be 'estimated' or 'oracle'");
    }
    c.weight_pos = ParseWeightModel(fsiw_json.at("pos"), fsiw_json);
    c.weight_neg = ParseWeightModel(fsiw_json.at("neg"), fsiw_json);

    c.trainers.clear();
    for (const auto& t : j.at("trainers")) c.trainers.push_back(ParseTrainer(t.get<std::string>()));

    const json& train = j.at("train");
    c.l2 = train.at("l2").get<double>();
    c.l2_scale_by_n = train.at("l2_scale_by_n").get<bool>();
    c.optimizer = ParseOptimizer(train.at("optimizer"),
                                 ParseNormalization(train.at("normalization").get<std::string>()),
                                 train.at("patience").get<int>());

    c.metrics.bootstrap_resamples = j.at("metrics").at("bootstrap").get<int>();
    c.metrics.clip = j.at("metrics").at("clip").get<double>();

    const json& dump = j.at("dump");
    c.dump_artificial = dump.at("artificial").get<bool>();
    c.dump_predictions = dump.at("predictions").get<bool>();
    c.dump_models = dump.at("models").get<bool>();
    c.dump_weights = dump.at("weights").get<bool>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  c.effective = j;
  c.Validate();
  return c;
}

ExperimentConfig LoadConfigFile(const std::string& path,
                                std::span<const std::string> overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  json user;
  try {
    user = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path + ": " + e.what());
  }
  return ParseConfig(user, overrides);
}

void ExperimentConfig::Validate() const {
  if (split.train_window <= 0 || split.test_window <= 0 || split.stride <= 0) {
    throw ConfigError("split windows and stride must be positive");
  }
  if (split.validation_window < 0) throw ConfigError("validation_window must be >= 0");
  if (tau <= 0 || tau >= split.train_window) {
    throw ConfigError("tau must be in (0, train_window)");
  }
  for (const Duration t : sweep_taus) {
    if (t <= 0 || t >= split.train_window) {
      throw ConfigError("sweep tau " + std::to_string(t) + " must be in (0, train_window)");
    }
  }
  if (!(clip_floor > 0.0 && clip_floor <= 1.0)) throw ConfigError("clip_floor must be in (0, 1]");
  if (hashing.dim < 2 || !IsPowerOfTwo(hashing.dim)) {
    throw ConfigError("hashing.dim must be a power of two >= 2");
  }
  if (trainers.empty()) throw ConfigError("no trainers selected");
  if (!(l2 >= 0.0)) throw ConfigError("l2 must be >= 0");
  if (data.kind == DataSourceConfig::Kind::kSimulator) {
    simulator.Validate();
  } else {
    if (data.path.empty()) throw ConfigError("data.path is required for tsv input");
    if (schema.fields.empty()) throw ConfigError("tsv input needs a schema");
  }
  if (weight_source == WeightSource::kOracle &&
      data.kind == DataSourceConfig::Kind::kTsv && data.truth_path.empty()) {
    throw ConfigError("oracle weights need data.truth_path for tsv input");
  }
}

std::string ConfigHash(const ExperimentConfig& config) {
  const std::string text = config.effective.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char ch : text) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  char buffer[24];
  std::snprintf(buffer, sizeof(buffer), "%016llx", static_cast<unsigned long long>(h));
  return buffer;
}

Dataset DatasetFromSimulation(std::span<const SimSample> samples,
                              const SimConfig& sim, const HashConfig& hashing) {
  Dataset dataset;
  dataset.records.reserve(samples.size());
  for (const SimSample& s : samples) {
    dataset.records.push_back(s.record);
    dataset.truth_c.push_back(s.c);
    dataset.truth_p.push_back(s.true_p);
    dataset.truth_rate.push_back(s.true_rate);
  }
  dataset.features = HashAll(dataset.records, hashing);
  dataset.has_truth = true;
  dataset.delay_family = sim.delay;
  dataset.start = sim.start_ts;
  dataset.end = sim.start_ts + sim.time_span;
  return dataset;
}

Dataset LoadDataset(const ExperimentConfig& config) {
  if (config.data.kind == DataSourceConfig::Kind::kSimulator) {
    const auto samples = GenerateDataset(config.simulator, config.threads);
    return DatasetFromSimulation(samples, config.simulator, config.hashing);
  }
  Dataset dataset;
  dataset.records = ReadRecordsFile(config.data.path, config.schema);
  if (dataset.records.empty()) throw Error("no records in " + config.data.path);
  dataset.features = HashAll(dataset.records, config.hashing);
  dataset.delay_family = config.simulator.delay;
  Timestamp min_ts = dataset.records.front().click_ts;
  Timestamp max_ts = min_ts;
  for (const ClickRecord& r : dataset.records) {
    min_ts = std::min(min_ts, r.click_ts);
    max_ts = std::max(max_ts, r.click_ts);
  }
  dataset.start = config.data.start_ts.value_or(min_ts);
  dataset.end = config.data.end_ts.value_or(max_ts + 1);
  if (!config.data.truth_path.empty()) {
    std::ifstream in(config.data.truth_path);
    if (!in) throw Error("cannot open " + config.data.truth_path);
    const auto truth = ReadTruth(in);
    if (truth.size() != dataset.records.size()) {
      throw Error("truth file has " + std::to_string(truth.size()) + " rows for " +
                  std::to_string(dataset.records.size()) + " records");
    }
    dataset.has_truth = true;
    for (const TruthRow& row : truth) {
      dataset.truth_c.push_back(row.c);
      dataset.truth_p.push_back(row.true_p);
      dataset.truth_rate.push_back(row.true_rate);
    }
  }
  return dataset;
}

std::vector<Split> RollingSplits(std::span<const ClickRecord> records,
                                 const SplitSpec& spec, Timestamp data_start,
                                 Timestamp data_end) {
  const Timestamp start = spec.start.value_or(data_start);
  const Duration needed = spec.train_window + spec.validation_window + spec.test_window;
  const Duration span = data_end - start;
  if (span < needed) {
    throw ConfigError("data span of " + std::to_string(span) +
                      " s is shorter than train + validation + test (" +
                      std::to_string(needed) + " s)");
  }
  int n = static_cast<int>((span - needed) / spec.stride) + 1;
  if (spec.n_splits > 0) n = std::min(n, spec.n_splits);

  std::vector<Split> splits(n);
  for (int k = 0; k < n; ++k) {
    Split& split = splits[k];
    split.index = k;
    split.train_start = start + static_cast<Timestamp>(k) * spec.stride;
    split.train_end = split.train_start + spec.train_window;
    split.observation_time = split.train_end + spec.validation_window;
    split.test_end = split.observation_time + spec.test_window;
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    const Timestamp t = records[i].click_ts;
    for (Split& split : splits) {
      if (t < split.train_start || t >= split.test_end) continue;
      if (t < split.train_end) {
        split.train.push_back(i);
      } else if (t < split.observation_time) {
        split.validation.push_back(i);
      } else {
        split.test.push_back(i);
      }
    }
  }
  return splits;
}

std::vector<Split> RollingSplits(std::span<const ClickRecord> records,
                                 const SplitSpec& spec) {
  if (records.empty()) throw ConfigError("no records to split");
  Timestamp lo = records.front().click_ts;
  Timestamp hi = lo;
  for (const ClickRecord& r : records) {
    lo = std::min(lo, r.click_ts);
    hi = std::max(hi, r.click_ts);
  }
  return RollingSplits(records, spec, lo, hi + 1);
}

void CheckProvenance(const Split& split, std::span<const ClickRecord> records,
                     std::span<const LabeledSample> samples) {
  for (const LabeledSample& s : samples) {
    const bool known =
        std::binary_search(split.train.begin(), split.train.end(), s.source) ||
        std::binary_search(split.validation.begin(), split.validation.end(), s.source);
    if (!known) {
      throw Error("sample from record " + std::to_string(s.source) +
                  " is not part of the split's training data");
    }
    const ClickRecord& r = records[s.source];
    if (r.click_ts >= split.observation_time ||
        (s.y == 1 && (!r.conv_ts || *r.conv_ts > split.observation_time))) {
      throw Error("sample from record " + std::to_string(s.source) +
                  " uses information from after the observation time");
    }
  }
}

PipelineResult RunPipeline(const ExperimentConfig& config,
                           const Dataset& dataset) {
  config.Validate();
  const std::vector<Split> splits =
      RollingSplits(dataset.records, config.split, dataset.start, dataset.end);
  if (!dataset.has_truth) {
    Timestamp labels_until = dataset.end;
    for (const ClickRecord& r : dataset.records) {
      if (r.conv_ts) labels_until = std::max(labels_until, *r.conv_ts + 1);
    }
    if (config.data.end_ts) labels_until = *config.data.end_ts;
    for (const Split& split : splits) {
      if (split.test_end + config.data.observation_margin > labels_until) {
        throw ConfigError("split " + std::to_string(split.index) +
                          ": test labels could still change (test ends at " +
                          std::to_string(split.test_end) + ", observation margin " +
                          std::to_string(config.data.observation_margin) +
                          " s, logs end at " + std::to_string(labels_until) + ")");
      }
    }
  }

  std::vector<SplitOutcome> outcomes(splits.size());
  std::vector<std::exception_ptr> errors(splits.size());
  const std::size_t workers = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::max(1, config.threads)), 1, splits.size());
  auto job = [&](std::size_t w) {
    for (std::size_t k = w; k < splits.size(); k += workers) {
      try {
        outcomes[k] = RunSplit(config, dataset, splits[k]);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    job(0);
  } else {
    std::vector<std::thread> threads;
    for (std::size_t w = 0; w < workers; ++w) threads.emplace_back(job, w);
    for (auto& t : threads) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  PipelineResult result;
  result.n_splits = static_cast<int>(splits.size());
  for (auto& outcome : outcomes) {
    for (auto& r : outcome.reports) result.reports.push_back(std::move(r));
  }
  if (!config.output_dir.empty()) {
    const fs::path dir(config.output_dir);
    fs::create_directories(dir);
    std::ostringstream csv;
    WriteReportsCsv(csv, result.reports);
    WriteFile(dir / "reports.csv", csv.str());
    std::ostringstream js;
    WriteReportsJson(js, result.reports);
    WriteFile(dir / "reports.json", js.str());
    std::ostringstream summary;
    WriteSummaryCsv(summary, result.reports, config.metrics);
    WriteFile(dir / "summary.csv", summary.str());
    WriteManifest(config, dir / "manifest.json", result.n_splits);
  }
  return result;
}

PipelineResult RunPipeline(const ExperimentConfig& config) {
  return RunPipeline(config, LoadDataset(config));
}

std::vector<SweepRow> DeadlineSweep(const ExperimentConfig& config,
                                    const Dataset& dataset,
                                    std::span<const Duration> taus) {
  if (taus.empty()) throw ConfigError("empty tau list");
  for (const Duration t : taus) {
    if (t <= 0 || t >= config.split.train_window) {
      throw ConfigError("tau " + std::to_string(t) + " must be in (0, train_window)");
    }
  }
  std::vector<SweepRow> rows;
  for (const Duration tau : taus) {
    ExperimentConfig point = config;
    point.tau = tau;
    point.trainers = {TrainerKind::kLrFsiw};
    if (!config.output_dir.empty()) {
      point.output_dir =
          (fs::path(config.output_dir) / "sweep" / ("tau_" + std::to_string(tau))).string();
    }
    point.effective["fsiw"]["tau"] = tau;
    point.effective["trainers"] = json::array({"lr_fsiw"});
    PipelineResult result = RunPipeline(point, dataset);
    SweepRow row;
    row.tau = tau;
    for (const EvalReport& r : result.reports) {
      row.ll += r.ll;
      row.nll += r.nll;
      row.pr_auc += r.pr_auc;
    }
    const double n = static_cast<double>(result.reports.size());
    row.ll /= n;
    row.nll /= n;
    row.pr_auc /= n;
    row.reports = std::move(result.reports);
    rows.push_back(std::move(row));
  }
  if (!config.output_dir.empty()) {
    const fs::path dir(config.output_dir);
    fs::create_directories(dir);
    std::ostringstream csv;
    csv << "tau,ll,nll,pr_auc\n";
    for (const SweepRow& row : rows) {
      csv << row.tau << ',' << FormatDouble(row.ll) << ',' << FormatDouble(row.nll)
          << ',' << FormatDouble(row.pr_auc) << '\n';
    }
    WriteFile(dir / "sweep.csv", csv.str());
    WriteManifest(config, dir / "manifest.json", 0);
  }
  return rows;
}

std::vector<SweepRow> DeadlineSweep(const ExperimentConfig& config,
                                    std::span<const Duration> taus) {
  return DeadlineSweep(config, LoadDataset(config), taus);
}

void WriteSummaryCsv(std::ostream& out, std::span<const EvalReport> reports,
                     const EvalConfig& metrics) {
  out << "trainer,n_splits,metric,mean,lo,hi\n";
  std::vector<std::string> trainers;
  for (const EvalReport& r : reports) {
    if (std::find(trainers.begin(), trainers.end(), r.trainer) == trainers.end()) {
      trainers.push_back(r.trainer);
    }
  }
  auto mean = [](std::span<const int>, std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  for (const std::string& trainer : trainers) {
    std::vector<double> ll, nll, pr;
    for (const EvalReport& r : reports) {
      if (r.trainer != trainer) continue;
      ll.push_back(r.ll);
      nll.push_back(r.nll);
      pr.push_back(r.pr_auc);
    }
    const std::vector<int> dummy(ll.size(), 0);
    const std::pair<const char*, const std::vector<double>*> rows[] = {
        {"ll", &ll}, {"nll", &nll}, {"pr_auc", &pr}};
    for (const auto& [name, values] : rows) {
      const double m = mean(dummy, *values);
      Interval ci{m, m};
      if (values->size() > 1 && metrics.bootstrap_resamples > 0) {
        ci = BootstrapCi(mean, dummy, *values, metrics.bootstrap_resamples, metrics.seed);
      }
      out << trainer << ',' << values->size() << ',' << name << ',' << FormatDouble(m)
          << ',' << FormatDouble(ci.lo) << ',' << FormatDouble(ci.hi) << '\n';
    }
  }
}

}  // namespace fsiw
