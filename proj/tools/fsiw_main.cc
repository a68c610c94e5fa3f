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

// Command-line front end: simulate, stats, run, sweep and eval.
//
//   fsiw run --config exp.json --seed 3 --train.l2=50 --split.n_splits 2
//
// Any dotted flag that is not a named option is applied as a config override.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fsiw/core_data.h"
#include "fsiw/errors.h"
#include "fsiw/evaluation.h"
#include "fsiw/experiment.h"
#include "fsiw/simulator.h"

namespace {

using fsiw::ConfigError;

// Turns leftover "--a.b=v" / "--a.b v" arguments into overrides.
std::vector<std::string> CollectOverrides(const std::vector<std::string>& extras) {
  std::vector<std::string> overrides;
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& arg = extras[i];
    if (arg.rfind("--", 0) != 0 || arg.size() <= 2) {
      throw ConfigError("unexpected argument '" + arg + "'");
    }
    std::string body = arg.substr(2);
    if (body.find('=') == std::string::npos) {
      if (i + 1 >= extras.size()) throw ConfigError("missing value for " + arg);
      body += "=" + extras[++i];
    }
    overrides.push_back(body);
  }
  return overrides;
}

fsiw::ExperimentConfig BuildConfig(const std::string& config_path,
                                   std::vector<std::string> overrides,
                                   const std::optional<std::uint64_t>& seed,
                                   const std::string& output_dir) {
  if (seed) overrides.push_back("seed=" + std::to_string(*seed));
  if (!output_dir.empty()) {
    overrides.push_back("output_dir=" + nlohmann::json(output_dir).dump());
  }
  if (config_path.empty()) return fsiw::ParseConfig(nlohmann::json::object(), overrides);
  return fsiw::LoadConfigFile(config_path, overrides);
}

void PrintReports(const std::vector<fsiw::EvalReport>& reports) {
  fsiw::WriteReportsCsv(std::cout, reports);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Delayed feedback CVR experiments with feedback shift importance weighting"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string output_dir;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config_path, "JSON experiment config");
    sub->add_option("--seed", seed, "Global seed");
    sub->allow_extras();
  };

  CLI::App* simulate = app.add_subcommand("simulate", "Generate a synthetic click log");
  add_common(simulate);
  std::string records_out;
  std::string truth_out;
  simulate->add_option("--out", records_out, "Records TSV")->required();
  simulate->add_option("--truth", truth_out, "Ground-truth TSV");

  CLI::App* stats = app.add_subcommand("stats", "Conversion delay statistics of a log");
  add_common(stats);
  std::string stats_input;
  stats->add_option("--data", stats_input, "Records TSV (defaults to the configured source)");

  CLI::App* run = app.add_subcommand("run", "Run the rolling-window pipeline");
  add_common(run);
  run->add_option("-o,--output-dir", output_dir, "Output directory");

  CLI::App* sweep = app.add_subcommand("sweep", "Sweep the counterfactual deadline");
  add_common(sweep);
  sweep->add_option("-o,--output-dir", output_dir, "Output directory");
  std::vector<std::string> tau_args;
  sweep->add_option("--taus", tau_args, "Deadlines, e.g. 1d 2d 36h")->delimiter(',');

  CLI::App* eval = app.add_subcommand("eval", "Metrics on dumped predictions");
  std::string predictions_path;
  double train_mean = 0.0;
  int bootstrap = 1000;
  std::uint64_t eval_seed = 0;
  eval->add_option("--predictions", predictions_path,
                   "TSV with columns c and pred (header required)")->required();
  eval->add_option("--train-mean", train_mean, "Training mean CVR")->required();
  eval->add_option("--bootstrap", bootstrap, "Bootstrap resamples");
  eval->add_option("--seed", eval_seed, "Bootstrap seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (eval->parsed()) {
      std::ifstream in(predictions_path);
      if (!in) throw fsiw::Error("cannot open " + predictions_path);
      std::string line;
      std::getline(in, line);
      std::vector<std::string> header;
      {
        std::stringstream ss(line);
        std::string col;
        while (std::getline(ss, col, '\t')) header.push_back(col);
      }
      int c_col = -1;
      int p_col = -1;
      for (std::size_t k = 0; k < header.size(); ++k) {
        if (header[k] == "c") c_col = static_cast<int>(k);
        if (header[k] == "pred") p_col = static_cast<int>(k);
      }
      if (c_col < 0 || p_col < 0) throw fsiw::Error("predictions need 'c' and 'pred' columns");
      std::vector<int> labels;
      std::vector<double> preds;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cols;
        std::stringstream ss(line);
        std::string col;
        while (std::getline(ss, col, '\t')) cols.push_back(col);
        if (cols.size() != header.size()) {
          throw fsiw::Error("ragged predictions row " + std::to_string(labels.size() + 2));
        }
        labels.push_back(std::stoi(cols[c_col]));
        preds.push_back(std::stod(cols[p_col]));
      }
      fsiw::EvalConfig config;
      config.bootstrap_resamples = bootstrap;
      config.seed = eval_seed;
      fsiw::EvalReport report = fsiw::Evaluate(labels, preds, train_mean, config);
      report.trainer = "external";
      PrintReports({report});
      return 0;
    }

    fsiw::ExperimentConfig config;
    CLI::App* active = app.get_subcommands().front();
    config = BuildConfig(config_path, CollectOverrides(active->remaining()), seed, output_dir);

    if (simulate->parsed()) {
      const auto samples = fsiw::GenerateDataset(config.simulator, config.threads);
      std::ofstream out(records_out, std::ios::binary);
      if (!out) throw fsiw::Error("cannot write " + records_out);
      std::vector<fsiw::ClickRecord> records;
      records.reserve(samples.size());
      for (const auto& s : samples) records.push_back(s.record);
      fsiw::WriteRecords(out, records);
      if (!truth_out.empty()) {
        std::ofstream truth(truth_out, std::ios::binary);
        if (!truth) throw fsiw::Error("cannot write " + truth_out);
        fsiw::WriteTruth(truth, samples);
      }
      std::fprintf(stderr, "wrote %zu records\n", samples.size());
      return 0;
    }

    if (stats->parsed()) {
      std::vector<fsiw::ClickRecord> records;
      if (!stats_input.empty()) {
        if (config.schema.fields.empty()) {
          config.schema = fsiw::Schema::Categorical(config.simulator.n_fields);
        }
        records = fsiw::ReadRecordsFile(stats_input, config.schema);
      } else {
        records = fsiw::LoadDataset(config).records;
      }
      fsiw::WriteDelayStats(std::cout, fsiw::ComputeDelayStats(records));
      return 0;
    }

    if (run->parsed()) {
      const fsiw::PipelineResult result = fsiw::RunPipeline(config);
      PrintReports(result.reports);
      return 0;
    }

    if (sweep->parsed()) {
      std::vector<fsiw::Duration> taus = config.sweep_taus;
      if (!tau_args.empty()) {
        taus.clear();
        for (const std::string& t : tau_args) taus.push_back(fsiw::ParseDuration(t));
      }
      if (taus.empty()) taus = {config.tau};
      const auto rows = fsiw::DeadlineSweep(config, taus);
      std::cout << "tau,ll,nll,pr_auc\n";
      for (const auto& row : rows) {
        std::cout << row.tau << ',' << fsiw::FormatDouble(row.ll) << ','
                  << fsiw::FormatDouble(row.nll) << ',' << fsiw::FormatDouble(row.pr_auc)
                  << '\n';
      }
      return 0;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
