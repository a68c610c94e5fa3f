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

#ifndef FSIW_EVALUATION_H_
#define FSIW_EVALUATION_H_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "fsiw/core_data.h"

namespace fsiw {

inline constexpr double kDefaultPredictionClip = 1e-15;

// Mean binary log loss with predictions clamped to [clip, 1 - clip].
double LogLoss(std::span<const int> labels, std::span<const double> preds,
               double clip = kDefaultPredictionClip);

// Percent improvement of LogLoss over the constant predictor that always
// outputs `train_mean_cvr`: 100 * (LL_naive - LL) / LL_naive.
double NormalizedLogLoss(std::span<const int> labels,
                         std::span<const double> preds, double train_mean_cvr,
                         double clip = kDefaultPredictionClip);

// Average precision: the mean over positives of the precision at the
// positive's rank. Scores are sorted in decreasing order and ties keep their
// input order.
double PrAuc(std::span<const int> labels, std::span<const double> preds);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

using MetricFn =
    std::function<double(std::span<const int>, std::span<const double>)>;

// Percentile bootstrap over (label, pred) pairs. Resample b draws from its
// own substream of `seed`. Resamples on which the metric throws DomainError
// (e.g. no positives for PrAuc) are skipped.
Interval BootstrapCi(const MetricFn& metric, std::span<const int> labels,
                     std::span<const double> preds, int resamples,
                     std::uint64_t seed, double level = 0.95);

// Linear-interpolated quantile of unsorted values (q in [0, 1]).
double Quantile(std::vector<double> values, double q);

struct DelayStatsConfig {
  std::vector<Duration> grid = {kHour,    6 * kHour, 12 * kHour, kDay,
                                2 * kDay, 7 * kDay,  14 * kDay,  30 * kDay};
  Duration bin_width = kHour;
  // Histogram range; 0 means up to the largest observed delay.
  Duration horizon = 0;
  std::vector<double> quantile_levels = {0.1, 0.25, 0.5, 0.75, 0.9, 0.99};
};

struct DelayStats {
  std::size_t n_conversions = 0;
  std::vector<Duration> grid;
  std::vector<double> cdf;  // Share of delays <= grid point.
  Duration bin_width = kHour;
  std::vector<double> pdf;  // Share of delays in [k w, (k+1) w).
  std::vector<double> quantile_levels;
  std::vector<double> quantiles;  // Seconds.
};

// Throws DomainError when no record converted.
DelayStats ComputeDelayStats(std::span<const ClickRecord> records,
                             const DelayStatsConfig& config = {});
void WriteDelayStats(std::ostream& out, const DelayStats& stats);

struct EvalConfig {
  int bootstrap_resamples = 1000;
  std::uint64_t seed = 0;
  double clip = kDefaultPredictionClip;
};

struct EvalReport {
  int split = 0;
  std::string trainer;
  Duration tau = 0;
  std::size_t n_test = 0;
  double ll = 0.0;
  double nll = 0.0;
  double pr_auc = 0.0;
  Interval ll_ci;
  Interval nll_ci;
  Interval pr_auc_ci;
  double mean_pred = 0.0;
  double mean_label = 0.0;
};

EvalReport Evaluate(std::span<const int> labels, std::span<const double> preds,
                    double train_mean_cvr, const EvalConfig& config);

// Flat CSV with a fixed column set.
std::string EvalReportCsvHeader();
std::string ToCsvRow(const EvalReport& report);
std::string ToJson(const EvalReport& report);
void WriteReportsCsv(std::ostream& out, std::span<const EvalReport> reports);
void WriteReportsJson(std::ostream& out, std::span<const EvalReport> reports);

// Formats doubles identically on every platform ("%.10g").
std::string FormatDouble(double value);

}  // namespace fsiw

#endif  // FSIW_EVALUATION_H_
