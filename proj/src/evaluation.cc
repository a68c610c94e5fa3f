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

#include "fsiw/evaluation.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <ostream>

#include "fsiw/errors.h"
#include "fsiw/random.h"

namespace fsiw {
namespace {

void CheckInputs(std::span<const int> labels, std::span<const double> preds) {
  if (labels.size() != preds.size()) {
    throw DomainError("labels and predictions differ in length (" +
                      std::to_string(labels.size()) + " vs " +
                      std::to_string(preds.size()) + ")");
  }
  if (labels.empty()) throw DomainError("empty evaluation set");
}

}  // namespace

double LogLoss(std::span<const int> labels, std::span<const double> preds,
               double clip) {
  CheckInputs(labels, preds);
  double sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double p = std::clamp(preds[i], clip, 1.0 - clip);
    sum -= labels[i] == 1 ? std::log(p) : std::log1p(-p);
  }
  return sum / static_cast<double>(labels.size());
}

double NormalizedLogLoss(std::span<const int> labels,
                         std::span<const double> preds, double train_mean_cvr,
                         double clip) {
  if (!(train_mean_cvr > 0.0 && train_mean_cvr < 1.0)) {
    throw DomainError("training mean CVR must be in (0, 1)");
  }
  const double ll = LogLoss(labels, preds, clip);
  // Same summation path as LogLoss so the naive predictor scores exactly 0.
  const std::vector<double> constant(labels.size(), train_mean_cvr);
  const double naive = LogLoss(labels, constant, clip);
  if (naive == 0.0) throw DomainError("naive log loss is zero");
  return 100.0 * (naive - ll) / naive;
}

double PrAuc(std::span<const int> labels, std::span<const double> preds) {
  CheckInputs(labels, preds);
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return preds[a] > preds[b];
  });
  double positives_seen = 0.0;
  double precision_sum = 0.0;
  for (std::size_t rank = 0; rank < order.size(); ++rank) {
    if (labels[order[rank]] != 1) continue;
    positives_seen += 1.0;
    precision_sum += positives_seen / static_cast<double>(rank + 1);
  }
  if (positives_seen == 0.0) throw DomainError("no positive labels");
  return precision_sum / positives_seen;
}

double Quantile(std::vector<double> values, double q) {
  if (values.empty()) throw DomainError("quantile of an empty set");
  std::sort(values.begin(), values.end());
  const double position = q * static_cast<double>(values.size() - 1);
  const auto below = static_cast<std::size_t>(std::floor(position));
  const std::size_t above = std::min(below + 1, values.size() - 1);
  const double fraction = position - static_cast<double>(below);
  return values[below] + fraction * (values[above] - values[below]);
}

Interval BootstrapCi(const MetricFn& metric, std::span<const int> labels,
                     std::span<const double> preds, int resamples,
                     std::uint64_t seed, double level) {
  CheckInputs(labels, preds);
  const std::size_t n = labels.size();
  std::vector<int> sample_labels(n);
  std::vector<double> sample_preds(n);
  std::vector<double> stats;
  stats.reserve(resamples);
  for (int b = 0; b < resamples; ++b) {
    RandomEngine rng = RandomEngine::Substream(seed, static_cast<std::uint64_t>(b));
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = rng.UniformInt(n);
      sample_labels[i] = labels[j];
      sample_preds[i] = preds[j];
    }
    try {
      stats.push_back(metric(sample_labels, sample_preds));
    } catch (const DomainError&) {
    }
  }
  if (stats.empty()) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    return {nan, nan};
  }
  const double alpha = 0.5 * (1.0 - level);
  return {Quantile(stats, alpha), Quantile(stats, 1.0 - alpha)};
}

DelayStats ComputeDelayStats(std::span<const ClickRecord> records,
                             const DelayStatsConfig& config) {
  std::vector<Duration> delays;
  for (const ClickRecord& record : records) {
    if (const auto d = record.delay()) delays.push_back(*d);
  }
  if (delays.empty()) throw DomainError("no converted records");
  if (config.bin_width <= 0) throw ConfigError("bin width must be positive");
  std::sort(delays.begin(), delays.end());
  const double n = static_cast<double>(delays.size());

  DelayStats stats;
  stats.n_conversions = delays.size();
  stats.grid = config.grid;
  for (const Duration t : config.grid) {
    const auto count = std::upper_bound(delays.begin(), delays.end(), t) - delays.begin();
    stats.cdf.push_back(static_cast<double>(count) / n);
  }
  stats.bin_width = config.bin_width;
  const Duration horizon = config.horizon > 0 ? config.horizon : delays.back() + 1;
  const auto n_bins = static_cast<std::size_t>(
      (horizon + config.bin_width - 1) / config.bin_width);
  stats.pdf.assign(std::max<std::size_t>(1, n_bins), 0.0);
  for (const Duration d : delays) {
    const auto bin = static_cast<std::size_t>(d / config.bin_width);
    if (bin < stats.pdf.size()) stats.pdf[bin] += 1.0 / n;
  }
  stats.quantile_levels = config.quantile_levels;
  std::vector<double> values(delays.begin(), delays.end());
  for (const double q : config.quantile_levels) {
    stats.quantiles.push_back(Quantile(values, q));
  }
  return stats;
}

void WriteDelayStats(std::ostream& out, const DelayStats& stats) {
  out << "# conversions\t" << stats.n_conversions << '\n';
  out << "# cdf\nseconds\tcdf\n";
  for (std::size_t i = 0; i < stats.grid.size(); ++i) {
    out << stats.grid[i] << '\t' << FormatDouble(stats.cdf[i]) << '\n';
  }
  out << "# quantiles\nlevel\tseconds\n";
  for (std::size_t i = 0; i < stats.quantiles.size(); ++i) {
    out << FormatDouble(stats.quantile_levels[i]) << '\t'
        << FormatDouble(stats.quantiles[i]) << '\n';
  }
  out << "# pdf\nbin_start\tshare\n";
  for (std::size_t k = 0; k < stats.pdf.size(); ++k) {
    out << static_cast<Duration>(k) * stats.bin_width << '\t'
        << FormatDouble(stats.pdf[k]) << '\n';
  }
}

EvalReport Evaluate(std::span<const int> labels, std::span<const double> preds,
                    double train_mean_cvr, const EvalConfig& config) {
  CheckInputs(labels, preds);
  EvalReport report;
  report.n_test = labels.size();
  const double clip = config.clip;
  report.ll = LogLoss(labels, preds, clip);
  report.nll = NormalizedLogLoss(labels, preds, train_mean_cvr, clip);
  report.mean_pred =
      std::accumulate(preds.begin(), preds.end(), 0.0) / static_cast<double>(preds.size());
  report.mean_label =
      std::accumulate(labels.begin(), labels.end(), 0.0) / static_cast<double>(labels.size());

  const bool has_positive = std::find(labels.begin(), labels.end(), 1) != labels.end();
  report.pr_auc = has_positive ? PrAuc(labels, preds)
                               : std::numeric_limits<double>::quiet_NaN();

  const int b = config.bootstrap_resamples;
  auto widen = [](Interval ci, double point) {
    // Percentile intervals need not contain the full-sample statistic.
    if (std::isnan(point)) return ci;
    return Interval{std::min(ci.lo, point), std::max(ci.hi, point)};
  };
  if (b > 0) {
    report.ll_ci = widen(
        BootstrapCi([&](auto l, auto p) { return LogLoss(l, p, clip); }, labels,
                    preds, b, config.seed),
        report.ll);
    report.nll_ci = widen(BootstrapCi(
                              [&](auto l, auto p) {
                                return NormalizedLogLoss(l, p, train_mean_cvr, clip);
                              },
                              labels, preds, b, config.seed),
                          report.nll);
    report.pr_auc_ci =
        has_positive
            ? widen(BootstrapCi([](auto l, auto p) { return PrAuc(l, p); },
                                labels, preds, b, config.seed),
                    report.pr_auc)
            : Interval{report.pr_auc, report.pr_auc};
  } else {
    report.ll_ci = {report.ll, report.ll};
    report.nll_ci = {report.nll, report.nll};
    report.pr_auc_ci = {report.pr_auc, report.pr_auc};
  }
  return report;
}

std::string FormatDouble(double value) {
  if (std::isnan(value)) return "nan";
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%.10g", value);
  return buffer;
}

std::string EvalReportCsvHeader() {
  return "split,trainer,tau,n_test,ll,ll_lo,ll_hi,nll,nll_lo,nll_hi,pr_auc,"
         "pr_auc_lo,pr_auc_hi,mean_pred,mean_label";
}

std::string ToCsvRow(const EvalReport& r) {
  std::string row = std::to_string(r.split) + "," + r.trainer + "," +
                    std::to_string(r.tau) + "," + std::to_string(r.n_test);
  for (const double v : {r.ll, r.ll_ci.lo, r.ll_ci.hi, r.nll, r.nll_ci.lo,
                         r.nll_ci.hi, r.pr_auc, r.pr_auc_ci.lo, r.pr_auc_ci.hi,
                         r.mean_pred, r.mean_label}) {
    row += "," + FormatDouble(v);
  }
  return row;
}

std::string ToJson(const EvalReport& r) {
  auto number = [](double v) {
    return std::isnan(v) ? std::string("null") : FormatDouble(v);
  };
  std::string json = "{\"split\":" + std::to_string(r.split) +
                     ",\"trainer\":\"" + r.trainer +
                     "\",\"tau\":" + std::to_string(r.tau) +
                     ",\"n_test\":" + std::to_string(r.n_test);
  const std::pair<const char*, double> fields[] = {
      {"ll", r.ll},           {"ll_lo", r.ll_ci.lo},
      {"ll_hi", r.ll_ci.hi},  {"nll", r.nll},
      {"nll_lo", r.nll_ci.lo}, {"nll_hi", r.nll_ci.hi},
      {"pr_auc", r.pr_auc},   {"pr_auc_lo", r.pr_auc_ci.lo},
      {"pr_auc_hi", r.pr_auc_ci.hi}, {"mean_pred", r.mean_pred},
      {"mean_label", r.mean_label}};
  for (const auto& [name, value] : fields) {
    json += ",\"" + std::string(name) + "\":" + number(value);
  }
  return json + "}";
}

void WriteReportsCsv(std::ostream& out, std::span<const EvalReport> reports) {
  out << EvalReportCsvHeader() << '\n';
  for (const EvalReport& r : reports) out << ToCsvRow(r) << '\n';
}

void WriteReportsJson(std::ostream& out, std::span<const EvalReport> reports) {
  out << "[\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    out << "  " << ToJson(reports[i]) << (i + 1 < reports.size() ? ",\n" : "\n");
  }
  out << "]\n";
}

}  // namespace fsiw
