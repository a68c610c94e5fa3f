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

// Synthetic delayed-feedback click logs with known ground truth.
//
// Each click has `n_fields` one-hot categorical fields drawn uniformly from
// `cardinality` values. The true conversion probability is
//
//   p(x) = sigmoid(cvr_bias + sum_f cvr_weights[f * cardinality + x_f])
//
// and a converting click has a delay drawn from a family whose base rate is
//
//   rate(x) = exp(rate_bias + sum_f rate_weights[f * cardinality + x_f])
//
// in conversions per second. Delays are rounded up to whole seconds, so a
// click observed for `e` seconds shows its conversion iff the continuous
// delay is <= e and the snapshot label probability is exactly
// p(x) * DelayCdf(e).

#ifndef FSIW_SIMULATOR_H_
#define FSIW_SIMULATOR_H_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "fsiw/core_data.h"

namespace fsiw {

struct DelayFamily {
  enum class Kind { kExponential, kDailyModulated };

  Kind kind = Kind::kExponential;
  // Hazard is rate * (1 + depth * cos(2 pi t / 1 day)), t = time since click.
  double modulation_depth = 0.0;
  // When > 0 the delay distribution is truncated to [0, max_delay].
  Duration max_delay = 0;
};

struct SimConfig {
  std::size_t n_samples = 100000;
  int n_fields = 4;
  int cardinality = 16;
  double cvr_bias = -1.5;
  std::vector<double> cvr_weights;  // Empty or n_fields * cardinality.
  double rate_bias = -11.366;       // log(1 / 1 day).
  std::vector<double> rate_weights;  // Empty or n_fields * cardinality.
  DelayFamily delay;
  Duration time_span = 28 * kDay;
  Timestamp start_ts = 0;
  std::uint64_t seed = 0;

  // Throws ConfigError on inconsistent sizes or modulation_depth
  // outside [0, 1).
  void Validate() const;
};

// Coefficients uniform in [-scale, scale], deterministic in seed.
std::vector<double> DrawCoefficients(std::size_t n, double scale,
                                     std::uint64_t seed);

struct SimSample {
  ClickRecord record;
  int c = 0;
  double true_p = 0.0;
  double true_rate = 0.0;  // Base delay rate, per second.
};

// The latent field values behind a simulated record, parsed back from the
// "v<k>" tokens.
std::vector<int> LatentValues(const ClickRecord& record);

double TrueCvr(const SimConfig& config, std::span<const int> values);
double TrueRate(const SimConfig& config, std::span<const int> values);

// Deterministic in config.seed. Generation is split in fixed-size chunks,
// each drawing from its own substream, so `threads` does not change the
// output.
std::vector<SimSample> GenerateDataset(const SimConfig& config,
                                       int threads = 1);

// P(D <= t | C = 1) for a click with base rate `rate`.
double DelayCdf(const DelayFamily& family, double rate, double t);

// Inverse of DelayCdf for u in [0, 1).
double DelayQuantile(const DelayFamily& family, double rate, double u);

// Feedback shift importance weight computed from ground truth:
//   y = 1: 1 / P(S=1 | C=1, x, e)
//   y = 0: P(C=0 | x) / P(Y=0 | x, e)
// Throws DomainError when e <= 0.
double OracleFsiw(double true_p, double true_rate, double e, int y);
double OracleFsiw(const DelayFamily& family, double true_p, double true_rate,
                  double e, int y);

// Sidecar truth file: index, c, true_p, true_rate (tab separated, with a
// header line).
void WriteTruth(std::ostream& out, std::span<const SimSample> samples);

struct TruthRow {
  int c = 0;
  double true_p = 0.0;
  double true_rate = 0.0;
};
std::vector<TruthRow> ReadTruth(std::istream& in);

}  // namespace fsiw

#endif  // FSIW_SIMULATOR_H_
