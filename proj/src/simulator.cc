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

#include "fsiw/simulator.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>

#include "fsiw/errors.h"
#include "fsiw/random.h"

namespace fsiw {
namespace {

constexpr std::size_t kChunkSize = 1 << 16;
constexpr double kPeriod = static_cast<double>(kDay);

double Sigmoid(double z) {
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

double LinearScore(const SimConfig& config, const std::vector<double>& weights,
                   double bias, std::span<const int> values) {
  double z = bias;
  if (weights.empty()) return z;
  for (std::size_t f = 0; f < values.size(); ++f) {
    z += weights[f * config.cardinality + values[f]];
  }
  return z;
}

// Integrated hazard of the untruncated family.
double CumulativeHazard(const DelayFamily& family, double rate, double t) {
  if (family.kind == DelayFamily::Kind::kExponential) return rate * t;
  const double omega = 2.0 * std::numbers::pi / kPeriod;
  return rate * (t + family.modulation_depth * std::sin(omega * t) / omega);
}

double HazardInverse(const DelayFamily& family, double rate, double h) {
  if (family.kind == DelayFamily::Kind::kExponential) return h / rate;
  // H(t) is strictly increasing and within rate * m / omega of rate * t.
  const double omega = 2.0 * std::numbers::pi / kPeriod;
  const double slack = family.modulation_depth / omega;
  double lo = std::max(0.0, h / rate - slack);
  double hi = h / rate + slack;
  double t = std::clamp(h / rate, lo, hi);
  for (int iter = 0; iter < 200; ++iter) {
    const double value = CumulativeHazard(family, rate, t) - h;
    if (value > 0) {
      hi = t;
    } else {
      lo = t;
    }
    const double slope =
        rate * (1.0 + family.modulation_depth * std::cos(omega * t));
    double next = t - value / slope;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - t) <= 1e-12 * std::max(1.0, t)) return next;
    t = next;
  }
  return t;
}

// P(D > t | C = 1) for the untruncated family.
double RawSurvival(const DelayFamily& family, double rate, double t) {
  return std::exp(-CumulativeHazard(family, rate, t));
}

double RawCdf(const DelayFamily& family, double rate, double t) {
  return -std::expm1(-CumulativeHazard(family, rate, t));
}

}  // namespace

void SimConfig::Validate() const {
  if (n_fields < 0 || cardinality < 1) {
    throw ConfigError("simulator needs n_fields >= 0 and cardinality >= 1");
  }
  const std::size_t n = static_cast<std::size_t>(n_fields) * cardinality;
  if (!cvr_weights.empty() && cvr_weights.size() != n) {
    throw ConfigError("cvr_weights must have n_fields * cardinality entries");
  }
  if (!rate_weights.empty() && rate_weights.size() != n) {
    throw ConfigError("rate_weights must have n_fields * cardinality entries");
  }
  if (!(delay.modulation_depth >= 0.0 && delay.modulation_depth < 1.0)) {
    throw ConfigError("modulation_depth must be in [0, 1)");
  }
  if (delay.max_delay < 0) throw ConfigError("max_delay must be >= 0");
  if (time_span <= 0) throw ConfigError("time_span must be positive");
}

std::vector<double> DrawCoefficients(std::size_t n, double scale,
                                     std::uint64_t seed) {
  RandomEngine rng(seed);
  std::vector<double> out(n);
  for (double& v : out) v = scale * (2.0 * rng.Uniform() - 1.0);
  return out;
}

std::vector<int> LatentValues(const ClickRecord& record) {
  std::vector<int> values;
  values.reserve(record.features.size());
  for (const RawFeature& feature : record.features) {
    int v = 0;
    const std::string& token = feature.token;
    if (token.size() < 2 || token[0] != 'v' ||
        std::from_chars(token.data() + 1, token.data() + token.size(), v).ec !=
            std::errc()) {
      throw Error("not a simulated token: '" + token + "'");
    }
    values.push_back(v);
  }
  return values;
}

double TrueCvr(const SimConfig& config, std::span<const int> values) {
  return Sigmoid(
      LinearScore(config, config.cvr_weights, config.cvr_bias, values));
}

double TrueRate(const SimConfig& config, std::span<const int> values) {
  return std::exp(
      LinearScore(config, config.rate_weights, config.rate_bias, values));
}

double DelayCdf(const DelayFamily& family, double rate, double t) {
  if (t <= 0) return 0.0;
  if (family.max_delay > 0) {
    const double max_delay = static_cast<double>(family.max_delay);
    if (t >= max_delay) return 1.0;
    return RawCdf(family, rate, t) / RawCdf(family, rate, max_delay);
  }
  return RawCdf(family, rate, t);
}

double DelayQuantile(const DelayFamily& family, double rate, double u) {
  double target = u;
  if (family.max_delay > 0) {
    target *= RawCdf(family, rate, static_cast<double>(family.max_delay));
  }
  const double h = -std::log1p(-target);
  double t = HazardInverse(family, rate, h);
  if (family.max_delay > 0) {
    t = std::min(t, static_cast<double>(family.max_delay));
  }
  return t;
}

std::vector<SimSample> GenerateDataset(const SimConfig& config, int threads) {
  config.Validate();
  std::vector<SimSample> out(config.n_samples);
  const std::size_t n_chunks = (config.n_samples + kChunkSize - 1) / kChunkSize;

  auto fill_chunk = [&](std::size_t chunk) {
    RandomEngine rng = RandomEngine::Substream(config.seed, chunk);
    std::vector<int> values(config.n_fields);
    const std::size_t begin = chunk * kChunkSize;
    const std::size_t end = std::min(config.n_samples, begin + kChunkSize);
    for (std::size_t i = begin; i < end; ++i) {
      SimSample& sample = out[i];
      sample.record.click_ts =
          config.start_ts + static_cast<Timestamp>(rng.UniformInt(
                                static_cast<std::uint64_t>(config.time_span)));
      sample.record.features.clear();
      for (int f = 0; f < config.n_fields; ++f) {
        values[f] = static_cast<int>(rng.UniformInt(config.cardinality));
        sample.record.features.push_back({f, "v" + std::to_string(values[f])});
      }
      sample.true_p = TrueCvr(config, values);
      sample.true_rate = TrueRate(config, values);
      const double u_conv = rng.Uniform();
      const double u_delay = rng.Uniform();
      sample.c = u_conv < sample.true_p ? 1 : 0;
      sample.record.conv_ts.reset();
      if (sample.c == 1) {
        const double delay = DelayQuantile(config.delay, sample.true_rate, u_delay);
        sample.record.conv_ts =
            sample.record.click_ts + static_cast<Duration>(std::ceil(delay));
      }
    }
  };

  const std::size_t n_workers = std::clamp<std::size_t>(
      threads > 0 ? static_cast<std::size_t>(threads) : 1, 1,
      std::max<std::size_t>(1, n_chunks));
  if (n_workers == 1) {
    for (std::size_t chunk = 0; chunk < n_chunks; ++chunk) fill_chunk(chunk);
    return out;
  }
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < n_workers; ++w) {
    workers.emplace_back([&, w] {
      for (std::size_t chunk = w; chunk < n_chunks; chunk += n_workers) {
        fill_chunk(chunk);
      }
    });
  }
  for (auto& worker : workers) worker.join();
  return out;
}

double OracleFsiw(const DelayFamily& family, double true_p, double true_rate,
                  double e, int y) {
  if (!(e > 0)) {
    throw DomainError("oracle FSIW needs elapsed time > 0, got " +
                      std::to_string(e));
  }
  double cdf = 0.0;
  double survival = 0.0;
  if (family.max_delay > 0) {
    cdf = DelayCdf(family, true_rate, e);
    survival = 1.0 - cdf;
  } else {
    cdf = RawCdf(family, true_rate, e);
    survival = RawSurvival(family, true_rate, e);
  }
  if (y == 1) return 1.0 / cdf;
  return (1.0 - true_p) / ((1.0 - true_p) + true_p * survival);
}

double OracleFsiw(double true_p, double true_rate, double e, int y) {
  return OracleFsiw(DelayFamily{}, true_p, true_rate, e, y);
}

void WriteTruth(std::ostream& out, std::span<const SimSample> samples) {
  out << "index\tc\ttrue_p\ttrue_rate\n";
  char buffer[96];
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::snprintf(buffer, sizeof(buffer), "%zu\t%d\t%.17g\t%.17g\n", i,
                  samples[i].c, samples[i].true_p, samples[i].true_rate);
    out << buffer;
  }
}

std::vector<TruthRow> ReadTruth(std::istream& in) {
  std::vector<TruthRow> rows;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.empty() || line_number == 1) continue;
    std::istringstream fields(line);
    std::size_t index = 0;
    TruthRow row;
    if (!(fields >> index >> row.c >> row.true_p >> row.true_rate)) {
      throw ParseError(line_number, 0, "malformed truth row");
    }
    if (index != rows.size()) {
      throw ParseError(line_number, 0, "truth rows out of order");
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace fsiw
