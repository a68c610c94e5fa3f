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

#include "fsiw/weight_estimation.h"

#include <cmath>
#include <map>
#include <sstream>

#include <gtest/gtest.h>

#include "fsiw/random.h"
#include "fsiw/simulator.h"

namespace fsiw {
namespace {

ArtificialSample Artificial(std::uint32_t index, Duration e_adj, int s) {
  ArtificialSample a;
  a.x.dim = 16;
  a.x.indices = {index};
  a.e_adj = e_adj;
  a.e = e_adj + kDay;
  a.s = s;
  return a;
}

LabeledSample Labeled(int y, Duration e) {
  LabeledSample s;
  s.x.dim = 16;
  s.x.indices = {3};
  s.y = y;
  s.e = e;
  if (y) s.d = 1;
  return s;
}

struct SimulatedTrain {
  SimConfig sim;
  std::vector<SimSample> samples;
  std::vector<FeatureVector> features;
  std::vector<LabeledSample> train;
};

SimulatedTrain Simulate(std::uint64_t seed, std::size_t n) {
  SimulatedTrain out;
  SimConfig& sim = out.sim;
  sim.n_samples = n;
  sim.n_fields = 1;
  sim.cardinality = 4;
  sim.cvr_bias = -1.0;
  sim.cvr_weights = {-0.5, 0.0, 0.4, 0.9};
  sim.rate_bias = -std::log(static_cast<double>(kDay));
  sim.rate_weights = {-0.7, 0.0, 0.3, 0.8};
  sim.time_span = 21 * kDay;
  sim.seed = seed;
  out.samples = GenerateDataset(sim);
  std::vector<ClickRecord> records;
  for (const auto& s : out.samples) records.push_back(s.record);
  out.features = HashAll(records, {1u << 8, 0});
  out.train = SnapshotLabels(records, out.features, sim.time_span);
  return out;
}

TEST(ElapsedTimeBasisTest, Features) {
  ElapsedTimeBasis basis;
  std::vector<double> f(basis.size());
  basis.Features(kDay, f);
  EXPECT_DOUBLE_EQ(f[0], 0.0);
  const std::vector<double> steps(f.begin() + 1, f.end());
  EXPECT_EQ(steps, (std::vector<double>{1, 1, 1, 1, 0, 0, 0}));
  basis.Features(30 * 60, f);
  EXPECT_NEAR(f[0], std::log(1.0 / 48.0), 1e-15);
  EXPECT_EQ(f[1], 0.0);
}

TEST(FitWeightModelTest, SingleClass) {
  std::vector<ArtificialSample> data = {Artificial(1, 100, 1), Artificial(2, 200, 1)};
  const WeightModelFit fit = FitWeightModel(data, {});
  EXPECT_TRUE(fit.single_class);
  EXPECT_TRUE(fit.model.is_constant());
  EXPECT_EQ(fit.model.Predict(data[0].x, 5), 1.0);

  for (auto& a : data) a.s = 0;
  const WeightModelFit zero = FitWeightModel(data, {});
  EXPECT_TRUE(zero.single_class);
  EXPECT_EQ(zero.model.Predict(data[0].x, 5), 0.0);

  const WeightModelFit empty = FitWeightModel({}, {});
  EXPECT_TRUE(empty.single_class);
  EXPECT_EQ(empty.model.Predict(data[0].x, 5), 1.0);
}

TEST(FitWeightModelTest, DuplicatedDataGivesSameModel) {
  RandomEngine rng(1);
  std::vector<ArtificialSample> data;
  for (int i = 0; i < 400; ++i) {
    const auto idx = static_cast<std::uint32_t>(rng.UniformInt(16));
    const Duration e = 1 + static_cast<Duration>(rng.UniformInt(5 * kDay));
    data.push_back(Artificial(idx, e, rng.Bernoulli(0.3 + 0.04 * idx) ? 1 : 0));
  }
  std::vector<ArtificialSample> twice = data;
  twice.insert(twice.end(), data.begin(), data.end());
  WeightModelConfig config;
  config.optimizer.tolerance = 1e-14;
  const WeightModelFit fit_once = FitWeightModel(data, config);
  const WeightModelFit fit_twice = FitWeightModel(twice, config);
  const auto a = fit_once.model.params();
  const auto b = fit_twice.model.params();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t j = 0; j < a.size(); ++j) EXPECT_NEAR(a[j], b[j], 1e-6);
}

TEST(FitWeightModelTest, RecoversConditionalProbability) {
  RelabelConfig relabel;
  relabel.tau = 7 * kDay;
  relabel.window = 21 * kDay;
  const SimulatedTrain fit_data = Simulate(2, 100000);
  relabel.training_end = fit_data.sim.time_span;
  const ArtificialDatasets fit_sets = BuildArtificialDatasets(fit_data.train, relabel);
  WeightModelConfig config;
  config.seed = 3;
  const WeightModelFit fit = FitWeightModel(fit_sets.d1, config);
  ASSERT_FALSE(fit.single_class);

  // Fresh data: P(S=1 | converted by T, x, e') = F(e') / F(e' + tau).
  const SimulatedTrain held = Simulate(4, 20000);
  const ArtificialDatasets held_sets = BuildArtificialDatasets(held.train, relabel);
  double error = 0.0;
  for (const ArtificialSample& a : held_sets.d1) {
    const double rate = held.samples[a.source].true_rate;
    const double e = static_cast<double>(a.e_adj);
    const double oracle = DelayCdf(held.sim.delay, rate, e) /
                          DelayCdf(held.sim.delay, rate, e + static_cast<double>(relabel.tau));
    error += std::abs(fit.model.Predict(a.x, a.e_adj) - oracle);
  }
  EXPECT_LT(error / static_cast<double>(held_sets.d1.size()), 0.05);
}

TEST(AssignFsiwTest, ReciprocalAndClipping) {
  WeightModelPair pair;
  pair.model_pos = WeightModel::Constant(0.5);
  pair.model_neg = WeightModel::Constant(0.8);
  const std::vector<LabeledSample> train = {Labeled(1, 100), Labeled(0, 100)};
  WeightedDataset out = AssignFsiw(pair, train);
  EXPECT_EQ(out.weights[0], 2.0);
  EXPECT_EQ(out.weights[1], 0.8);

  pair.model_pos = WeightModel::Constant(0.001);
  pair.model_neg = WeightModel::Constant(0.0);
  pair.clip_floor = 0.01;
  out = AssignFsiw(pair, train);
  EXPECT_DOUBLE_EQ(out.weights[0], 100.0);
  EXPECT_EQ(out.weights[1], 0.01);
}

TEST(AssignFsiwTest, UsesOriginalElapsedTime) {
  ElapsedTimeBasis basis;
  std::vector<double> params(16 + basis.size() + 1, 0.0);
  params[16] = 1.0;  // Coefficient on log(e / 1 day).
  WeightModelPair pair;
  pair.model_pos = WeightModel(16, basis, params);
  pair.model_neg = WeightModel(16, basis, params);
  pair.clip_floor = 1e-6;
  const std::vector<LabeledSample> train = {Labeled(1, 2 * kDay), Labeled(0, 3 * kDay)};
  const WeightedDataset out = AssignFsiw(pair, train);
  EXPECT_NEAR(out.weights[0], 1.0 + 1.0 / 2.0, 1e-12);
  EXPECT_NEAR(out.weights[1], 3.0 / 4.0, 1e-12);
}

TEST(AssignFsiwTest, OracleModelsReproduceOracleWeights) {
  const SimulatedTrain data = Simulate(5, 20000);
  std::map<std::vector<std::uint32_t>, std::pair<double, double>> truth;
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    truth[data.features[i].indices] = {data.samples[i].true_p, data.samples[i].true_rate};
  }
  const DelayFamily family = data.sim.delay;
  WeightModelPair pair;
  pair.clip_floor = 1e-300;
  pair.model_pos = WeightModel::FromFunction([&](const FeatureVector& x, Duration e) {
    return 1.0 / OracleFsiw(family, truth[x.indices].first, truth[x.indices].second,
                            static_cast<double>(e), 1);
  });
  pair.model_neg = WeightModel::FromFunction([&](const FeatureVector& x, Duration e) {
    return OracleFsiw(family, truth[x.indices].first, truth[x.indices].second,
                      static_cast<double>(e), 0);
  });
  const WeightedDataset out = AssignFsiw(pair, data.train);
  double weighted_positive = 0.0;
  double true_positive = 0.0;
  for (std::size_t k = 0; k < out.samples.size(); ++k) {
    const LabeledSample& s = out.samples[k];
    const SimSample& sim = data.samples[s.source];
    const double oracle =
        OracleFsiw(family, sim.true_p, sim.true_rate, static_cast<double>(s.e), s.y);
    EXPECT_NEAR(out.weights[k], oracle, 1e-9 * oracle);
    EXPECT_GT(out.weights[k], 0.0);
    if (s.y == 1) EXPECT_GE(out.weights[k], 1.0);
    if (s.y == 0) EXPECT_LE(out.weights[k], 1.0);
    weighted_positive += s.y * out.weights[k];
    true_positive += sim.c;
  }
  // Weighted positive mass estimates the true conversion count.
  const double n = static_cast<double>(out.samples.size());
  const double p = true_positive / n;
  EXPECT_NEAR(weighted_positive / n, p, 4.0 * std::sqrt(p * (1 - p) / n) + 0.01);
}

TEST(AssignFsiwTest, FittedWeightsRespectRanges) {
  const SimulatedTrain data = Simulate(6, 30000);
  RelabelConfig relabel;
  relabel.tau = 7 * kDay;
  relabel.training_end = data.sim.time_span;
  const ArtificialDatasets sets = BuildArtificialDatasets(data.train, relabel);
  WeightModelPair pair;
  pair.model_pos = FitWeightModel(sets.d1, {}).model;
  pair.model_neg = FitWeightModel(sets.d0, {}).model;
  const WeightedDataset out = AssignFsiw(pair, data.train);
  ASSERT_EQ(out.weights.size(), data.train.size());
  for (std::size_t k = 0; k < out.samples.size(); ++k) {
    EXPECT_GT(out.weights[k], 0.0);
    if (out.samples[k].y == 1) {
      EXPECT_GE(out.weights[k], 1.0);
      EXPECT_LE(out.weights[k], 100.0);
    } else {
      EXPECT_LE(out.weights[k], 1.0);
      EXPECT_GE(out.weights[k], 0.01);
    }
  }
  std::ostringstream dump;
  WriteWeights(dump, out);
  EXPECT_EQ(dump.str().substr(0, dump.str().find('\n')), "index\tsource\ty\te\tweight");
}

}  // namespace
}  // namespace fsiw
