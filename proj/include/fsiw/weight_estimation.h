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

// Feedback shift importance weights estimated from the artificial datasets.
//
// Two classifiers over (x, elapsed time) are fitted:
//
//   pos: trained on D1, estimates P(S=1 | C=1, x, e).
//        A y = 1 training sample gets weight 1 / pos(x, e).
//   neg: trained on D0, estimates 1 - P(S=0, C=1 | x, e) / P(Y=0 | x, e).
//        A y = 0 training sample gets weight neg(x, e).
//
// Both are trained on the adjusted elapsed time and queried with the
// original one. Predictions are clipped to [clip_floor, 1].

#ifndef FSIW_WEIGHT_ESTIMATION_H_
#define FSIW_WEIGHT_ESTIMATION_H_

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "fsiw/core_data.h"
#include "fsiw/cvr_training.h"
#include "fsiw/optimizer.h"
#include "fsiw/relabeling.h"

namespace fsiw {

// Dense elapsed-time features: log(e / 1 day) followed by one step
// indicator 1{e >= edge} per edge.
struct ElapsedTimeBasis {
  std::vector<Duration> edges = {kHour,    6 * kHour, 12 * kHour, kDay,
                                 2 * kDay, 4 * kDay,  7 * kDay};

  std::size_t size() const { return 1 + edges.size(); }
  void Features(Duration e, std::span<double> out) const;
};

struct WeightModelConfig {
  double l2 = 1e-5;
  ElapsedTimeBasis basis;
  OptimizerConfig optimizer;
  // Share of the artificial dataset held out for early stopping.
  double holdout_fraction = 0.1;
  std::uint64_t seed = 0;
};

// Logistic classifier over hashed features and the elapsed-time basis, or a
// constant when the training data had a single class.
class WeightModel {
 public:
  static WeightModel Constant(double probability);
  // Wraps an arbitrary probability function, e.g. a closed-form oracle.
  static WeightModel FromFunction(
      std::function<double(const FeatureVector&, Duration)> fn);

  WeightModel(std::uint32_t dim, ElapsedTimeBasis basis,
              std::vector<double> params);

  double Predict(const FeatureVector& x, Duration e) const;

  bool is_constant() const { return is_constant_; }
  std::span<const double> params() const { return params_; }

 private:
  WeightModel() = default;

  bool is_constant_ = false;
  std::function<double(const FeatureVector&, Duration)> fn_;
  double constant_ = 1.0;
  std::uint32_t dim_ = 0;
  ElapsedTimeBasis basis_;
  std::vector<double> params_;
};

struct WeightModelFit {
  WeightModel model;
  // Set when the data had fewer than two classes and a constant was fitted.
  bool single_class = false;
  int iterations = 0;
};

WeightModelFit FitWeightModel(std::span<const ArtificialSample> data,
                              const WeightModelConfig& config);

struct WeightModelPair {
  WeightModel model_pos = WeightModel::Constant(1.0);
  WeightModel model_neg = WeightModel::Constant(1.0);
  double clip_floor = 0.01;

  // Clipped predictions.
  double PositiveProbability(const FeatureVector& x, Duration e) const;
  double NegativeProbability(const FeatureVector& x, Duration e) const;
};

// Weights every sample of `train` using its original elapsed time.
WeightedDataset AssignFsiw(const WeightModelPair& models,
                           std::span<const LabeledSample> train);

// TSV dump: index, source, y, e, weight.
void WriteWeights(std::ostream& out, const WeightedDataset& data);

}  // namespace fsiw

#endif  // FSIW_WEIGHT_ESTIMATION_H_
