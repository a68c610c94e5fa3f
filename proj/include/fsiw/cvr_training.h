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

// Conversion rate predictors.
//
//  * Importance-weighted logistic regression: minimizes
//      (1/n) sum_i w_i logloss(y_i, sigmoid(theta . x_i)) + (l2/2) ||theta||^2
//    where w_i are feedback shift importance weights.
//  * Naive logistic regression: the same with w_i = 1.
//  * Delayed feedback model (DFM): a joint CVR / exponential delay model
//    trained on the censored likelihood
//      y = 1: -log p(x) - log rate(x) + rate(x) d
//      y = 0: -log(1 - p(x) + p(x) exp(-rate(x) e))
//    with p(x) = sigmoid(w_c . x) and rate(x) = exp(w_d . x).
//
// Biases are never regularized.

#ifndef FSIW_CVR_TRAINING_H_
#define FSIW_CVR_TRAINING_H_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "fsiw/core_data.h"
#include "fsiw/optimizer.h"

namespace fsiw {

struct TrainingMeta {
  std::uint64_t seed = 0;
  int iterations = 0;
  double final_loss = 0.0;
  bool converged = false;
};

struct LinearCvrModel {
  std::uint32_t dim = 0;
  std::vector<double> weights;
  double bias = 0.0;
  double l2 = 0.0;
  TrainingMeta meta;

  // Zero model of the given dimension; predicts 0.5 everywhere.
  static LinearCvrModel Zero(std::uint32_t dim);
};

struct DfmModel {
  std::uint32_t dim = 0;
  std::vector<double> cvr_weights;
  double cvr_bias = 0.0;
  // Log-rate coefficients, rate in conversions per day.
  std::vector<double> delay_weights;
  double delay_bias = 0.0;
  double l2 = 0.0;
  TrainingMeta meta;
};

// Training samples paired with their importance weights.
struct WeightedDataset {
  std::vector<LabeledSample> samples;
  std::vector<double> weights;

  // Unit weights.
  static WeightedDataset Uniform(std::vector<LabeledSample> samples);
};

LinearCvrModel TrainWeightedLogistic(const WeightedDataset& data, double l2,
                                     const OptimizerConfig& opt,
                                     const WeightedDataset* validation = nullptr);

LinearCvrModel TrainNaiveLogistic(std::span<const LabeledSample> data,
                                  double l2, const OptimizerConfig& opt,
                                  const WeightedDataset* validation = nullptr);

DfmModel TrainDfm(std::span<const LabeledSample> data, double l2,
                  const OptimizerConfig& opt);

// Throws Error when x.dim differs from the model dimension.
double PredictCvr(const LinearCvrModel& model, const FeatureVector& x);
double PredictCvr(const DfmModel& model, const FeatureVector& x);

// Delay rate of the DFM in conversions per second.
double PredictDelayRate(const DfmModel& model, const FeatureVector& x);

// Objective of TrainWeightedLogistic at params = [weights..., bias].
double WeightedLogisticObjective(const WeightedDataset& data, double l2,
                                 LossNormalization normalization,
                                 std::span<const double> params,
                                 std::span<double> grad);

// Negative log-likelihood of one DFM sample given the CVR logit and the log
// delay rate (per day). `d_days` is used when y = 1 and `e_days` when y = 0.
// Writes the partial derivatives with respect to both logits.
double DfmSampleNll(double cvr_logit, double log_rate, int y, double d_days,
                    double e_days, double* d_cvr_logit = nullptr,
                    double* d_log_rate = nullptr);

// Objective of TrainDfm at params = [cvr weights, cvr bias, delay weights,
// delay bias].
double DfmObjective(std::span<const LabeledSample> data, std::uint32_t dim,
                    double l2, LossNormalization normalization,
                    std::span<const double> params, std::span<double> grad);

// Text model blobs. The first line is "fsiw-model 1"; see README.md.
void SaveModel(std::ostream& out, const LinearCvrModel& model);
void SaveModel(std::ostream& out, const DfmModel& model);
using AnyCvrModel = std::variant<LinearCvrModel, DfmModel>;
AnyCvrModel LoadModel(std::istream& in);

}  // namespace fsiw

#endif  // FSIW_CVR_TRAINING_H_
