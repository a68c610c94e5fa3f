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

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>

#include "fsiw/errors.h"
#include "fsiw/logistic.h"
#include "fsiw/random.h"

namespace fsiw {
namespace {

// Holdout membership depends only on the sample content, so duplicated
// samples always land on the same side.
bool InHoldout(const ArtificialSample& sample, double fraction,
               std::uint64_t seed) {
  std::uint64_t h = SplitMix64(seed ^ 0x5bd1e995ULL);
  for (const std::uint32_t i : sample.x.indices) h = SplitMix64(h ^ i);
  h = SplitMix64(h ^ static_cast<std::uint64_t>(sample.e_adj));
  h = SplitMix64(h ^ static_cast<std::uint64_t>(sample.s));
  return static_cast<double>(h >> 11) * 0x1.0p-53 < fraction;
}

}  // namespace

void ElapsedTimeBasis::Features(Duration e, std::span<double> out) const {
  const double seconds = std::max<double>(1.0, static_cast<double>(e));
  out[0] = std::log(seconds / static_cast<double>(kDay));
  for (std::size_t k = 0; k < edges.size(); ++k) {
    out[1 + k] = e >= edges[k] ? 1.0 : 0.0;
  }
}

WeightModel WeightModel::Constant(double probability) {
  WeightModel model;
  model.is_constant_ = true;
  model.constant_ = probability;
  return model;
}

WeightModel WeightModel::FromFunction(
    std::function<double(const FeatureVector&, Duration)> fn) {
  WeightModel model;
  model.fn_ = std::move(fn);
  return model;
}

WeightModel::WeightModel(std::uint32_t dim, ElapsedTimeBasis basis,
                         std::vector<double> params)
    : dim_(dim), basis_(std::move(basis)), params_(std::move(params)) {
  if (params_.size() != dim_ + basis_.size() + 1) {
    throw Error("weight model parameter count mismatch");
  }
}

double WeightModel::Predict(const FeatureVector& x, Duration e) const {
  if (is_constant_) return constant_;
  if (fn_) return fn_(x, e);
  if (x.dim != dim_) {
    throw Error("feature dimension " + std::to_string(x.dim) +
                " does not match weight model dimension " +
                std::to_string(dim_));
  }
  double z = params_.back();
  for (const std::uint32_t i : x.indices) z += params_[i];
  std::vector<double> dense(basis_.size());
  basis_.Features(e, dense);
  for (std::size_t j = 0; j < dense.size(); ++j) z += params_[dim_ + j] * dense[j];
  return Sigmoid(z);
}

WeightModelFit FitWeightModel(std::span<const ArtificialSample> data,
                              const WeightModelConfig& config) {
  std::size_t positives = 0;
  for (const ArtificialSample& sample : data) positives += sample.s == 1;
  if (data.empty() || positives == 0 || positives == data.size()) {
    const double rate =
        data.empty() ? 1.0
                     : static_cast<double>(positives) / static_cast<double>(data.size());
    return {WeightModel::Constant(rate), true, 0};
  }

  const std::uint32_t dim = data.front().x.dim;
  const ElapsedTimeBasis& basis = config.basis;
  LogisticProblem train(dim, basis.size());
  LogisticProblem holdout(dim, basis.size());
  std::vector<double> dense(basis.size());
  for (const ArtificialSample& sample : data) {
    basis.Features(sample.e_adj, dense);
    LogisticProblem& target =
        InHoldout(sample, config.holdout_fraction, config.seed) ? holdout : train;
    target.Add(sample.x, dense, sample.s, 1.0);
  }
  bool early_stopping = holdout.size() > 0;
  if (train.size() == 0) {
    // Too little data to hold anything out.
    train = std::move(holdout);
    holdout = LogisticProblem(dim, basis.size());
    early_stopping = false;
  }

  std::vector<double> params(train.n_params(), 0.0);
  const double rate =
      static_cast<double>(positives) / static_cast<double>(data.size());
  params.back() = std::log(rate / (1.0 - rate));

  auto objective = [&](std::span<const double> p, std::span<double> g) {
    return train.Objective(p, g, config.l2, config.optimizer.normalization);
  };

  std::vector<double> best = params;
  double best_loss = early_stopping ? holdout.MeanLoss(params)
                                    : std::numeric_limits<double>::infinity();
  int stale = 0;
  IterationCallback callback;
  if (early_stopping) {
    callback = [&](int, std::span<const double> p) {
      const double loss = holdout.MeanLoss(p);
      if (loss < best_loss) {
        best_loss = loss;
        best.assign(p.begin(), p.end());
        stale = 0;
        return false;
      }
      return ++stale >= config.optimizer.patience;
    };
  }

  OptimizerConfig opt = config.optimizer;
  if (opt.method == OptimizerMethod::kMiniBatch) opt.method = OptimizerMethod::kLbfgs;
  const MinimizeResult result = Minimize(objective, params, opt, callback);
  if (early_stopping) params = std::move(best);
  return {WeightModel(dim, basis, std::move(params)), false, result.iterations};
}

double WeightModelPair::PositiveProbability(const FeatureVector& x,
                                            Duration e) const {
  return std::clamp(model_pos.Predict(x, e), clip_floor, 1.0);
}

double WeightModelPair::NegativeProbability(const FeatureVector& x,
                                            Duration e) const {
  return std::clamp(model_neg.Predict(x, e), clip_floor, 1.0);
}

WeightedDataset AssignFsiw(const WeightModelPair& models,
                           std::span<const LabeledSample> train) {
  WeightedDataset out;
  out.samples.assign(train.begin(), train.end());
  out.weights.reserve(train.size());
  for (const LabeledSample& sample : train) {
    out.weights.push_back(sample.y == 1
                              ? 1.0 / models.PositiveProbability(sample.x, sample.e)
                              : models.NegativeProbability(sample.x, sample.e));
  }
  return out;
}

void WriteWeights(std::ostream& out, const WeightedDataset& data) {
  out << "index\tsource\ty\te\tweight\n";
  char buffer[128];
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    const LabeledSample& s = data.samples[i];
    std::snprintf(buffer, sizeof(buffer), "%zu\t%zu\t%d\t%lld\t%.17g\n", i,
                  s.source, s.y, static_cast<long long>(s.e), data.weights[i]);
    out << buffer;
  }
}

}  // namespace fsiw
