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

#include "fsiw/cvr_training.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include "fsiw/errors.h"
#include "fsiw/logistic.h"

namespace fsiw {
namespace {

constexpr double kSecondsPerDay = static_cast<double>(kDay);

double Logit(double p) {
  p = std::clamp(p, 1e-6, 1.0 - 1e-6);
  return std::log(p / (1.0 - p));
}

void CheckDim(std::uint32_t model_dim, const FeatureVector& x) {
  if (x.dim != model_dim) {
    throw Error("feature dimension " + std::to_string(x.dim) +
                " does not match model dimension " + std::to_string(model_dim));
  }
}

double SparseDot(std::span<const double> weights, const FeatureVector& x) {
  double z = 0.0;
  for (const std::uint32_t i : x.indices) z += weights[i];
  return z;
}

LogisticProblem BuildProblem(const WeightedDataset& data) {
  if (data.samples.empty()) throw TrainingError("no training samples");
  if (data.weights.size() != data.samples.size()) {
    throw TrainingError("weights are not aligned with samples");
  }
  LogisticProblem problem(data.samples.front().x.dim, 0);
  for (std::size_t i = 0; i < data.samples.size(); ++i) {
    const double w = data.weights[i];
    if (!std::isfinite(w)) {
      throw TrainingError("non-finite loss at sample " + std::to_string(i) +
                          ": weight is not finite");
    }
    if (!(w > 0)) {
      throw TrainingError("weight of sample " + std::to_string(i) +
                          " is not positive");
    }
    problem.Add(data.samples[i].x, {}, data.samples[i].y, w);
  }
  return problem;
}

double Scale(LossNormalization normalization, std::size_t n) {
  return normalization == LossNormalization::kMean ? 1.0 / static_cast<double>(n)
                                                   : 1.0;
}

void WriteSparse(std::ostream& out, const char* name,
                 std::span<const double> values) {
  std::size_t nnz = 0;
  for (const double v : values) nnz += v != 0.0;
  out << name << ' ' << nnz << '\n';
  char buffer[64];
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] == 0.0) continue;
    std::snprintf(buffer, sizeof(buffer), "%zu %.17g\n", i, values[i]);
    out << buffer;
  }
}

void WriteScalar(std::ostream& out, const char* name, double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof(buffer), "%s %.17g\n", name, value);
  out << buffer;
}

void WriteMeta(std::ostream& out, const TrainingMeta& meta, double l2) {
  out << "seed " << meta.seed << '\n';
  out << "iterations " << meta.iterations << '\n';
  out << "converged " << (meta.converged ? 1 : 0) << '\n';
  WriteScalar(out, "final_loss", meta.final_loss);
  WriteScalar(out, "l2", l2);
}

}  // namespace

LinearCvrModel LinearCvrModel::Zero(std::uint32_t dim) {
  LinearCvrModel model;
  model.dim = dim;
  model.weights.assign(dim, 0.0);
  return model;
}

WeightedDataset WeightedDataset::Uniform(std::vector<LabeledSample> samples) {
  WeightedDataset data;
  data.weights.assign(samples.size(), 1.0);
  data.samples = std::move(samples);
  return data;
}

double WeightedLogisticObjective(const WeightedDataset& data, double l2,
                                 LossNormalization normalization,
                                 std::span<const double> params,
                                 std::span<double> grad) {
  return BuildProblem(data).Objective(params, grad, l2, normalization);
}

LinearCvrModel TrainWeightedLogistic(const WeightedDataset& data, double l2,
                                     const OptimizerConfig& opt,
                                     const WeightedDataset* validation) {
  const LogisticProblem problem = BuildProblem(data);
  const std::uint32_t dim = problem.sparse_dim();

  double weighted_positive = 0.0;
  double total_weight = 0.0;
  for (std::size_t i = 0; i < problem.size(); ++i) {
    weighted_positive += problem.weight(i) * problem.label(i);
    total_weight += problem.weight(i);
  }
  std::vector<double> params(problem.n_params(), 0.0);
  params.back() = Logit(weighted_positive / total_weight);

  auto objective = [&](std::span<const double> p, std::span<double> g) {
    return problem.Objective(p, g, l2, opt.normalization);
  };

  // Early stopping on the importance-weighted validation loss.
  std::optional<LogisticProblem> holdout;
  std::vector<double> best_params;
  double best_loss = std::numeric_limits<double>::infinity();
  int stale = 0;
  IterationCallback callback;
  if (validation != nullptr && !validation->samples.empty()) {
    holdout.emplace(BuildProblem(*validation));
    if (holdout->sparse_dim() != dim) {
      throw TrainingError("validation dimension does not match training data");
    }
    best_params = params;
    best_loss = holdout->MeanLoss(params);
    callback = [&](int, std::span<const double> p) {
      const double loss = holdout->MeanLoss(p);
      if (loss < best_loss) {
        best_loss = loss;
        best_params.assign(p.begin(), p.end());
        stale = 0;
        return false;
      }
      return ++stale >= opt.patience;
    };
  }

  MinimizeResult result;
  if (opt.method == OptimizerMethod::kMiniBatch) {
    auto batch = [&](std::span<const std::size_t> rows,
                     std::span<const double> p, std::span<double> g) {
      return problem.Objective(p, g, l2, opt.normalization, rows);
    };
    result = MinimizeMiniBatch(batch, objective, problem.size(), params, opt,
                               callback);
  } else {
    result = Minimize(objective, params, opt, callback);
  }
  if (holdout) params = best_params;

  LinearCvrModel model;
  model.dim = dim;
  model.bias = params.back();
  params.pop_back();
  model.weights = std::move(params);
  model.l2 = l2;
  model.meta.seed = opt.seed;
  model.meta.iterations = result.iterations;
  model.meta.converged = result.converged;
  if (holdout) {
    std::vector<double> p = model.weights;
    p.push_back(model.bias);
    std::vector<double> g(p.size());
    model.meta.final_loss = objective(p, g);
  } else {
    model.meta.final_loss = result.loss;
  }
  return model;
}

LinearCvrModel TrainNaiveLogistic(std::span<const LabeledSample> data,
                                  double l2, const OptimizerConfig& opt,
                                  const WeightedDataset* validation) {
  if (data.empty()) throw TrainingError("no training samples");
  return TrainWeightedLogistic(
      WeightedDataset::Uniform({data.begin(), data.end()}), l2, opt,
      validation);
}

double DfmSampleNll(double cvr_logit, double log_rate, int y, double d_days,
                    double e_days, double* d_cvr_logit, double* d_log_rate) {
  const double rate = std::exp(log_rate);
  if (y == 1) {
    if (d_cvr_logit) *d_cvr_logit = Sigmoid(cvr_logit) - 1.0;
    if (d_log_rate) *d_log_rate = rate * d_days - 1.0;
    return Softplus(-cvr_logit) - log_rate + rate * d_days;
  }
  // -log(1 - p + p exp(-s)) = softplus(z) - softplus(z - s), s = rate * e.
  const double s = rate * e_days;
  const double shifted = cvr_logit - s;
  const double r = Sigmoid(shifted);
  if (d_cvr_logit) *d_cvr_logit = Sigmoid(cvr_logit) - r;
  if (d_log_rate) *d_log_rate = r == 0.0 ? 0.0 : r * s;
  return Softplus(cvr_logit) - Softplus(shifted);
}

double DfmObjective(std::span<const LabeledSample> data, std::uint32_t dim,
                    double l2, LossNormalization normalization,
                    std::span<const double> params, std::span<double> grad) {
  std::fill(grad.begin(), grad.end(), 0.0);
  const std::span<const double> cvr = params.subspan(0, dim);
  const double cvr_bias = params[dim];
  const std::span<const double> delay = params.subspan(dim + 1, dim);
  const double delay_bias = params[2 * dim + 1];
  const double scale = Scale(normalization, std::max<std::size_t>(1, data.size()));

  double loss = 0.0;
  for (const LabeledSample& sample : data) {
    const double zc = cvr_bias + SparseDot(cvr, sample.x);
    const double zd = delay_bias + SparseDot(delay, sample.x);
    double gc = 0.0;
    double gd = 0.0;
    const double d_days =
        sample.d ? static_cast<double>(*sample.d) / kSecondsPerDay : 0.0;
    loss += DfmSampleNll(zc, zd, sample.y, d_days,
                         static_cast<double>(sample.e) / kSecondsPerDay, &gc, &gd);
    gc *= scale;
    gd *= scale;
    for (const std::uint32_t i : sample.x.indices) {
      grad[i] += gc;
      grad[dim + 1 + i] += gd;
    }
    grad[dim] += gc;
    grad[2 * dim + 1] += gd;
  }
  loss *= scale;

  double norm = 0.0;
  for (std::uint32_t i = 0; i < dim; ++i) {
    norm += cvr[i] * cvr[i] + delay[i] * delay[i];
    grad[i] += l2 * cvr[i];
    grad[dim + 1 + i] += l2 * delay[i];
  }
  const double value = loss + 0.5 * l2 * norm;
  return std::isfinite(value) ? value : std::numeric_limits<double>::infinity();
}

DfmModel TrainDfm(std::span<const LabeledSample> data, double l2,
                  const OptimizerConfig& opt) {
  if (data.empty()) throw TrainingError("no training samples");
  const std::uint32_t dim = data.front().x.dim;
  double positives = 0.0;
  double delay_sum = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const LabeledSample& sample = data[i];
    CheckDim(dim, sample.x);
    if (sample.y == 1) {
      if (!sample.d) {
        throw TrainingError("positive sample " + std::to_string(i) +
                            " has no delay");
      }
      positives += 1.0;
      delay_sum += static_cast<double>(*sample.d) / kSecondsPerDay;
    }
  }

  std::vector<double> params(2 * (static_cast<std::size_t>(dim) + 1), 0.0);
  params[dim] = Logit(positives / static_cast<double>(data.size()));
  if (positives > 0 && delay_sum > 0) {
    params[2 * dim + 1] = -std::log(delay_sum / positives);
  }

  auto objective = [&](std::span<const double> p, std::span<double> g) {
    return DfmObjective(data, dim, l2, opt.normalization, p, g);
  };
  {
    std::vector<double> g(params.size());
    if (!std::isfinite(objective(params, g))) {
      // Locate the offending sample for the error message.
      for (std::size_t i = 0; i < data.size(); ++i) {
        const LabeledSample& s = data[i];
        const double v = DfmSampleNll(
            params[dim], params[2 * dim + 1], s.y,
            s.d ? static_cast<double>(*s.d) / kSecondsPerDay : 0.0,
            static_cast<double>(s.e) / kSecondsPerDay);
        if (!std::isfinite(v)) {
          throw TrainingError("non-finite likelihood at sample " +
                              std::to_string(i));
        }
      }
      throw TrainingError("non-finite likelihood");
    }
  }

  MinimizeResult result;
  if (opt.method == OptimizerMethod::kMiniBatch) {
    auto batch = [&](std::span<const std::size_t> rows,
                     std::span<const double> p, std::span<double> g) {
      std::vector<LabeledSample> subset;
      subset.reserve(rows.size());
      for (const std::size_t r : rows) subset.push_back(data[r]);
      return DfmObjective(subset, dim, l2, LossNormalization::kMean, p, g);
    };
    OptimizerConfig mean_opt = opt;
    mean_opt.normalization = LossNormalization::kMean;
    result = MinimizeMiniBatch(batch, objective, data.size(), params, mean_opt);
  } else {
    result = Minimize(objective, params, opt);
  }
  if (!std::isfinite(result.loss)) throw TrainingError("non-finite likelihood");

  DfmModel model;
  model.dim = dim;
  model.cvr_weights.assign(params.begin(), params.begin() + dim);
  model.cvr_bias = params[dim];
  model.delay_weights.assign(params.begin() + dim + 1, params.begin() + 2 * dim + 1);
  model.delay_bias = params[2 * dim + 1];
  model.l2 = l2;
  model.meta.seed = opt.seed;
  model.meta.iterations = result.iterations;
  model.meta.converged = result.converged;
  model.meta.final_loss = result.loss;
  return model;
}

double PredictCvr(const LinearCvrModel& model, const FeatureVector& x) {
  CheckDim(model.dim, x);
  return Sigmoid(model.bias + SparseDot(model.weights, x));
}

double PredictCvr(const DfmModel& model, const FeatureVector& x) {
  CheckDim(model.dim, x);
  return Sigmoid(model.cvr_bias + SparseDot(model.cvr_weights, x));
}

double PredictDelayRate(const DfmModel& model, const FeatureVector& x) {
  CheckDim(model.dim, x);
  return std::exp(model.delay_bias + SparseDot(model.delay_weights, x)) /
         kSecondsPerDay;
}

void SaveModel(std::ostream& out, const LinearCvrModel& model) {
  out << "fsiw-model 1\n";
  out << "kind linear\n";
  out << "dim " << model.dim << '\n';
  WriteMeta(out, model.meta, model.l2);
  WriteScalar(out, "bias", model.bias);
  WriteSparse(out, "weights", model.weights);
}

void SaveModel(std::ostream& out, const DfmModel& model) {
  out << "fsiw-model 1\n";
  out << "kind dfm\n";
  out << "dim " << model.dim << '\n';
  WriteMeta(out, model.meta, model.l2);
  WriteScalar(out, "cvr_bias", model.cvr_bias);
  WriteScalar(out, "delay_bias", model.delay_bias);
  WriteSparse(out, "cvr_weights", model.cvr_weights);
  WriteSparse(out, "delay_weights", model.delay_weights);
}

AnyCvrModel LoadModel(std::istream& in) {
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "fsiw-model" || version != 1) {
    throw Error("not an fsiw model blob (expected 'fsiw-model 1')");
  }
  std::map<std::string, double> scalars;
  std::map<std::string, std::vector<std::pair<std::size_t, double>>> vectors;
  std::string kind;
  std::string key;
  std::uint64_t seed = 0;
  while (in >> key) {
    if (key == "kind") {
      in >> kind;
    } else if (key == "seed") {
      if (!(in >> seed)) throw Error("malformed model field 'seed'");
    } else if (key == "weights" || key == "cvr_weights" ||
               key == "delay_weights") {
      std::size_t nnz = 0;
      in >> nnz;
      auto& entries = vectors[key];
      for (std::size_t k = 0; k < nnz; ++k) {
        std::size_t index = 0;
        double value = 0.0;
        if (!(in >> index >> value)) throw Error("truncated model blob");
        entries.emplace_back(index, value);
      }
    } else {
      double value = 0.0;
      if (!(in >> value)) throw Error("malformed model field '" + key + "'");
      scalars[key] = value;
    }
  }
  auto dense = [&](const std::string& name, std::uint32_t dim) {
    std::vector<double> out(dim, 0.0);
    for (const auto& [index, value] : vectors[name]) {
      if (index >= dim) throw Error("model coefficient index out of range");
      out[index] = value;
    }
    return out;
  };
  TrainingMeta meta;
  meta.seed = seed;
  meta.iterations = static_cast<int>(scalars["iterations"]);
  meta.converged = scalars["converged"] != 0.0;
  meta.final_loss = scalars["final_loss"];
  const auto dim = static_cast<std::uint32_t>(scalars["dim"]);
  if (kind == "linear") {
    LinearCvrModel model;
    model.dim = dim;
    model.weights = dense("weights", dim);
    model.bias = scalars["bias"];
    model.l2 = scalars["l2"];
    model.meta = meta;
    return model;
  }
  if (kind == "dfm") {
    DfmModel model;
    model.dim = dim;
    model.cvr_weights = dense("cvr_weights", dim);
    model.delay_weights = dense("delay_weights", dim);
    model.cvr_bias = scalars["cvr_bias"];
    model.delay_bias = scalars["delay_bias"];
    model.l2 = scalars["l2"];
    model.meta = meta;
    return model;
  }
  throw Error("unknown model kind '" + kind + "'");
}

}  // namespace fsiw
