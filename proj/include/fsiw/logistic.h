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

// Weighted, L2-regularized logistic regression over binary hashed features
// plus a few dense columns.
//
// Parameter layout: [sparse_dim hashed weights][dense_dim dense weights][bias].
// The bias is not regularized.

#ifndef FSIW_LOGISTIC_H_
#define FSIW_LOGISTIC_H_

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fsiw/core_data.h"
#include "fsiw/optimizer.h"

namespace fsiw {

inline double Sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double ez = std::exp(z);
  return ez / (1.0 + ez);
}

// log(1 + exp(z)) without overflow.
inline double Softplus(double z) {
  return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

// Row-compressed design matrix with labels and sample weights.
class LogisticProblem {
 public:
  LogisticProblem(std::uint32_t sparse_dim, std::size_t dense_dim)
      : sparse_dim_(sparse_dim), dense_dim_(dense_dim) {}

  // `dense` must have dense_dim entries. `label` may be fractional.
  void Add(const FeatureVector& x, std::span<const double> dense, double label,
           double weight);

  std::size_t size() const { return labels_.size(); }
  std::size_t n_params() const { return sparse_dim_ + dense_dim_ + 1; }
  std::uint32_t sparse_dim() const { return sparse_dim_; }
  std::size_t dense_dim() const { return dense_dim_; }
  double label(std::size_t i) const { return labels_[i]; }
  double weight(std::size_t i) const { return weights_[i]; }

  double Score(std::size_t i, std::span<const double> params) const;

  // (1/n or 1) * sum_i w_i * logloss_i + (l2 / 2) * ||params without bias||^2
  // over `rows` (all rows when empty). With kMean, n is the row count.
  // Throws TrainingError naming the first sample whose term is not finite.
  double Objective(std::span<const double> params, std::span<double> grad,
                   double l2, LossNormalization normalization,
                   std::span<const std::size_t> rows = {}) const;

  // Weighted mean log loss, no regularization.
  double MeanLoss(std::span<const double> params) const;

 private:
  std::uint32_t sparse_dim_;
  std::size_t dense_dim_;
  std::vector<std::size_t> offsets_{0};
  std::vector<std::uint32_t> indices_;
  std::vector<double> dense_;
  std::vector<double> labels_;
  std::vector<double> weights_;
};

}  // namespace fsiw

#endif  // FSIW_LOGISTIC_H_
