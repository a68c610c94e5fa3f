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

#include "fsiw/logistic.h"

#include <algorithm>
#include <string>

#include "fsiw/errors.h"

namespace fsiw {

void LogisticProblem::Add(const FeatureVector& x, std::span<const double> dense,
                          double label, double weight) {
  if (x.dim != sparse_dim_) {
    throw Error("feature dimension " + std::to_string(x.dim) +
                " does not match model dimension " +
                std::to_string(sparse_dim_));
  }
  indices_.insert(indices_.end(), x.indices.begin(), x.indices.end());
  offsets_.push_back(indices_.size());
  dense_.insert(dense_.end(), dense.begin(), dense.end());
  labels_.push_back(label);
  weights_.push_back(weight);
}

double LogisticProblem::Score(std::size_t i,
                              std::span<const double> params) const {
  double z = params[sparse_dim_ + dense_dim_];
  for (std::size_t k = offsets_[i]; k < offsets_[i + 1]; ++k) {
    z += params[indices_[k]];
  }
  const double* row = dense_.data() + i * dense_dim_;
  for (std::size_t j = 0; j < dense_dim_; ++j) {
    z += params[sparse_dim_ + j] * row[j];
  }
  return z;
}

double LogisticProblem::Objective(std::span<const double> params,
                                  std::span<double> grad, double l2,
                                  LossNormalization normalization,
                                  std::span<const std::size_t> rows) const {
  std::fill(grad.begin(), grad.end(), 0.0);
  const std::size_t n_rows = rows.empty() ? size() : rows.size();
  double scale = 1.0;
  if (normalization == LossNormalization::kMean) {
    scale = n_rows == 0 ? 0.0 : 1.0 / static_cast<double>(n_rows);
  } else if (!rows.empty()) {
    scale = static_cast<double>(size()) / static_cast<double>(n_rows);
  }
  const std::size_t bias = sparse_dim_ + dense_dim_;

  double loss = 0.0;
  for (std::size_t r = 0; r < n_rows; ++r) {
    const std::size_t i = rows.empty() ? r : rows[r];
    const double z = Score(i, params);
    const double term = weights_[i] * (Softplus(z) - labels_[i] * z);
    if (!std::isfinite(term)) {
      throw TrainingError("non-finite loss at sample " + std::to_string(i));
    }
    loss += term;
    const double g = scale * weights_[i] * (Sigmoid(z) - labels_[i]);
    for (std::size_t k = offsets_[i]; k < offsets_[i + 1]; ++k) {
      grad[indices_[k]] += g;
    }
    const double* row = dense_.data() + i * dense_dim_;
    for (std::size_t j = 0; j < dense_dim_; ++j) grad[sparse_dim_ + j] += g * row[j];
    grad[bias] += g;
  }
  loss *= scale;

  double norm = 0.0;
  for (std::size_t j = 0; j < bias; ++j) {
    norm += params[j] * params[j];
    grad[j] += l2 * params[j];
  }
  return loss + 0.5 * l2 * norm;
}

double LogisticProblem::MeanLoss(std::span<const double> params) const {
  if (size() == 0) return 0.0;
  double loss = 0.0;
  for (std::size_t i = 0; i < size(); ++i) {
    const double z = Score(i, params);
    loss += weights_[i] * (Softplus(z) - labels_[i] * z);
  }
  return loss / static_cast<double>(size());
}

}  // namespace fsiw
