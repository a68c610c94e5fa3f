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

#ifndef FSIW_OPTIMIZER_H_
#define FSIW_OPTIMIZER_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace fsiw {

enum class OptimizerMethod {
  // Steepest descent with backtracking line search.
  kGradientDescent,
  // Limited-memory BFGS directions with the same backtracking line search.
  kLbfgs,
  // Shuffled mini-batch gradient steps with a fixed shuffling seed.
  kMiniBatch,
};

// How the per-sample losses are aggregated.
enum class LossNormalization { kMean, kSum };

struct OptimizerConfig {
  OptimizerMethod method = OptimizerMethod::kLbfgs;
  int max_iterations = 1000;
  // Stop when |f_prev - f| <= tolerance * max(|f|, 1) after a full pass.
  double tolerance = 1e-10;
  int lbfgs_memory = 10;
  // Mini-batch only. An iteration is one epoch.
  std::size_t batch_size = 1024;
  double learning_rate = 0.1;
  std::uint64_t seed = 0;
  LossNormalization normalization = LossNormalization::kMean;
  // Evaluations without validation improvement before early stopping.
  int patience = 5;
};

OptimizerMethod ParseOptimizerMethod(const std::string& name);
std::string ToString(OptimizerMethod method);
LossNormalization ParseNormalization(const std::string& name);
std::string ToString(LossNormalization normalization);

// Returns the objective at `params` and writes its gradient to `grad`.
using ObjectiveFn =
    std::function<double(std::span<const double> params, std::span<double> grad)>;

// Objective restricted to a batch of sample indices. The value must be
// normalized so that the expected batch gradient equals the full gradient.
using BatchObjectiveFn = std::function<double(
    std::span<const std::size_t> batch, std::span<const double> params,
    std::span<double> grad)>;

// Called after every accepted iteration. Returning true stops the run.
using IterationCallback =
    std::function<bool(int iteration, std::span<const double> params)>;

struct MinimizeResult {
  int iterations = 0;
  double loss = 0.0;
  bool converged = false;
  bool stopped_by_callback = false;
};

// Deterministic full-batch minimization (kGradientDescent or kLbfgs).
MinimizeResult Minimize(const ObjectiveFn& objective,
                        std::vector<double>& params,
                        const OptimizerConfig& config,
                        const IterationCallback& callback = {});

// Mini-batch minimization over `n` samples. `full` is evaluated once per
// epoch for the convergence test.
MinimizeResult MinimizeMiniBatch(const BatchObjectiveFn& batch_objective,
                                 const ObjectiveFn& full, std::size_t n,
                                 std::vector<double>& params,
                                 const OptimizerConfig& config,
                                 const IterationCallback& callback = {});

}  // namespace fsiw

#endif  // FSIW_OPTIMIZER_H_
