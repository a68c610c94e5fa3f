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

#include "fsiw/optimizer.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

#include "fsiw/errors.h"
#include "fsiw/random.h"

namespace fsiw {
namespace {

constexpr double kArmijo = 1e-4;
constexpr int kMaxBacktracks = 60;

double Dot(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

bool Converged(double previous, double current, double tolerance) {
  return std::abs(previous - current) <=
         tolerance * std::max(std::abs(current), 1.0);
}

struct Correction {
  std::vector<double> s;
  std::vector<double> y;
  double rho;
};

// Two-loop recursion. Writes -H * grad into direction.
void LbfgsDirection(const std::deque<Correction>& history,
                    std::span<const double> grad, std::vector<double>& direction) {
  direction.assign(grad.begin(), grad.end());
  std::vector<double> alpha(history.size());
  for (std::size_t k = history.size(); k-- > 0;) {
    const Correction& c = history[k];
    alpha[k] = c.rho * Dot(c.s, direction);
    for (std::size_t i = 0; i < direction.size(); ++i) {
      direction[i] -= alpha[k] * c.y[i];
    }
  }
  if (!history.empty()) {
    const Correction& last = history.back();
    const double gamma = Dot(last.s, last.y) / Dot(last.y, last.y);
    for (double& v : direction) v *= gamma;
  }
  for (std::size_t k = 0; k < history.size(); ++k) {
    const Correction& c = history[k];
    const double beta = c.rho * Dot(c.y, direction);
    for (std::size_t i = 0; i < direction.size(); ++i) {
      direction[i] += c.s[i] * (alpha[k] - beta);
    }
  }
  for (double& v : direction) v = -v;
}

}  // namespace

OptimizerMethod ParseOptimizerMethod(const std::string& name) {
  if (name == "gd" || name == "gradient_descent") {
    return OptimizerMethod::kGradientDescent;
  }
  if (name == "lbfgs") return OptimizerMethod::kLbfgs;
  if (name == "minibatch" || name == "sgd") return OptimizerMethod::kMiniBatch;
  throw ConfigError("unknown optimizer '" + name + "'");
}

std::string ToString(OptimizerMethod method) {
  switch (method) {
    case OptimizerMethod::kGradientDescent:
      return "gd";
    case OptimizerMethod::kLbfgs:
      return "lbfgs";
    case OptimizerMethod::kMiniBatch:
      return "minibatch";
  }
  return "?";
}

LossNormalization ParseNormalization(const std::string& name) {
  if (name == "mean") return LossNormalization::kMean;
  if (name == "sum") return LossNormalization::kSum;
  throw ConfigError("unknown loss normalization '" + name + "'");
}

std::string ToString(LossNormalization normalization) {
  return normalization == LossNormalization::kMean ? "mean" : "sum";
}

MinimizeResult Minimize(const ObjectiveFn& objective,
                        std::vector<double>& params,
                        const OptimizerConfig& config,
                        const IterationCallback& callback) {
  if (config.method == OptimizerMethod::kMiniBatch) {
    throw ConfigError("Minimize() handles full-batch methods only");
  }
  const std::size_t n = params.size();
  std::vector<double> grad(n), next(n), next_grad(n), direction(n);
  std::deque<Correction> history;

  MinimizeResult result;
  double loss = objective(params, grad);
  double step = 1.0 / std::max(1.0, std::sqrt(Dot(grad, grad)));

  for (int iter = 1; iter <= config.max_iterations; ++iter) {
    if (config.method == OptimizerMethod::kLbfgs && !history.empty()) {
      LbfgsDirection(history, grad, direction);
    } else {
      for (std::size_t i = 0; i < n; ++i) direction[i] = -grad[i];
    }
    double slope = Dot(grad, direction);
    if (!(slope < 0)) {
      // Not a descent direction; fall back to steepest descent.
      history.clear();
      for (std::size_t i = 0; i < n; ++i) direction[i] = -grad[i];
      slope = Dot(grad, direction);
    }
    if (slope == 0) {
      result.converged = true;
      break;
    }

    double t = config.method == OptimizerMethod::kLbfgs && !history.empty()
                   ? 1.0
                   : step;
    double next_loss = 0.0;
    bool accepted = false;
    for (int k = 0; k < kMaxBacktracks; ++k) {
      for (std::size_t i = 0; i < n; ++i) next[i] = params[i] + t * direction[i];
      next_loss = objective(next, next_grad);
      if (std::isfinite(next_loss) && next_loss <= loss + kArmijo * t * slope) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      // No decrease is representable from here.
      result.converged = true;
      break;
    }

    if (config.method == OptimizerMethod::kLbfgs) {
      Correction c;
      c.s.resize(n);
      c.y.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        c.s[i] = next[i] - params[i];
        c.y[i] = next_grad[i] - grad[i];
      }
      const double sy = Dot(c.s, c.y);
      if (sy > 1e-12 * std::sqrt(Dot(c.s, c.s) * Dot(c.y, c.y))) {
        c.rho = 1.0 / sy;
        history.push_back(std::move(c));
        if (static_cast<int>(history.size()) > config.lbfgs_memory) {
          history.pop_front();
        }
      }
    } else {
      step = 2.0 * t;
    }

    const double previous = loss;
    params.swap(next);
    grad.swap(next_grad);
    loss = next_loss;
    result.iterations = iter;
    if (callback && callback(iter, params)) {
      result.stopped_by_callback = true;
      break;
    }
    if (Converged(previous, loss, config.tolerance)) {
      result.converged = true;
      break;
    }
  }
  result.loss = loss;
  return result;
}

MinimizeResult MinimizeMiniBatch(const BatchObjectiveFn& batch_objective,
                                 const ObjectiveFn& full, std::size_t n,
                                 std::vector<double>& params,
                                 const OptimizerConfig& config,
                                 const IterationCallback& callback) {
  if (config.batch_size == 0) throw ConfigError("batch_size must be positive");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> grad(params.size());
  RandomEngine rng(config.seed);

  MinimizeResult result;
  double loss = full(params, grad);
  for (int epoch = 1; epoch <= config.max_iterations; ++epoch) {
    // Fisher-Yates with the library engine keeps the order portable.
    for (std::size_t i = n; i > 1; --i) {
      std::swap(order[i - 1], order[rng.UniformInt(i)]);
    }
    const double rate = config.learning_rate / std::sqrt(static_cast<double>(epoch));
    for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
      const std::size_t end = std::min(n, begin + config.batch_size);
      batch_objective(std::span<const std::size_t>(order).subspan(begin, end - begin),
                      params, grad);
      for (std::size_t i = 0; i < params.size(); ++i) params[i] -= rate * grad[i];
    }
    const double previous = loss;
    loss = full(params, grad);
    result.iterations = epoch;
    if (!std::isfinite(loss)) throw TrainingError("mini-batch training diverged");
    if (callback && callback(epoch, params)) {
      result.stopped_by_callback = true;
      break;
    }
    if (Converged(previous, loss, config.tolerance)) {
      result.converged = true;
      break;
    }
  }
  result.loss = loss;
  return result;
}

}  // namespace fsiw
