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

#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "fsiw/errors.h"

namespace fsiw {
namespace {

// f(x) = 0.5 sum_i a_i (x_i - c_i)^2 with minimum at c.
double Quadratic(std::span<const double> x, std::span<double> g) {
  double f = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double a = 1.0 + static_cast<double>(i);
    const double r = x[i] - 0.5 * static_cast<double>(i);
    f += 0.5 * a * r * r;
    g[i] = a * r;
  }
  return f;
}

double Rosenbrock(std::span<const double> x, std::span<double> g) {
  const double a = 1.0 - x[0];
  const double b = x[1] - x[0] * x[0];
  g[0] = -2.0 * a - 400.0 * x[0] * b;
  g[1] = 200.0 * b;
  return a * a + 100.0 * b * b;
}

OptimizerConfig Config(OptimizerMethod method) {
  OptimizerConfig config;
  config.method = method;
  config.max_iterations = 20000;
  config.tolerance = 1e-16;
  return config;
}

TEST(MinimizeTest, QuadraticBothMethods) {
  for (const auto method : {OptimizerMethod::kGradientDescent, OptimizerMethod::kLbfgs}) {
    std::vector<double> x(6, 3.0);
    const MinimizeResult result = Minimize(Quadratic, x, Config(method));
    EXPECT_TRUE(result.converged) << ToString(method);
    for (std::size_t i = 0; i < x.size(); ++i) {
      EXPECT_NEAR(x[i], 0.5 * static_cast<double>(i), 1e-6) << ToString(method);
    }
    EXPECT_LT(result.loss, 1e-10);
  }
}

TEST(MinimizeTest, LbfgsRosenbrock) {
  std::vector<double> x = {-1.2, 1.0};
  const MinimizeResult result = Minimize(Rosenbrock, x, Config(OptimizerMethod::kLbfgs));
  EXPECT_NEAR(x[0], 1.0, 1e-5);
  EXPECT_NEAR(x[1], 1.0, 1e-5);
  EXPECT_LT(result.iterations, 200);
}

TEST(MinimizeTest, LossNeverIncreases) {
  std::vector<double> x = {-1.2, 1.0};
  std::vector<double> g(2);
  double previous = Rosenbrock(x, g);
  OptimizerConfig config = Config(OptimizerMethod::kGradientDescent);
  config.max_iterations = 500;
  Minimize(Rosenbrock, x, config, [&](int, std::span<const double> p) {
    std::vector<double> grad(2);
    const double f = Rosenbrock(p, grad);
    EXPECT_LE(f, previous);
    previous = f;
    return false;
  });
}

TEST(MinimizeTest, CallbackStops) {
  std::vector<double> x(4, 10.0);
  const MinimizeResult result =
      Minimize(Quadratic, x, Config(OptimizerMethod::kLbfgs),
               [](int iteration, std::span<const double>) { return iteration == 2; });
  EXPECT_TRUE(result.stopped_by_callback);
  EXPECT_EQ(result.iterations, 2);
}

TEST(MinimizeTest, RejectsNonFiniteTrials) {
  // log barrier at x < 0: trial points past the barrier return +inf.
  auto barrier = [](std::span<const double> x, std::span<double> g) {
    if (x[0] <= 0) return std::numeric_limits<double>::infinity();
    g[0] = 1.0 - 1.0 / x[0];
    return x[0] - std::log(x[0]);
  };
  std::vector<double> x = {20.0};
  Minimize(barrier, x, Config(OptimizerMethod::kLbfgs));
  EXPECT_NEAR(x[0], 1.0, 1e-6);
}

TEST(MinimizeTest, MiniBatchIsRejectedByFullBatchEntryPoint) {
  std::vector<double> x(2, 0.0);
  EXPECT_THROW(Minimize(Quadratic, x, Config(OptimizerMethod::kMiniBatch)), ConfigError);
}

TEST(MinimizeMiniBatchTest, LeastSquares) {
  // Mean of 0.5 (x - t_i)^2 over targets t_i; the minimizer is their mean.
  std::vector<double> targets;
  for (int i = 0; i < 1000; ++i) targets.push_back(std::sin(i) * 3.0 + 2.0);
  double mean = 0.0;
  for (double t : targets) mean += t / 1000.0;
  auto batch = [&](std::span<const std::size_t> rows, std::span<const double> x,
                   std::span<double> g) {
    double f = 0.0;
    g[0] = 0.0;
    for (const std::size_t r : rows) {
      f += 0.5 * (x[0] - targets[r]) * (x[0] - targets[r]);
      g[0] += x[0] - targets[r];
    }
    g[0] /= static_cast<double>(rows.size());
    return f / static_cast<double>(rows.size());
  };
  std::vector<std::size_t> all(targets.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  auto full = [&](std::span<const double> x, std::span<double> g) { return batch(all, x, g); };

  OptimizerConfig config = Config(OptimizerMethod::kMiniBatch);
  config.batch_size = 32;
  config.learning_rate = 0.1;
  config.max_iterations = 200;
  config.tolerance = 1e-12;
  config.seed = 5;
  std::vector<double> x = {-4.0};
  MinimizeMiniBatch(batch, full, targets.size(), x, config);
  EXPECT_NEAR(x[0], mean, 0.05);

  std::vector<double> again = {-4.0};
  MinimizeMiniBatch(batch, full, targets.size(), again, config);
  EXPECT_EQ(x[0], again[0]);
}

TEST(OptimizerNamesTest, RoundTrip) {
  for (const auto m : {OptimizerMethod::kGradientDescent, OptimizerMethod::kLbfgs,
                       OptimizerMethod::kMiniBatch}) {
    EXPECT_EQ(ParseOptimizerMethod(ToString(m)), m);
  }
  EXPECT_EQ(ParseOptimizerMethod("gradient_descent"), OptimizerMethod::kGradientDescent);
  EXPECT_EQ(ParseOptimizerMethod("sgd"), OptimizerMethod::kMiniBatch);
  EXPECT_THROW(ParseOptimizerMethod("adam"), ConfigError);
  EXPECT_EQ(ParseNormalization("sum"), LossNormalization::kSum);
  EXPECT_EQ(ToString(LossNormalization::kMean), "mean");
  EXPECT_THROW(ParseNormalization("median"), ConfigError);
}

}  // namespace
}  // namespace fsiw
