/*
 * Copyright 2026 The gplvmf Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace gplvmf {

/// Scaled conjugate gradients (Moller, 1993) for unconstrained minimization.
struct ScgOptions {
  int max_iterations = 100;
  double gradient_tolerance = 1e-6;  // stop when ||g|| falls below
  double x_tolerance = 1e-10;        // together with f_tolerance, on accepted steps
  double f_tolerance = 1e-10;
  double sigma0 = 1e-4;   // finite-difference scale for the curvature probe
  double lambda0 = 1e-9;  // initial trust scale
  double lambda_max = 1e100;
};

enum class ScgStatus { Converged, MaxIterations, Stopped, LineScaleCollapse };

std::string to_string(ScgStatus status);

/// Returns f(x) and writes the gradient. May throw NumericalError on points it
/// cannot evaluate; such trial points are treated as rejected steps.
using ScgObjective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

/// Called after every iteration with the current (accepted) point. Returning
/// false stops the run.
using ScgCallback =
    std::function<bool(int iteration, const Eigen::VectorXd& x, double f, bool accepted)>;

struct ScgResult {
  Eigen::VectorXd x;
  double f = 0.0;
  int iterations = 0;
  int restarts = 0;
  ScgStatus status = ScgStatus::MaxIterations;
  std::vector<double> history;  // f at the current point after each iteration
  std::vector<bool> accepted;
};

ScgResult scg_minimize(const ScgObjective& objective, Eigen::VectorXd x0, const ScgOptions& options,
                       const ScgCallback& callback = {});

}  // namespace gplvmf
