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

#include "gplvmf/scg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gplvmf/errors.hpp"

namespace gplvmf {

std::string to_string(ScgStatus status) {
  switch (status) {
    case ScgStatus::Converged: return "converged";
    case ScgStatus::MaxIterations: return "max-iterations";
    case ScgStatus::Stopped: return "stopped";
    case ScgStatus::LineScaleCollapse: return "line-scale-collapse";
  }
  return "unknown";
}

ScgResult scg_minimize(const ScgObjective& objective, Eigen::VectorXd x0, const ScgOptions& opt,
                       const ScgCallback& callback) {
  const auto n = x0.size();
  constexpr double inf = std::numeric_limits<double>::infinity();
  auto safe_eval = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    try {
      const double f = objective(x, g);
      return std::isfinite(f) && g.allFinite() ? f : inf;
    } catch (const NumericalError&) {
      return inf;
    }
  };

  ScgResult res;
  Eigen::VectorXd x = std::move(x0);
  Eigen::VectorXd g(n);
  double f = objective(x, g);
  if (!std::isfinite(f) || !g.allFinite()) throw NumericalError("SCG: objective not finite at the start point");

  Eigen::VectorXd d = -g;
  Eigen::VectorXd g_plus(n), g_new(n), x_new(n);
  double lambda = opt.lambda0;
  bool success = true;
  int n_success = 0;
  double mu = 0.0, kappa = 0.0, theta = 0.0;
  int collapses = 0;

  for (int it = 1; it <= opt.max_iterations; ++it) {
    res.iterations = it;
    if (success) {
      mu = d.dot(g);
      if (mu >= 0.0) {
        d = -g;
        mu = d.dot(g);
      }
      kappa = d.squaredNorm();
      if (kappa < std::numeric_limits<double>::epsilon() || g.norm() < opt.gradient_tolerance) {
        res.status = ScgStatus::Converged;
        res.history.push_back(f);
        res.accepted.push_back(false);
        break;
      }
      const double sigma = opt.sigma0 / std::sqrt(kappa);
      const double f_plus = safe_eval(x + sigma * d, g_plus);
      theta = std::isfinite(f_plus) ? d.dot(g_plus - g) / sigma : 0.0;
    }

    // scale the curvature until it is positive definite
    double delta = theta + lambda * kappa;
    if (delta <= 0.0) {
      delta = lambda * kappa;
      lambda -= theta / kappa;
    }
    const double step = -mu / delta;
    x_new = x + step * d;
    const double f_new = safe_eval(x_new, g_new);
    // a step too small to move x counts as a rejection
    const bool moved = (x_new.array() != x.array()).any();
    const double comparison = std::isfinite(f_new) && moved ? 2.0 * (f_new - f) / (step * mu) : -1.0;

    const double f_old = f;
    if (comparison >= 0.0) {
      success = true;
      ++n_success;
      x.swap(x_new);
      f = f_new;
    } else {
      success = false;
    }
    res.history.push_back(f);
    res.accepted.push_back(success);
    if (callback && !callback(it, x, f, success)) {
      res.status = ScgStatus::Stopped;
      if (success) g = g_new;
      break;
    }

    if (success && (step * d).cwiseAbs().maxCoeff() < opt.x_tolerance &&
        std::abs(f - f_old) < opt.f_tolerance) {
      res.status = ScgStatus::Converged;
      g = g_new;
      break;
    }

    if (comparison < 0.25) lambda = std::min(4.0 * lambda, opt.lambda_max);
    if (comparison > 0.75) lambda = std::max(0.5 * lambda, 1e-300);

    if (lambda >= opt.lambda_max) {
      // restart once from steepest descent with a fresh scale; give up on a second collapse
      if (++collapses > 1) {
        res.status = ScgStatus::LineScaleCollapse;
        break;
      }
      ++res.restarts;
      lambda = opt.lambda0;
      d = -g;
      n_success = 0;
      success = true;
      continue;
    }

    if (success) {
      if (n_success == n) {
        d = -g_new;
        n_success = 0;
      } else {
        const double gamma = (g - g_new).dot(g_new) / mu;
        d = gamma * d - g_new;
      }
      g = g_new;
    }
  }
  res.x = std::move(x);
  res.f = f;
  return res;
}

}  // namespace gplvmf
