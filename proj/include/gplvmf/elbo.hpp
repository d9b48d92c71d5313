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

#include <vector>

#include <Eigen/Dense>

#include "gplvmf/dataset.hpp"
#include "gplvmf/state.hpp"

namespace gplvmf {

struct ElboOptions {
  /// Diagonal jitter added to K_MM, relative to the user's signal variance.
  double jitter = 1e-6;
  /// Number of tenfold jitter increases tried before giving up.
  int jitter_escalations = 2;
  /// Worker threads for total_bound; 0 picks hardware concurrency.
  int threads = 0;
};

/// KL(q || N(0, I)) summed over free latent coordinates (kernel latents, and
/// bias latents when the mean function is enabled).
double kl_to_prior(const VariationalState& state);

/// Adds weight * d(-KL)/d(parameter) to `grad` (log-variance coordinates).
void kl_backward(const VariationalState& state, VariationalState& grad, double weight = 1.0);

/// Collapsed lower bound on log p(y_n) for one user block.
double user_bound(const UserBlock& block, const VariationalState& state,
                  const ElboOptions& options = {});

/// As above, additionally accumulating weight * dF_n/d(parameter) into `grad`.
double user_bound(const UserBlock& block, const VariationalState& state,
                  const ElboOptions& options, VariationalState& grad, double weight = 1.0);

struct BoundReport {
  double total = 0.0;
  Eigen::VectorXd per_user;  // one entry per block, in block order
  double kl = 0.0;
  Eigen::VectorXd gradient;  // d total / d pack(state); empty if not requested
};

BoundReport total_bound(const std::vector<UserBlock>& blocks, const VariationalState& state,
                        const ElboOptions& options = {}, bool with_gradient = true);

/// Optimal Gaussian q(u_n) over the inducing outputs.
struct InducingPosterior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

InducingPosterior optimal_qu(const UserBlock& block, const VariationalState& state,
                             const ElboOptions& options = {});

/// Quantities needed to predict for one user:
///   mean(x*)  = Psi1* . weights + phi1*
///   var_f(x*) = psi0* - tr(core Psi2*) + weights' Psi2* weights - (Psi1* . weights)^2
/// with weights = K_MM^-1 mu_u and core = K_MM^-1 - (K_MM + beta Psi2)^-1.
struct UserPosterior {
  Eigen::VectorXd weights;
  Eigen::MatrixXd core;
};

UserPosterior user_posterior(const UserBlock& block, const VariationalState& state,
                             const ElboOptions& options = {});

}  // namespace gplvmf
