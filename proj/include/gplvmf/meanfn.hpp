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

namespace gplvmf {

/// Variational (mean, variance) pairs for a table of entities; one row per entity.
struct EntityLatents {
  Eigen::MatrixXd mean;
  Eigen::MatrixXd variance;

  Eigen::Index count() const noexcept { return mean.rows(); }
  Eigen::Index dim() const noexcept { return mean.cols(); }
  static EntityLatents zeros(Eigen::Index count, Eigen::Index dim) {
    return {Eigen::MatrixXd::Zero(count, dim), Eigen::MatrixXd::Zero(count, dim)};
  }
};

/// Latents of the bias mean function
///   m_n(row) = b_n + sum_q item_q + sum_d sum_q context_{d,q} + sum_{real d} w_d * value_d.
/// Real-valued contexts have no latents (empty entries in `context`); they
/// enter through the point weight `real_weight[d]` times the standardized value.
struct BiasLatents {
  Eigen::VectorXd user_bias;           // b_n per user
  EntityLatents item;                  // L x Q^b
  std::vector<EntityLatents> context;  // per context: L_d x Q^b, or empty
  Eigen::VectorXd real_weight;         // per context, zero for categorical ones

  /// Zero-initialized latents shaped for the schema.
  static BiasLatents zeros(const ContextSchema& schema, int bias_dim);
};

struct PhiStats {
  Eigen::VectorXd phi1;  // <m_t>
  double phi0 = 0.0;     // sum_t <m_t^2>
};

Eigen::VectorXd mean_vector(const BiasLatents& bias, const ContextSchema& schema,
                            const UserBlock& block);

PhiStats phi_statistics(const BiasLatents& bias, const ContextSchema& schema,
                        const UserBlock& block);

struct PhiSensitivity {
  Eigen::VectorXd phi1;
  double phi0 = 0.0;
};

/// Accumulates weight * dF/d(bias parameter) into `grad` (same shape as `bias`).
/// Variance slots receive d/d(variance), or d/d(log variance) when `log_variance`.
void phi_backward(const BiasLatents& bias, const ContextSchema& schema, const UserBlock& block,
                  const PhiSensitivity& sens, BiasLatents& grad, double weight = 1.0,
                  bool log_variance = false);

}  // namespace gplvmf
