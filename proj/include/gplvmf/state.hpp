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
#include "gplvmf/kernel.hpp"
#include "gplvmf/meanfn.hpp"

namespace gplvmf {

/// Latent dimensionalities and inducing-point count.
struct ModelDims {
  int item_dim = 2;     // Q_v
  int context_dim = 1;  // default Q_d for categorical contexts
  int bias_dim = 1;     // Q^b for items and categorical contexts
  int inducing = 10;    // M
  bool use_mean = true;
};

/// Column layout of the kernel input: item coordinates first, then each
/// context in schema order. Real-valued contexts own one fixed coordinate.
struct LatentLayout {
  int item_dim = 0;
  std::vector<int> context_dim;
  std::vector<int> context_offset;
  int dim = 0;  // Q
  int bias_dim = 0;
  bool use_mean = true;
  std::vector<bool> fixed;  // per kernel column

  static LatentLayout make(const ContextSchema& schema, const ModelDims& dims);
};

/// All trainable quantities, stored in constrained form. The same shape is
/// reused as a gradient container, in which case positive-constrained slots
/// (variances, length scales, signal variances, precisions) hold derivatives
/// with respect to their logarithms.
struct VariationalState {
  ContextSchema schema;
  LatentLayout layout;
  EntityLatents item;                  // L x Q_v
  std::vector<EntityLatents> context;  // categorical: L_d x Q_d; real-valued: empty
  BiasLatents bias;
  Eigen::MatrixXd inducing;               // M x Q
  Eigen::VectorXd inverse_length_scales;  // Q
  Eigen::VectorXd signal_variance;        // per user
  Eigen::VectorXd noise_precision;        // per user

  /// Shaped for `schema`/`dims` with every entry zero.
  static VariationalState zeros(const ContextSchema& schema, const ModelDims& dims);
  /// Zero state with this state's shapes.
  VariationalState zeros_like() const;

  Eigen::Index inducing_count() const noexcept { return inducing.rows(); }
  ArdKernel user_kernel(int user) const {
    return {signal_variance(user), inverse_length_scales};
  }
  Eigen::Index parameter_count() const;
};

/// Flat unconstrained vector: positive quantities are mapped through log.
Eigen::VectorXd pack(const VariationalState& state);
void unpack(const Eigen::VectorXd& x, VariationalState& state);
/// Concatenation in `pack` order with no transform (for gradient containers).
Eigen::VectorXd pack_raw(const VariationalState& state);
void unpack_raw(const Eigen::VectorXd& x, VariationalState& state);

/// Names the parameter block that owns a flat index (for diagnostics).
std::string parameter_name(const VariationalState& state, Eigen::Index index);

/// Kernel-space inputs for a user's rows, with real-valued contexts fixed to
/// their standardized values.
LatentPoints gather_points(const VariationalState& state, const UserBlock& block);

/// Adds per-row gradients (constrained mean/variance) to entity latents in
/// `grad`, converting variance derivatives to log-variance derivatives.
void scatter_point_gradient(const VariationalState& state, const UserBlock& block,
                            const Eigen::MatrixXd& d_mean, const Eigen::MatrixXd& d_variance,
                            VariationalState& grad, double weight = 1.0);

}  // namespace gplvmf
