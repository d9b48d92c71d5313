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

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

namespace gplvmf {

/// ARD squared-exponential kernel
///   k(x, x') = signal_variance * exp(-1/2 sum_q alpha_q (x_q - x'_q)^2).
struct ArdKernel {
  double signal_variance = 1.0;
  Eigen::VectorXd inverse_length_scales;

  Eigen::Index dim() const noexcept { return inverse_length_scales.size(); }
};

/// Diagonal Gaussian inputs q(x_t) = N(mean_t, diag(variance_t)). Columns
/// flagged in `fixed` are point masses and must carry zero variance.
struct LatentPoints {
  Eigen::MatrixXd mean;      // N x Q
  Eigen::MatrixXd variance;  // N x Q
  std::vector<bool> fixed;   // per column; empty means none fixed

  Eigen::Index size() const noexcept { return mean.rows(); }
  Eigen::Index dim() const noexcept { return mean.cols(); }
  bool is_fixed(Eigen::Index q) const {
    return !fixed.empty() && fixed[static_cast<std::size_t>(q)];
  }
};

/// Expected kernel statistics under q(X):
///   psi0 = sum_t <k(x_t, x_t)>, psi1 = <K_NM>, psi2 = sum_t <k_t k_t^T>.
struct PsiStats {
  double psi0 = 0.0;
  Eigen::MatrixXd psi1;  // N x M
  Eigen::MatrixXd psi2;  // M x M
};

Eigen::MatrixXd kernel_matrix(const ArdKernel& kernel, const Eigen::MatrixXd& a,
                              const Eigen::MatrixXd& b);

PsiStats psi_statistics(const ArdKernel& kernel, const LatentPoints& points,
                        const Eigen::MatrixXd& inducing);

/// dF/d(statistic) for some scalar objective F.
struct PsiSensitivity {
  double psi0 = 0.0;
  Eigen::MatrixXd psi1;
  Eigen::MatrixXd psi2;
};

/// Gradient of F with respect to the inputs of psi_statistics. Variances are
/// constrained-space; kernel hyperparameters are in log space.
struct PsiGradient {
  Eigen::MatrixXd mean;
  Eigen::MatrixXd variance;
  Eigen::MatrixXd inducing;
  Eigen::VectorXd log_inverse_length_scales;
  double log_signal_variance = 0.0;
};

/// Chain rule through the closed forms; fixed columns get exactly zero.
PsiGradient psi_backward(const ArdKernel& kernel, const LatentPoints& points,
                         const Eigen::MatrixXd& inducing, const PsiSensitivity& sens);

/// Gradient of F through K = kernel_matrix(Z, Z) + jitter * signal_variance * I.
struct KernelGradient {
  Eigen::MatrixXd inducing;
  Eigen::VectorXd log_inverse_length_scales;
  double log_signal_variance = 0.0;
};

KernelGradient kernel_backward(const ArdKernel& kernel, const Eigen::MatrixXd& inducing,
                               const Eigen::MatrixXd& sens, double jitter);

/// Monte-Carlo estimate of the psi statistics with per-entry standard errors.
struct McPsiEstimate {
  PsiStats mean;
  PsiStats standard_error;
  long samples = 0;
};

McPsiEstimate mc_psi_oracle(const ArdKernel& kernel, const LatentPoints& points,
                            const Eigen::MatrixXd& inducing, long samples, std::uint64_t seed);

}  // namespace gplvmf
