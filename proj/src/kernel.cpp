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

#include "gplvmf/kernel.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "gplvmf/errors.hpp"

namespace gplvmf {

namespace {

void check_dims(const ArdKernel& kernel, Eigen::Index cols, const char* what) {
  if (cols != kernel.dim())
    throw std::invalid_argument(std::string(what) + ": dimension " + std::to_string(cols) +
                                " does not match kernel dimension " + std::to_string(kernel.dim()));
}

void check_points(const ArdKernel& kernel, const LatentPoints& points, const Eigen::MatrixXd& z) {
  check_dims(kernel, points.dim(), "latent points");
  check_dims(kernel, z.cols(), "inducing inputs");
  if (points.variance.rows() != points.mean.rows() || points.variance.cols() != points.mean.cols())
    throw std::invalid_argument("latent points: mean/variance shape mismatch");
  if ((points.variance.array() < 0.0).any())
    throw std::invalid_argument("latent points: negative variance");
}

}  // namespace

Eigen::MatrixXd kernel_matrix(const ArdKernel& kernel, const Eigen::MatrixXd& a,
                              const Eigen::MatrixXd& b) {
  check_dims(kernel, a.cols(), "kernel_matrix lhs");
  check_dims(kernel, b.cols(), "kernel_matrix rhs");
  const auto& alpha = kernel.inverse_length_scales;
  Eigen::MatrixXd k(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) {
      const double r2 = (alpha.array() * (a.row(i) - b.row(j)).transpose().array().square()).sum();
      k(i, j) = kernel.signal_variance * std::exp(-0.5 * r2);
    }
  }
  return k;
}

// Per dimension, with D1 = 1 + a s and D2 = 1 + 2 a s:
//   <k(x, z)>          = sigma2 prod_q D1^-1/2 exp(-a (mu - z)^2 / (2 D1))
//   <k(x, z) k(x, z')> = sigma2^2 prod_q D2^-1/2 exp(-a (z - z')^2 / 4 - a (mu - zbar)^2 / D2)
PsiStats psi_statistics(const ArdKernel& kernel, const LatentPoints& points,
                        const Eigen::MatrixXd& inducing) {
  check_points(kernel, points, inducing);
  const Eigen::Index n = points.size();
  const Eigen::Index m = inducing.rows();
  const Eigen::Index q_dim = kernel.dim();
  const auto& alpha = kernel.inverse_length_scales;
  const double s2 = kernel.signal_variance;

  PsiStats out;
  out.psi0 = static_cast<double>(n) * s2;
  out.psi1.resize(n, m);
  out.psi2 = Eigen::MatrixXd::Zero(m, m);
  const double log_s2 = std::log(s2);
  for (Eigen::Index t = 0; t < n; ++t) {
    for (Eigen::Index j = 0; j < m; ++j) {
      double acc = log_s2;
      for (Eigen::Index q = 0; q < q_dim; ++q) {
        const double d1 = 1.0 + alpha(q) * points.variance(t, q);
        const double diff = points.mean(t, q) - inducing(j, q);
        acc += -0.5 * std::log(d1) - 0.5 * alpha(q) * diff * diff / d1;
      }
      out.psi1(t, j) = std::exp(acc);
    }
    for (Eigen::Index j = 0; j < m; ++j) {
      for (Eigen::Index k = j; k < m; ++k) {
        double acc = 2.0 * log_s2;
        for (Eigen::Index q = 0; q < q_dim; ++q) {
          const double d2 = 1.0 + 2.0 * alpha(q) * points.variance(t, q);
          const double dz = inducing(j, q) - inducing(k, q);
          const double e = points.mean(t, q) - 0.5 * (inducing(j, q) + inducing(k, q));
          acc += -0.5 * std::log(d2) - 0.25 * alpha(q) * dz * dz - alpha(q) * e * e / d2;
        }
        const double v = std::exp(acc);
        out.psi2(j, k) += v;
        if (k != j) out.psi2(k, j) += v;
      }
    }
  }
  return out;
}

PsiGradient psi_backward(const ArdKernel& kernel, const LatentPoints& points,
                         const Eigen::MatrixXd& inducing, const PsiSensitivity& sens) {
  check_points(kernel, points, inducing);
  const Eigen::Index n = points.size();
  const Eigen::Index m = inducing.rows();
  const Eigen::Index q_dim = kernel.dim();
  const auto& alpha = kernel.inverse_length_scales;
  const double s2 = kernel.signal_variance;
  const double log_s2 = std::log(s2);

  PsiGradient g;
  g.mean = Eigen::MatrixXd::Zero(n, q_dim);
  g.variance = Eigen::MatrixXd::Zero(n, q_dim);
  g.inducing = Eigen::MatrixXd::Zero(m, q_dim);
  Eigen::VectorXd d_alpha = Eigen::VectorXd::Zero(q_dim);
  double d_log_s2 = sens.psi0 * static_cast<double>(n) * s2;

  for (Eigen::Index t = 0; t < n; ++t) {
    for (Eigen::Index j = 0; j < m; ++j) {
      double acc = log_s2;
      for (Eigen::Index q = 0; q < q_dim; ++q) {
        const double d1 = 1.0 + alpha(q) * points.variance(t, q);
        const double diff = points.mean(t, q) - inducing(j, q);
        acc += -0.5 * std::log(d1) - 0.5 * alpha(q) * diff * diff / d1;
      }
      const double w = sens.psi1(t, j) * std::exp(acc);
      if (w == 0.0) continue;
      d_log_s2 += w;
      for (Eigen::Index q = 0; q < q_dim; ++q) {
        const double a = alpha(q);
        const double s = points.variance(t, q);
        const double d1 = 1.0 + a * s;
        const double diff = points.mean(t, q) - inducing(j, q);
        const double r = a * diff / d1;
        g.mean(t, q) -= w * r;
        g.inducing(j, q) += w * r;
        g.variance(t, q) += w * (-0.5 * a / d1 + 0.5 * r * r);
        d_alpha(q) += w * (-0.5 * s / d1 - 0.5 * diff * diff / (d1 * d1));
      }
    }
    for (Eigen::Index j = 0; j < m; ++j) {
      for (Eigen::Index k = 0; k < m; ++k) {
        double acc = 2.0 * log_s2;
        for (Eigen::Index q = 0; q < q_dim; ++q) {
          const double d2 = 1.0 + 2.0 * alpha(q) * points.variance(t, q);
          const double dz = inducing(j, q) - inducing(k, q);
          const double e = points.mean(t, q) - 0.5 * (inducing(j, q) + inducing(k, q));
          acc += -0.5 * std::log(d2) - 0.25 * alpha(q) * dz * dz - alpha(q) * e * e / d2;
        }
        const double w = sens.psi2(j, k) * std::exp(acc);
        if (w == 0.0) continue;
        d_log_s2 += 2.0 * w;
        for (Eigen::Index q = 0; q < q_dim; ++q) {
          const double a = alpha(q);
          const double s = points.variance(t, q);
          const double d2 = 1.0 + 2.0 * a * s;
          const double dz = inducing(j, q) - inducing(k, q);
          const double e = points.mean(t, q) - 0.5 * (inducing(j, q) + inducing(k, q));
          const double r = a * e / d2;
          g.mean(t, q) -= 2.0 * w * r;
          g.variance(t, q) += w * (-a / d2 + 2.0 * r * r);
          d_alpha(q) += w * (-s / d2 - 0.25 * dz * dz - e * e / (d2 * d2));
          g.inducing(j, q) += w * (-0.5 * a * dz + r);
          g.inducing(k, q) += w * (0.5 * a * dz + r);
        }
      }
    }
  }
  for (Eigen::Index q = 0; q < q_dim; ++q) {
    if (points.is_fixed(q)) {
      g.mean.col(q).setZero();
      g.variance.col(q).setZero();
    }
  }
  g.log_inverse_length_scales = d_alpha.cwiseProduct(alpha);
  g.log_signal_variance = d_log_s2;
  return g;
}

KernelGradient kernel_backward(const ArdKernel& kernel, const Eigen::MatrixXd& inducing,
                               const Eigen::MatrixXd& sens, double jitter) {
  const Eigen::Index m = inducing.rows();
  const Eigen::Index q_dim = kernel.dim();
  const auto& alpha = kernel.inverse_length_scales;
  const Eigen::MatrixXd k = kernel_matrix(kernel, inducing, inducing);

  KernelGradient g;
  g.inducing = Eigen::MatrixXd::Zero(m, q_dim);
  Eigen::VectorXd d_alpha = Eigen::VectorXd::Zero(q_dim);
  g.log_signal_variance = (sens.array() * k.array()).sum() + jitter * kernel.signal_variance * sens.trace();
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index l = 0; l < m; ++l) {
      if (j == l) continue;
      const double w = sens(j, l) * k(j, l);
      for (Eigen::Index q = 0; q < q_dim; ++q) {
        const double dz = inducing(j, q) - inducing(l, q);
        // entry (j,l) depends on z_j and z_l; symmetric counterpart handled by (l,j)
        g.inducing(j, q) -= w * alpha(q) * dz;
        g.inducing(l, q) += w * alpha(q) * dz;
        d_alpha(q) -= 0.5 * w * dz * dz;
      }
    }
  }
  g.log_inverse_length_scales = d_alpha.cwiseProduct(alpha);
  return g;
}

McPsiEstimate mc_psi_oracle(const ArdKernel& kernel, const LatentPoints& points,
                            const Eigen::MatrixXd& inducing, long samples, std::uint64_t seed) {
  check_points(kernel, points, inducing);
  if (samples < 1) throw std::invalid_argument("mc_psi_oracle: samples must be >= 1");
  const Eigen::Index n = points.size();
  const Eigen::Index m = inducing.rows();
  const Eigen::Index q_dim = kernel.dim();
  const auto& alpha = kernel.inverse_length_scales;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::MatrixXd sd = points.variance.array().sqrt();

  Eigen::MatrixXd sum1 = Eigen::MatrixXd::Zero(n, m), sq1 = sum1;
  Eigen::MatrixXd sum2 = Eigen::MatrixXd::Zero(m, m), sq2 = sum2;
  double sum0 = 0.0, sq0 = 0.0;
  Eigen::MatrixXd x(n, q_dim);
  Eigen::MatrixXd k(n, m);
  Eigen::MatrixXd outer(m, m);
  for (long s = 0; s < samples; ++s) {
    for (Eigen::Index t = 0; t < n; ++t)
      for (Eigen::Index q = 0; q < q_dim; ++q)
        x(t, q) = points.mean(t, q) + (sd(t, q) > 0.0 ? sd(t, q) * normal(rng) : 0.0);
    for (Eigen::Index t = 0; t < n; ++t)
      for (Eigen::Index j = 0; j < m; ++j) {
        double r2 = 0.0;
        for (Eigen::Index q = 0; q < q_dim; ++q) {
          const double d = x(t, q) - inducing(j, q);
          r2 += alpha(q) * d * d;
        }
        k(t, j) = kernel.signal_variance * std::exp(-0.5 * r2);
      }
    // k(x, x) is constant for a stationary kernel
    const double p0 = static_cast<double>(n) * kernel.signal_variance;
    sum0 += p0;
    sq0 += p0 * p0;
    sum1 += k;
    sq1 += k.cwiseProduct(k);
    outer.noalias() = k.transpose() * k;
    sum2 += outer;
    sq2 += outer.cwiseProduct(outer);
  }
  const double ns = static_cast<double>(samples);
  auto finish = [ns](const Eigen::MatrixXd& sum, const Eigen::MatrixXd& sq, Eigen::MatrixXd& mean,
                     Eigen::MatrixXd& se) {
    mean = sum / ns;
    if (ns > 1.0) {
      Eigen::MatrixXd var = ((sq / ns) - mean.cwiseProduct(mean)).cwiseMax(0.0) * (ns / (ns - 1.0));
      se = (var / ns).cwiseSqrt();
    } else {
      se = Eigen::MatrixXd::Constant(mean.rows(), mean.cols(), std::numeric_limits<double>::infinity());
    }
  };
  McPsiEstimate est;
  est.samples = samples;
  finish(sum1, sq1, est.mean.psi1, est.standard_error.psi1);
  finish(sum2, sq2, est.mean.psi2, est.standard_error.psi2);
  est.mean.psi0 = sum0 / ns;
  est.standard_error.psi0 = ns > 1.0 ? std::sqrt(std::max(0.0, sq0 / ns - est.mean.psi0 * est.mean.psi0) / ns) : 0.0;
  return est;
}

}  // namespace gplvmf
