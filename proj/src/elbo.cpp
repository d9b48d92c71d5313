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

#include "gplvmf/elbo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <thread>

#include "gplvmf/errors.hpp"

namespace gplvmf {

namespace {

double kl_block(const EntityLatents& e) {
  if (e.mean.size() == 0) return 0.0;
  if ((e.variance.array() <= 0.0).any()) throw NumericalError("KL: non-positive variance on a free coordinate");
  return 0.5 * (e.mean.array().square() + e.variance.array() - e.variance.array().log() - 1.0).sum();
}

void kl_block_backward(const EntityLatents& e, EntityLatents& g, double weight) {
  if (e.mean.size() == 0) return;
  g.mean.array() -= weight * e.mean.array();
  g.variance.array() -= weight * 0.5 * (e.variance.array() - 1.0);
}

struct UserTerms {
  Eigen::VectorXd y;
  LatentPoints points;
  ArdKernel kernel;
  PsiStats psi;
  PhiStats phi;
  double beta = 1.0;
  double jitter = 0.0;
  Eigen::MatrixXd k_mm;  // with jitter
  Eigen::LLT<Eigen::MatrixXd> llt_k;
  Eigen::LLT<Eigen::MatrixXd> llt_a;  // K + beta Psi2
};

std::string diagnostics(const Eigen::MatrixXd& k) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k, Eigen::EigenvaluesOnly);
  std::ostringstream os;
  const auto& ev = eig.eigenvalues();
  os << "eigenvalues in [" << ev.minCoeff() << ", " << ev.maxCoeff() << "]";
  if (ev.minCoeff() > 0) os << ", condition " << ev.maxCoeff() / ev.minCoeff();
  return os.str();
}

UserTerms compute_terms(const UserBlock& block, const VariationalState& state, const ElboOptions& opt) {
  if (block.count() == 0) throw std::invalid_argument("user bound: empty block");
  if (state.inducing_count() < 1) throw std::invalid_argument("user bound: need at least one inducing point");
  UserTerms u;
  const int n = block.user;
  u.y = block.ratings();
  u.points = gather_points(state, block);
  u.kernel = state.user_kernel(n);
  u.beta = state.noise_precision(n);
  u.psi = psi_statistics(u.kernel, u.points, state.inducing);
  if (state.layout.use_mean) {
    u.phi = phi_statistics(state.bias, state.schema, block);
  } else {
    u.phi.phi1 = Eigen::VectorXd::Zero(u.y.size());
    u.phi.phi0 = 0.0;
  }
  const Eigen::Index m = state.inducing_count();
  const Eigen::MatrixXd k_raw = kernel_matrix(u.kernel, state.inducing, state.inducing);
  double jitter = opt.jitter;
  for (int attempt = 0; attempt <= opt.jitter_escalations; ++attempt, jitter *= 10.0) {
    u.k_mm = k_raw;
    u.k_mm.diagonal().array() += jitter * u.kernel.signal_variance;
    u.llt_k.compute(u.k_mm);
    if (u.llt_k.info() != Eigen::Success) continue;
    Eigen::MatrixXd a = u.k_mm + u.beta * u.psi.psi2;
    u.llt_a.compute(a);
    if (u.llt_a.info() != Eigen::Success) continue;
    u.jitter = jitter;
    return u;
  }
  std::ostringstream os;
  os << "user " << n << ": Cholesky of K_MM (M=" << m << ") failed after jitter " << jitter / 10.0
     << "; " << diagnostics(k_raw);
  throw NumericalError(os.str());
}

double log_det(const Eigen::LLT<Eigen::MatrixXd>& llt) {
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

double evaluate(const UserBlock& block, const VariationalState& state, const ElboOptions& opt,
                VariationalState* grad, double weight) {
  const UserTerms u = compute_terms(block, state, opt);
  const double n = static_cast<double>(u.y.size());
  const double beta = u.beta;
  const Eigen::VectorXd resid = u.y - u.phi.phi1;
  const Eigen::VectorXd c = u.psi.psi1.transpose() * resid;
  const Eigen::VectorXd a = u.llt_a.solve(c);
  const Eigen::MatrixXd kinv_psi2 = u.llt_k.solve(u.psi.psi2);
  const double data_fit = u.y.squaredNorm() - 2.0 * u.y.dot(u.phi.phi1) + u.phi.phi0;
  const double quad = c.dot(a);

  const double value = 0.5 * n * std::log(beta) - 0.5 * n * std::log(2.0 * std::numbers::pi) +
                       0.5 * log_det(u.llt_k) - 0.5 * log_det(u.llt_a) - 0.5 * beta * data_fit +
                       0.5 * beta * beta * quad - 0.5 * beta * u.psi.psi0 + 0.5 * beta * kinv_psi2.trace();
  if (!std::isfinite(value)) {
    std::ostringstream os;
    os << "user " << block.user << ": non-finite bound (beta=" << beta
       << ", signal variance=" << u.kernel.signal_variance << ")";
    throw NumericalError(os.str());
  }
  if (grad == nullptr) return value;

  const Eigen::Index m = state.inducing_count();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(m, m);
  const Eigen::MatrixXd k_inv = u.llt_k.solve(eye);
  const Eigen::MatrixXd a_inv = u.llt_a.solve(eye);
  const Eigen::MatrixXd aat = a * a.transpose();

  PsiSensitivity ps;
  ps.psi0 = -0.5 * beta;
  ps.psi1 = beta * beta * resid * a.transpose();
  ps.psi2 = -0.5 * beta * a_inv - 0.5 * beta * beta * beta * aat + 0.5 * beta * k_inv;
  const Eigen::MatrixXd g_k =
      0.5 * k_inv - 0.5 * a_inv - 0.5 * beta * beta * aat - 0.5 * beta * kinv_psi2 * k_inv;

  const PsiGradient pg = psi_backward(u.kernel, u.points, state.inducing, ps);
  const KernelGradient kg = kernel_backward(u.kernel, state.inducing, g_k, u.jitter);

  const int user = block.user;
  scatter_point_gradient(state, block, pg.mean, pg.variance, *grad, weight);
  grad->inducing += weight * (pg.inducing + kg.inducing);
  grad->inverse_length_scales +=
      weight * (pg.log_inverse_length_scales + kg.log_inverse_length_scales);
  grad->signal_variance(user) += weight * (pg.log_signal_variance + kg.log_signal_variance);

  const double d_beta = 0.5 * n / beta - 0.5 * (a_inv.cwiseProduct(u.psi.psi2)).sum() -
                        0.5 * data_fit + beta * quad - 0.5 * beta * beta * a.dot(u.psi.psi2 * a) -
                        0.5 * u.psi.psi0 + 0.5 * kinv_psi2.trace();
  grad->noise_precision(user) += weight * d_beta * beta;

  if (state.layout.use_mean) {
    PhiSensitivity fs;
    fs.phi1 = beta * u.y - beta * beta * (u.psi.psi1 * a);
    fs.phi0 = -0.5 * beta;
    phi_backward(state.bias, state.schema, block, fs, grad->bias, weight, true);
  }
  return value;
}

}  // namespace

double kl_to_prior(const VariationalState& state) {
  double kl = kl_block(state.item);
  for (const auto& c : state.context) kl += kl_block(c);
  if (state.layout.use_mean) {
    kl += kl_block(state.bias.item);
    for (const auto& c : state.bias.context) kl += kl_block(c);
  }
  return kl;
}

void kl_backward(const VariationalState& state, VariationalState& grad, double weight) {
  kl_block_backward(state.item, grad.item, weight);
  for (std::size_t d = 0; d < state.context.size(); ++d)
    kl_block_backward(state.context[d], grad.context[d], weight);
  if (state.layout.use_mean) {
    kl_block_backward(state.bias.item, grad.bias.item, weight);
    for (std::size_t d = 0; d < state.bias.context.size(); ++d)
      kl_block_backward(state.bias.context[d], grad.bias.context[d], weight);
  }
}

double user_bound(const UserBlock& block, const VariationalState& state, const ElboOptions& options) {
  return evaluate(block, state, options, nullptr, 1.0);
}

double user_bound(const UserBlock& block, const VariationalState& state, const ElboOptions& options,
                  VariationalState& grad, double weight) {
  return evaluate(block, state, options, &grad, weight);
}

BoundReport total_bound(const std::vector<UserBlock>& blocks, const VariationalState& state,
                        const ElboOptions& options, bool with_gradient) {
  BoundReport report;
  const auto nb = blocks.size();
  report.per_user = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nb));

  // Fixed chunking keeps the reduction order, and so the result, independent of thread count.
  const std::size_t chunks = std::min<std::size_t>(nb, 32);
  std::vector<VariationalState> partial;
  if (with_gradient) partial.assign(chunks, state.zeros_like());
  std::vector<std::exception_ptr> errors(chunks);
  auto run_chunk = [&](std::size_t ch) {
    try {
      for (std::size_t b = ch; b < nb; b += chunks) {
        report.per_user(static_cast<Eigen::Index>(b)) =
            with_gradient ? user_bound(blocks[b], state, options, partial[ch])
                          : user_bound(blocks[b], state, options);
      }
    } catch (...) {
      errors[ch] = std::current_exception();
    }
  };
  unsigned threads = options.threads > 0 ? static_cast<unsigned>(options.threads)
                                         : std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, chunks));
  if (threads <= 1) {
    for (std::size_t ch = 0; ch < chunks; ++ch) run_chunk(ch);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t ch = w; ch < chunks; ch += threads) run_chunk(ch);
      });
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  report.kl = kl_to_prior(state);
  report.total = report.per_user.sum() - report.kl;
  if (with_gradient) {
    VariationalState g = state.zeros_like();
    for (const auto& p : partial) {
      Eigen::VectorXd acc = pack_raw(g) + pack_raw(p);
      unpack_raw(acc, g);
    }
    kl_backward(state, g, 1.0);
    report.gradient = pack_raw(g);
  }
  return report;
}

InducingPosterior optimal_qu(const UserBlock& block, const VariationalState& state,
                             const ElboOptions& options) {
  const UserTerms u = compute_terms(block, state, options);
  // (beta^-1 K + Psi2) spelling, kept separate from the bound's (K + beta Psi2) form
  const Eigen::MatrixXd b = u.k_mm / u.beta + u.psi.psi2;
  Eigen::LLT<Eigen::MatrixXd> llt(b);
  if (llt.info() != Eigen::Success)
    throw NumericalError("user " + std::to_string(block.user) + ": beta^-1 K_MM + Psi2 not positive definite");
  const Eigen::VectorXd resid = u.y - u.phi.phi1;
  InducingPosterior post;
  post.mean = u.k_mm * llt.solve(u.psi.psi1.transpose() * resid);
  post.covariance = (u.k_mm * llt.solve(u.k_mm)) / u.beta;
  post.covariance = 0.5 * (post.covariance + post.covariance.transpose());
  return post;
}

UserPosterior user_posterior(const UserBlock& block, const VariationalState& state,
                             const ElboOptions& options) {
  const UserTerms u = compute_terms(block, state, options);
  const Eigen::VectorXd resid = u.y - u.phi.phi1;
  const Eigen::Index m = state.inducing_count();
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(m, m);
  UserPosterior p;
  p.weights = u.beta * u.llt_a.solve(u.psi.psi1.transpose() * resid);
  p.core = u.llt_k.solve(eye) - u.llt_a.solve(eye);
  p.core = 0.5 * (p.core + p.core.transpose());
  return p;
}

}  // namespace gplvmf
