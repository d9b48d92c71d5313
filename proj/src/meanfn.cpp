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

#include "gplvmf/meanfn.hpp"

#include <stdexcept>
#include <string>

namespace gplvmf {

namespace {

void check_row(const BiasLatents& bias, const ContextSchema& schema, const RatingRecord& r) {
  if (r.user < 0 || r.user >= bias.user_bias.size())
    throw std::out_of_range("mean function: user " + std::to_string(r.user) + " out of range");
  if (r.item < 0 || r.item >= bias.item.count())
    throw std::out_of_range("mean function: item " + std::to_string(r.item) + " out of range");
  if (r.context.size() != schema.size())
    throw std::out_of_range("mean function: context count mismatch");
  for (std::size_t d = 0; d < schema.size(); ++d) {
    if (!schema.contexts[d].categorical()) continue;
    const int c = r.category(d);
    if (c < 0 || c >= bias.context[d].count())
      throw std::out_of_range("mean function: category " + std::to_string(c) + " of context '" +
                              schema.contexts[d].name + "' out of range");
  }
}

}  // namespace

BiasLatents BiasLatents::zeros(const ContextSchema& schema, int bias_dim) {
  BiasLatents b;
  b.user_bias = Eigen::VectorXd::Zero(schema.user_count);
  b.item = EntityLatents::zeros(schema.item_count, bias_dim);
  b.context.resize(schema.size());
  for (std::size_t d = 0; d < schema.size(); ++d) {
    const auto& ctx = schema.contexts[d];
    b.context[d] = ctx.categorical() ? EntityLatents::zeros(ctx.cardinality, bias_dim)
                                     : EntityLatents::zeros(0, 0);
  }
  b.real_weight = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(schema.size()));
  return b;
}

Eigen::VectorXd mean_vector(const BiasLatents& bias, const ContextSchema& schema,
                            const UserBlock& block) {
  const auto n = static_cast<Eigen::Index>(block.count());
  Eigen::VectorXd m(n);
  for (Eigen::Index t = 0; t < n; ++t) {
    const auto& r = block.rows[static_cast<std::size_t>(t)];
    check_row(bias, schema, r);
    double v = bias.user_bias(r.user) + bias.item.mean.row(r.item).sum();
    for (std::size_t d = 0; d < schema.size(); ++d) {
      if (schema.contexts[d].categorical())
        v += bias.context[d].mean.row(r.category(d)).sum();
      else
        v += bias.real_weight(static_cast<Eigen::Index>(d)) * r.context[d];
    }
    m(t) = v;
  }
  return m;
}

PhiStats phi_statistics(const BiasLatents& bias, const ContextSchema& schema,
                        const UserBlock& block) {
  PhiStats s;
  s.phi1 = mean_vector(bias, schema, block);
  double phi0 = s.phi1.squaredNorm();
  for (const auto& r : block.rows) {
    phi0 += bias.item.variance.row(r.item).sum();
    for (std::size_t d = 0; d < schema.size(); ++d)
      if (schema.contexts[d].categorical()) phi0 += bias.context[d].variance.row(r.category(d)).sum();
  }
  s.phi0 = phi0;
  return s;
}

void phi_backward(const BiasLatents& bias, const ContextSchema& schema, const UserBlock& block,
                  const PhiSensitivity& sens, BiasLatents& grad, double weight,
                  bool log_variance) {
  const Eigen::VectorXd phi1 = mean_vector(bias, schema, block);
  for (std::size_t i = 0; i < block.count(); ++i) {
    const auto t = static_cast<Eigen::Index>(i);
    const auto& r = block.rows[i];
    // phi0 = sum_t phi1_t^2 + variances, so each row mean also feeds phi0
    const double g_mean = weight * (sens.phi1(t) + 2.0 * sens.phi0 * phi1(t));
    const double g_var = weight * sens.phi0;
    grad.user_bias(r.user) += g_mean;
    grad.item.mean.row(r.item).array() += g_mean;
    if (log_variance)
      grad.item.variance.row(r.item) += g_var * bias.item.variance.row(r.item);
    else
      grad.item.variance.row(r.item).array() += g_var;
    for (std::size_t d = 0; d < schema.size(); ++d) {
      if (schema.contexts[d].categorical()) {
        grad.context[d].mean.row(r.category(d)).array() += g_mean;
        const int c = r.category(d);
        if (log_variance)
          grad.context[d].variance.row(c) += g_var * bias.context[d].variance.row(c);
        else
          grad.context[d].variance.row(c).array() += g_var;
      } else {
        grad.real_weight(static_cast<Eigen::Index>(d)) += g_mean * r.context[d];
      }
    }
  }
}

}  // namespace gplvmf
