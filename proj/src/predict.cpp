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

#include "gplvmf/predict.hpp"

#include <algorithm>
#include <stdexcept>

#include "gplvmf/errors.hpp"
#include "gplvmf/kernel.hpp"
#include "gplvmf/meanfn.hpp"

namespace gplvmf {

namespace {

void reset_rows(EntityLatents& e, const std::vector<bool>& seen) {
  for (Eigen::Index i = 0; i < e.count(); ++i) {
    if (seen[static_cast<std::size_t>(i)]) continue;
    e.mean.row(i).setZero();
    e.variance.row(i).setOnes();
  }
}

}  // namespace

void reset_unseen(VariationalState& state, const std::vector<UserBlock>& training) {
  const auto& schema = state.schema;
  std::vector<bool> items(static_cast<std::size_t>(schema.item_count), false);
  std::vector<std::vector<bool>> cats(schema.size());
  for (std::size_t d = 0; d < schema.size(); ++d)
    cats[d].assign(static_cast<std::size_t>(std::max(0, schema.contexts[d].cardinality)), false);
  for (const auto& b : training)
    for (const auto& r : b.rows) {
      items[static_cast<std::size_t>(r.item)] = true;
      for (std::size_t d = 0; d < schema.size(); ++d)
        if (schema.contexts[d].categorical()) cats[d][static_cast<std::size_t>(r.category(d))] = true;
    }
  reset_rows(state.item, items);
  reset_rows(state.bias.item, items);
  for (std::size_t d = 0; d < schema.size(); ++d) {
    if (!schema.contexts[d].categorical()) continue;
    reset_rows(state.context[d], cats[d]);
    reset_rows(state.bias.context[d], cats[d]);
  }
}

Predictor::Predictor(VariationalState state, const std::vector<UserBlock>& training, PredictOptions options)
    : state_(std::move(state)), options_(options) {
  if (options_.scale.min > options_.scale.max) throw ConfigError("rating scale: min exceeds max");
  reset_unseen(state_, training);
  cache_.posterior.resize(static_cast<std::size_t>(state_.schema.user_count));
  double sum = 0.0, sq = 0.0;
  std::size_t count = 0;
  for (const auto& b : training) {
    if (b.count() == 0) continue;
    cache_.posterior.at(static_cast<std::size_t>(b.user)) = user_posterior(b, state_, options_.elbo);
    for (const auto& r : b.rows) {
      sum += r.rating;
      sq += r.rating * r.rating;
      ++count;
    }
  }
  if (count > 0) {
    cache_.global_mean = sum / static_cast<double>(count);
    cache_.global_variance = std::max(0.0, sq / static_cast<double>(count) - cache_.global_mean * cache_.global_mean);
  }
}

Predictor::Predictor(VariationalState state, PredictorCache cache, PredictOptions options)
    : state_(std::move(state)), options_(options), cache_(std::move(cache)) {
  if (options_.scale.min > options_.scale.max) throw ConfigError("rating scale: min exceeds max");
  cache_.posterior.resize(static_cast<std::size_t>(state_.schema.user_count));
  const Eigen::Index m = state_.inducing_count();
  for (const auto& p : cache_.posterior)
    if (p && (p->weights.size() != m || p->core.rows() != m || p->core.cols() != m))
      throw DataError("predictor cache does not match the inducing point count");
}

bool Predictor::knows_user(int user) const {
  return user >= 0 && static_cast<std::size_t>(user) < cache_.posterior.size() &&
         cache_.posterior[static_cast<std::size_t>(user)].has_value();
}

Prediction Predictor::predict(const RatingRecord& query) const {
  Prediction p;
  if (!knows_user(query.user)) {
    RatingRecord probe = query;
    probe.user = 0;
    validate_record(state_.schema, probe, "query");
    if (!options_.global_mean_fallback) throw UnknownUserError(query.user);
    p.mean = cache_.global_mean;
    p.variance = cache_.global_variance;
    p.clamped_mean = options_.scale.clamp(p.mean);
    return p;
  }
  validate_record(state_.schema, query, "query");
  const UserPosterior& post = *cache_.posterior[static_cast<std::size_t>(query.user)];
  const UserBlock one{query.user, {query}};
  const PsiStats psi = psi_statistics(state_.user_kernel(query.user), gather_points(state_, one), state_.inducing);
  const Eigen::VectorXd k = psi.psi1.row(0).transpose();
  const double kw = k.dot(post.weights);

  double bias_mean = 0.0, bias_var = 0.0;
  if (state_.layout.use_mean) {
    const PhiStats phi = phi_statistics(state_.bias, state_.schema, one);
    bias_mean = phi.phi1(0);
    bias_var = std::max(0.0, phi.phi0 - bias_mean * bias_mean);
  }
  p.mean = kw + bias_mean;
  const double f_var = psi.psi0 - (post.core.cwiseProduct(psi.psi2)).sum() +
                       post.weights.dot(psi.psi2 * post.weights) - kw * kw;
  p.variance = std::max(0.0, f_var) + bias_var;
  if (options_.add_noise) p.variance += 1.0 / state_.noise_precision(query.user);
  p.clamped_mean = options_.scale.clamp(p.mean);
  return p;
}

std::vector<Prediction> Predictor::predict(const std::vector<RatingRecord>& queries) const {
  std::vector<Prediction> out;
  out.reserve(queries.size());
  for (const auto& q : queries) out.push_back(predict(q));
  return out;
}

const RelevanceEntry& ContextRelevance::at(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return e;
  throw std::out_of_range("no relevance entry named '" + name + "'");
}

ContextRelevance context_relevance(const VariationalState& state) {
  const auto& layout = state.layout;
  const auto& alpha = state.inverse_length_scales;
  ContextRelevance rel;
  rel.entries.push_back({"item", alpha.head(layout.item_dim).sum(), 0.0});
  for (std::size_t d = 0; d < state.schema.size(); ++d)
    rel.entries.push_back({state.schema.contexts[d].name,
                           alpha.segment(layout.context_offset[d], layout.context_dim[d]).sum(), 0.0});
  double total = 0.0;
  for (const auto& e : rel.entries) total += e.score;
  if (total > 0.0)
    for (auto& e : rel.entries) e.share = e.score / total;
  return rel;
}

}  // namespace gplvmf
