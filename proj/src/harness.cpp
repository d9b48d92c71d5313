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

#include "gplvmf/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "gplvmf/errors.hpp"
#include "gplvmf/kernel.hpp"
#include "gplvmf/meanfn.hpp"

namespace gplvmf {

ErrorMetrics metrics(std::span<const double> y_true, std::span<const double> y_pred) {
  if (y_true.size() != y_pred.size())
    throw std::invalid_argument("metrics: length mismatch (" + std::to_string(y_true.size()) + " vs " +
                                std::to_string(y_pred.size()) + ")");
  if (y_true.empty()) throw std::invalid_argument("metrics: empty input");
  double abs_sum = 0.0, sq_sum = 0.0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const double d = y_true[i] - y_pred[i];
    abs_sum += std::abs(d);
    sq_sum += d * d;
  }
  const double n = static_cast<double>(y_true.size());
  return {abs_sum / n, std::sqrt(sq_sum / n)};
}

ConstBaseline::ConstBaseline(const std::vector<UserBlock>& training) {
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& b : training) {
    if (b.count() == 0) continue;
    const auto u = static_cast<std::size_t>(b.user);
    if (u >= user_mean_.size()) {
      user_mean_.resize(u + 1, 0.0);
      known_.resize(u + 1, false);
    }
    const Eigen::VectorXd y = b.ratings();
    user_mean_[u] = y.mean();
    known_[u] = true;
    total += y.sum();
    count += b.count();
  }
  global_mean_ = count > 0 ? total / static_cast<double>(count) : 0.0;
}

double ConstBaseline::predict(int user) const {
  const auto u = static_cast<std::size_t>(user);
  return user >= 0 && u < known_.size() && known_[u] ? user_mean_[u] : global_mean_;
}

int EvalResult::completed() const {
  return static_cast<int>(std::count_if(folds.begin(), folds.end(), [](const FoldResult& f) { return f.completed; }));
}

FoldResult evaluate_split(const RatingTable& train, const RatingTable& test, const TrainConfig& config,
                          const PredictOptions& predict, TrainTrace* trace) {
  FoldResult r;
  r.test_count = test.size();
  const auto blocks = group_by_user(train);
  const auto start = std::chrono::steady_clock::now();
  TrainResult trained = gplvmf::train(train.schema, blocks, config, {});
  r.train_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (trace) *trace = trained.trace;

  const Predictor predictor(std::move(trained.state), blocks, predict);
  const ConstBaseline baseline(blocks);
  std::vector<double> truth, model, constant;
  truth.reserve(test.size());
  for (const auto& q : test.records) {
    if (!predictor.knows_user(q.user)) ++r.unknown_users;
    truth.push_back(q.rating);
    model.push_back(predictor.predict(q).clamped_mean);
    constant.push_back(predict.scale.clamp(baseline.predict(q.user)));
  }
  r.model = metrics(truth, model);
  r.baseline = metrics(truth, constant);
  r.completed = true;
  return r;
}

EvalResult evaluate_cv(const RatingTable& table, const TrainConfig& config, const EvalOptions& options) {
  if (options.k < 2) throw ConfigError("cross-validation needs k >= 2");
  if (table.size() < static_cast<std::size_t>(options.k))
    throw DataError("cross-validation: fewer records than folds");
  config.validate();
  const FoldPlan plan = make_folds(table, options.k, options.seed);

  EvalResult result;
  for (int f = 0; f < options.k; ++f) {
    if (!options.only_folds.empty() &&
        std::find(options.only_folds.begin(), options.only_folds.end(), f) == options.only_folds.end())
      continue;
    const auto train_rows = plan.train_rows(f);
    const auto test_rows = plan.test_rows(f);
    FoldResult fr;
    try {
      const auto [train, test] = split_table(table, train_rows, test_rows);
      fr = evaluate_split(train, test, config, options.predict);
    } catch (const std::exception& e) {
      fr.completed = false;
      fr.error = e.what();
      result.warnings.push_back("fold " + std::to_string(f) + " failed: " + e.what());
    }
    fr.fold = f;
    fr.test_count = test_rows.size();
    if (fr.unknown_users > 0)
      result.warnings.push_back("fold " + std::to_string(f) + ": " + std::to_string(fr.unknown_users) +
                                " test ratings from users absent in training");
    result.folds.push_back(fr);
  }

  std::vector<double> mae, rmse, base_mae, base_rmse;
  for (const auto& f : result.folds) {
    if (!f.completed) continue;
    mae.push_back(f.model.mae);
    rmse.push_back(f.model.rmse);
    base_mae.push_back(f.baseline.mae);
    base_rmse.push_back(f.baseline.rmse);
  }
  auto mean = [](const std::vector<double>& v) {
    return v.empty() ? std::nan("") : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  };
  auto sd = [&](const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
  };
  result.mean = {mean(mae), mean(rmse)};
  result.stddev = {sd(mae), sd(rmse)};
  result.baseline_mean = {mean(base_mae), mean(base_rmse)};
  if (mae.empty()) result.warnings.push_back("no fold completed");
  return result;
}

void SyntheticSpec::validate() const {
  if (users < 1 || items < 1 || ratings_per_user < 1) throw ConfigError("synthetic: counts must be positive");
  if (item_dim < 1 || bias_dim < 1) throw ConfigError("synthetic: latent dimensions must be positive");
  if (!(signal_variance >= 0.0) || !(noise_precision > 0.0))
    throw ConfigError("synthetic: need signal_variance >= 0 and noise_precision > 0");
  for (const auto& c : contexts) {
    if (c.kind == ContextKind::Categorical && (c.cardinality < 1 || c.latent_dim < 1))
      throw ConfigError("synthetic: context '" + c.name + "' needs positive cardinality and latent_dim");
    if (!(c.alpha >= 0.0)) throw ConfigError("synthetic: negative alpha for context '" + c.name + "'");
  }
}

Eigen::MatrixXd rating_covariance(const VariationalState& truth, const UserBlock& block) {
  const LatentPoints pts = gather_points(truth, block);
  const ArdKernel kernel = truth.user_kernel(block.user);
  Eigen::MatrixXd cov = kernel_matrix(kernel, pts.mean, pts.mean);
  cov.diagonal().array() += 1.0 / truth.noise_precision(block.user);
  return cov;
}

Eigen::VectorXd sample_user_ratings(const VariationalState& truth, const UserBlock& block, std::mt19937_64& rng) {
  const Eigen::MatrixXd cov = rating_covariance(truth, block);
  const Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw NumericalError("synthesize: rating covariance not positive definite");
  std::normal_distribution<double> normal;
  Eigen::VectorXd e(cov.rows());
  for (Eigen::Index i = 0; i < e.size(); ++i) e(i) = normal(rng);
  Eigen::VectorXd y = llt.matrixL() * e;
  if (truth.layout.use_mean) y += mean_vector(truth.bias, truth.schema, block);
  return y;
}

SyntheticData synthesize(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal;

  ContextSchema schema;
  schema.user_count = spec.users;
  schema.item_count = spec.items;
  for (const auto& c : spec.contexts)
    schema.contexts.push_back({c.name, c.kind, c.kind == ContextKind::Categorical ? c.cardinality : 0,
                               c.kind == ContextKind::Categorical ? c.latent_dim : 0});
  schema.validate();

  std::vector<RatingRecord> raw;
  raw.reserve(static_cast<std::size_t>(spec.users) * static_cast<std::size_t>(spec.ratings_per_user));
  for (int u = 0; u < spec.users; ++u)
    for (int t = 0; t < spec.ratings_per_user; ++t) {
      RatingRecord r;
      r.user = u;
      r.item = static_cast<int>(rng() % static_cast<std::uint64_t>(spec.items));
      for (const auto& c : spec.contexts)
        r.context.push_back(c.kind == ContextKind::Categorical
                                ? static_cast<double>(rng() % static_cast<std::uint64_t>(c.cardinality))
                                : normal(rng));
      raw.push_back(r);
    }
  SyntheticData out;
  out.table = make_table(schema, raw);

  ModelDims dims;
  dims.item_dim = spec.item_dim;
  dims.bias_dim = spec.bias_dim;
  dims.inducing = 1;
  dims.use_mean = spec.use_mean;
  VariationalState& truth = out.truth;
  truth = VariationalState::zeros(schema, dims);
  auto draw = [&](EntityLatents& e, double sd) {
    for (Eigen::Index i = 0; i < e.mean.size(); ++i) e.mean.data()[i] = sd * normal(rng);
  };
  draw(truth.item, 1.0);
  truth.inverse_length_scales.head(spec.item_dim).setConstant(spec.item_alpha);
  for (std::size_t d = 0; d < spec.contexts.size(); ++d) {
    const auto& c = spec.contexts[d];
    truth.inverse_length_scales.segment(truth.layout.context_offset[d], truth.layout.context_dim[d])
        .setConstant(c.alpha);
    if (c.kind == ContextKind::Categorical) {
      draw(truth.context[d], 1.0);
      draw(truth.bias.context[d], c.irrelevant ? 0.0 : spec.bias_scale);
    } else {
      truth.bias.real_weight(static_cast<Eigen::Index>(d)) = c.irrelevant ? 0.0 : spec.bias_scale * normal(rng);
    }
  }
  draw(truth.bias.item, spec.bias_scale);
  for (int u = 0; u < spec.users; ++u) truth.bias.user_bias(u) = spec.user_bias_mean + spec.user_bias_sd * normal(rng);
  truth.signal_variance.setConstant(spec.signal_variance);
  truth.noise_precision.setConstant(spec.noise_precision);

  auto blocks = group_by_user(out.table);
  std::size_t next = 0;
  for (const auto& b : blocks) {
    const Eigen::VectorXd y = sample_user_ratings(truth, b, rng);
    for (Eigen::Index t = 0; t < y.size(); ++t) out.table.records[next++].rating = y(t);
  }
  return out;
}

}  // namespace gplvmf
