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
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gplvmf/dataset.hpp"
#include "gplvmf/optim.hpp"
#include "gplvmf/predict.hpp"
#include "gplvmf/state.hpp"

namespace gplvmf {

struct ErrorMetrics {
  double mae = 0.0;
  double rmse = 0.0;
};

ErrorMetrics metrics(std::span<const double> y_true, std::span<const double> y_pred);

/// Predicts every user's training mean; unknown users get the global mean.
class ConstBaseline {
 public:
  explicit ConstBaseline(const std::vector<UserBlock>& training);
  double predict(int user) const;

 private:
  std::vector<double> user_mean_;
  std::vector<bool> known_;
  double global_mean_ = 0.0;
};

struct FoldResult {
  int fold = 0;
  bool completed = false;
  std::string error;  // set when training or prediction failed
  ErrorMetrics model;
  ErrorMetrics baseline;  // Const
  std::size_t test_count = 0;
  std::size_t unknown_users = 0;  // test rows answered by the fallback
  double train_seconds = 0.0;
};

struct EvalResult {
  std::vector<FoldResult> folds;
  ErrorMetrics mean;  // over completed folds
  ErrorMetrics stddev;
  ErrorMetrics baseline_mean;
  std::vector<std::string> warnings;

  int completed() const;
};

struct EvalOptions {
  int k = 5;
  std::uint64_t seed = 1;
  PredictOptions predict = [] {
    PredictOptions o;
    o.global_mean_fallback = true;
    return o;
  }();
  /// Only evaluate these folds (all when empty).
  std::vector<int> only_folds;
};

/// k-fold cross-validation on clamped predictions. A fold whose training or
/// prediction throws is marked failed and left out of the aggregates.
EvalResult evaluate_cv(const RatingTable& table, const TrainConfig& config, const EvalOptions& options);

/// Trains on `train`, reports metrics on `test`; both standardized alike.
FoldResult evaluate_split(const RatingTable& train, const RatingTable& test, const TrainConfig& config,
                          const PredictOptions& predict, TrainTrace* trace = nullptr);

struct SyntheticContext {
  std::string name;
  ContextKind kind = ContextKind::Categorical;
  int cardinality = 2;
  int latent_dim = 1;   // categorical only
  double alpha = 1.0;   // inverse length scale on each of its coordinates
  /// Zero bias latents too, so the context has no effect at all when alpha is 0.
  bool irrelevant = false;
};

struct SyntheticSpec {
  int users = 20;
  int items = 10;
  std::vector<SyntheticContext> contexts;
  int item_dim = 1;
  double item_alpha = 1.0;
  int bias_dim = 1;
  bool use_mean = true;
  double signal_variance = 1.0;
  double noise_precision = 4.0;  // beta
  double user_bias_mean = 3.0;
  double user_bias_sd = 0.5;
  double bias_scale = 0.3;  // sd of item/context bias latents and real-context weights
  int ratings_per_user = 20;
  std::uint64_t seed = 1;

  void validate() const;
};

struct SyntheticData {
  RatingTable table;
  /// Ground truth: latent means hold the drawn latents, variances are zero.
  VariationalState truth;
};

SyntheticData synthesize(const SyntheticSpec& spec);

/// Draws one rating vector for the block's rows from N(m, K + beta^-1 I)
/// under a zero-variance (ground-truth) state.
Eigen::VectorXd sample_user_ratings(const VariationalState& truth, const UserBlock& block, std::mt19937_64& rng);

/// Marginal covariance K + beta^-1 I of the block's ratings under `truth`.
Eigen::MatrixXd rating_covariance(const VariationalState& truth, const UserBlock& block);

}  // namespace gplvmf
