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

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gplvmf/dataset.hpp"
#include "gplvmf/elbo.hpp"
#include "gplvmf/state.hpp"

namespace gplvmf {

struct RatingScale {
  double min = 1.0;
  double max = 5.0;

  double clamp(double value) const noexcept { return value < min ? min : (value > max ? max : value); }
};

struct Prediction {
  double mean = 0.0;
  double variance = 0.0;  // latent function variance, plus 1/beta when requested
  double clamped_mean = 0.0;
};

struct PredictOptions {
  RatingScale scale{};
  bool add_noise = false;
  /// Answer unknown users with the global training mean instead of throwing.
  bool global_mean_fallback = false;
  ElboOptions elbo{};
};

/// Per-user solve results and the training-rating moments used by the fallback.
struct PredictorCache {
  std::vector<std::optional<UserPosterior>> posterior;  // indexed by user
  double global_mean = 0.0;
  double global_variance = 0.0;
};

/// Trained model plus per-user solve caches. Read-only after construction, so
/// predict() may be called concurrently.
class Predictor {
 public:
  Predictor(VariationalState state, const std::vector<UserBlock>& training, PredictOptions options = {});
  /// Restores a predictor whose state already has unseen entities at the prior.
  Predictor(VariationalState state, PredictorCache cache, PredictOptions options = {});

  /// `query.context` must already be standardized; the rating field is ignored.
  Prediction predict(const RatingRecord& query) const;
  std::vector<Prediction> predict(const std::vector<RatingRecord>& queries) const;

  bool knows_user(int user) const;
  const VariationalState& state() const noexcept { return state_; }
  const PredictOptions& options() const noexcept { return options_; }
  const PredictorCache& cache() const noexcept { return cache_; }

 private:
  VariationalState state_;
  PredictOptions options_;
  PredictorCache cache_;
};

/// Entities never seen in `training` are reset to the prior N(0, 1).
void reset_unseen(VariationalState& state, const std::vector<UserBlock>& training);

struct RelevanceEntry {
  std::string name;
  double score = 0.0;  // sum of inverse length scales over the block's coordinates
  double share = 0.0;
};

/// First entry is the item block ("item"), then one per context in schema order.
/// Shares are normalized over all entries.
struct ContextRelevance {
  std::vector<RelevanceEntry> entries;

  const RelevanceEntry& at(const std::string& name) const;
};

ContextRelevance context_relevance(const VariationalState& state);

}  // namespace gplvmf
