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
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "gplvmf/dataset.hpp"
#include "gplvmf/elbo.hpp"
#include "gplvmf/state.hpp"

namespace gplvmf {

enum class Method { SGD, SCG };

std::string to_string(Method method);
Method parse_method(const std::string& name);

struct TrainConfig {
  Method method = Method::SCG;
  int iterations = 200;  // epochs for SGD, iterations for SCG
  double learning_rate = 0.005;
  double lr_decay = 0.99;  // multiplicative, per epoch
  std::uint64_t seed = 1;
  ModelDims dims;
  double init_mean_scale = 0.1;
  double init_variance = 0.5;
  double inducing_jitter = 0.05;
  double tolerance = 1e-6;  // SCG gradient-norm and objective-change tolerance
  int patience = 20;        // early stop on validation MAE
  double clip_norm = 100.0;
  ElboOptions elbo;

  /// Throws ConfigError on invalid values.
  void validate() const;
};

struct TraceEntry {
  int iteration = 0;
  double bound = 0.0;
  std::optional<double> mae;
  std::optional<double> rmse;
  double seconds = 0.0;
  bool accepted = true;
};

struct TrainTrace {
  std::vector<TraceEntry> entries;
  std::string status;

  /// Delimited text: iteration, bound, mae, rmse, seconds (empty cells when absent).
  void write(std::ostream& out, char delimiter = ',') const;
};

/// Validation metrics (MAE, RMSE) for a candidate state; used for early stopping.
using Validator = std::function<std::pair<double, double>(const VariationalState&)>;

/// Seeded initialization. Entities without ratings start at the prior (mean 0, variance 1).
VariationalState init_state(const ContextSchema& schema, const std::vector<UserBlock>& blocks,
                            const TrainConfig& config, std::uint64_t seed);

/// User visit order of one SGD epoch.
std::vector<std::size_t> sgd_visit_order(std::size_t block_count, std::uint64_t seed, int epoch);

/// One pass of per-user stochastic gradient ascent. Each step ascends
/// F_n - sum_e KL_e / n_e over the parameters user n touches, where n_e is the
/// number of users rating entity e. Returns sum_n F_n (as visited) - KL.
double sgd_epoch(const std::vector<UserBlock>& blocks, VariationalState& state,
                 const TrainConfig& config, int epoch);

struct TrainResult {
  VariationalState state;
  TrainTrace trace;
};

/// Full-batch SCG on the negated bound over pack(state).
TrainResult scg_run(const std::vector<UserBlock>& blocks, VariationalState state,
                    const TrainConfig& config, const Validator& validator = {});

/// SGD epochs with per-epoch decay and optional early stopping.
TrainResult sgd_run(const std::vector<UserBlock>& blocks, VariationalState state,
                    const TrainConfig& config, const Validator& validator = {});

/// init_state followed by the configured optimizer.
TrainResult train(const ContextSchema& schema, const std::vector<UserBlock>& blocks,
                  const TrainConfig& config, const Validator& validator = {});

}  // namespace gplvmf
