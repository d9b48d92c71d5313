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

#include <filesystem>
#include <string>

#include "gplvmf/dataset.hpp"
#include "gplvmf/harness.hpp"
#include "gplvmf/optim.hpp"
#include "gplvmf/predict.hpp"

namespace gplvmf {

/// Everything a run needs besides the data file itself.
struct ExperimentConfig {
  ContextSchema schema;
  TextFormat format;
  RatingScale scale;
  TrainConfig train;
  bool add_noise = false;  // add 1/beta to predictive variances
  int folds = 5;
  std::uint64_t fold_seed = 1;

  void validate() const;
  PredictOptions predict_options() const;
};

/// JSON document; unknown keys are rejected so typos do not pass silently.
ExperimentConfig parse_config(const std::string& json_text);
ExperimentConfig load_config(const std::filesystem::path& path);
std::string dump_config(const ExperimentConfig& config);

SyntheticSpec parse_synthetic_spec(const std::string& json_text);
SyntheticSpec load_synthetic_spec(const std::filesystem::path& path);

/// Schema JSON as used inside config files.
std::string dump_schema(const ContextSchema& schema);

}  // namespace gplvmf
