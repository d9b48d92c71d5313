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
#include <iosfwd>

#include "gplvmf/dataset.hpp"
#include "gplvmf/predict.hpp"
#include "gplvmf/state.hpp"

namespace gplvmf {

inline constexpr const char* kModelFormat = "gplvmf-model";
inline constexpr int kModelVersion = 1;

/// A trained model as stored on disk: state, predictor caches and the
/// standardization needed to map raw query contexts.
struct SavedModel {
  ModelDims dims;
  VariationalState state;
  PredictorCache cache;
  Standardization standardization;
  PredictOptions options;

  static SavedModel capture(const Predictor& predictor, const ModelDims& dims, const Standardization& standardization);
  Predictor predictor() const;
};

/// JSON text; doubles are written in shortest round-trip form.
void save_model(std::ostream& out, const SavedModel& model);
void save_model(const std::filesystem::path& path, const SavedModel& model);
/// Throws DataError on a different format name, a newer major version, or
/// arrays whose shapes disagree with the stored schema and dimensions.
SavedModel load_model(std::istream& in);
SavedModel load_model(const std::filesystem::path& path);

}  // namespace gplvmf
