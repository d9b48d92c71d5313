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

#include <stdexcept>
#include <string>

namespace gplvmf {

/// Malformed or out-of-range input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration values or files.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Factorization failure or non-finite values during evaluation.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Prediction requested for a user that has no training ratings.
class UnknownUserError : public std::runtime_error {
 public:
  explicit UnknownUserError(int user)
      : std::runtime_error("unknown user " + std::to_string(user) +
                           " (no training ratings; cold-start is not modelled)"),
        user_(user) {}
  int user() const noexcept { return user_; }

 private:
  int user_;
};

}  // namespace gplvmf
