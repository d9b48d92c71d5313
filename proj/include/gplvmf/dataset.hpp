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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace gplvmf {

enum class ContextKind { Categorical, RealValued };

struct ContextSpec {
  std::string name;
  ContextKind kind = ContextKind::Categorical;
  int cardinality = 0;  // categorical only
  int latent_dim = 0;   // kernel-space dims; 0 means "use the model default"

  bool categorical() const noexcept { return kind == ContextKind::Categorical; }
};

/// Declares the entity counts and the kind of every context column.
struct ContextSchema {
  std::vector<ContextSpec> contexts;
  int item_count = 0;
  int user_count = 0;

  std::size_t size() const noexcept { return contexts.size(); }
  /// Throws DataError on non-positive counts, bad cardinalities or duplicate names.
  void validate() const;
};

/// One rating. Categorical context entries hold integral category indices.
struct RatingRecord {
  int user = 0;
  int item = 0;
  std::vector<double> context;
  double rating = 0.0;

  int category(std::size_t d) const { return static_cast<int>(context[d]); }
  bool operator==(const RatingRecord&) const = default;
};

/// Per real-valued context column: z = (raw - mean) / scale.
/// Categorical and zero-variance columns are passed through (scaled == false).
struct Standardization {
  std::vector<double> mean;
  std::vector<double> scale;
  std::vector<bool> scaled;

  static Standardization identity(std::size_t contexts);
  /// Fits column statistics on the given rows of raw records.
  static Standardization fit(const ContextSchema& schema, std::span<const RatingRecord> raw,
                             std::span<const std::size_t> rows,
                             std::vector<std::string>* warnings = nullptr);
  static Standardization fit(const ContextSchema& schema, std::span<const RatingRecord> raw,
                             std::vector<std::string>* warnings = nullptr);

  double apply(std::size_t d, double raw) const;
  double revert(std::size_t d, double z) const;
  RatingRecord apply(RatingRecord r) const;
  RatingRecord revert(RatingRecord r) const;
};

/// Ratings with real-valued contexts stored in standardized form.
struct RatingTable {
  ContextSchema schema;
  std::vector<RatingRecord> records;
  Standardization standardization;
  std::vector<std::string> warnings;

  std::size_t size() const noexcept { return records.size(); }
  bool empty() const noexcept { return records.empty(); }
  /// Records with real-valued contexts mapped back to raw units.
  std::vector<RatingRecord> raw_records() const;
};

struct TextFormat {
  char delimiter = ',';
  /// Accept files without a rating column (query files); ratings read as 0.
  bool rating_optional = false;
};

/// Parses delimited text whose first line names the columns `user`, `item`,
/// each context by name, and `rating` (any order). Real-valued contexts are
/// standardized with statistics fitted on the loaded rows.
RatingTable load_table(const std::filesystem::path& path, const ContextSchema& schema,
                       const TextFormat& format = {});
RatingTable parse_table(std::istream& in, const ContextSchema& schema,
                        const TextFormat& format = {});

/// Writes raw (de-standardized) values with a header line; reloading
/// reproduces the table.
void write_table(std::ostream& out, const RatingTable& table, const TextFormat& format = {});
void write_table(const std::filesystem::path& path, const RatingTable& table,
                 const TextFormat& format = {});

/// Validates a record against the schema, throwing DataError with `where` as context.
void validate_record(const ContextSchema& schema, const RatingRecord& r, const std::string& where);

/// Builds a table from raw records, fitting standardization on all of them.
RatingTable make_table(const ContextSchema& schema, std::vector<RatingRecord> raw);

/// Train/test split where both halves are standardized with train-split statistics.
std::pair<RatingTable, RatingTable> split_table(const RatingTable& table,
                                                std::span<const std::size_t> train_rows,
                                                std::span<const std::size_t> test_rows);

struct UserBlock {
  int user = 0;
  std::vector<RatingRecord> rows;

  std::size_t count() const noexcept { return rows.size(); }
  Eigen::VectorXd ratings() const;
};

/// One block per user that has ratings, ordered by user index; rows keep input order.
std::vector<UserBlock> group_by_user(const RatingTable& table);

struct FoldPlan {
  int k = 0;
  std::vector<int> assignments;  // per record

  std::vector<std::size_t> test_rows(int fold) const;
  std::vector<std::size_t> train_rows(int fold) const;
  std::vector<std::size_t> fold_sizes() const;
};

/// Seeded shuffle, then round-robin assignment; fold sizes differ by at most one.
FoldPlan make_folds(std::size_t record_count, int k, std::uint64_t seed);
inline FoldPlan make_folds(const RatingTable& table, int k, std::uint64_t seed) {
  return make_folds(table.size(), k, seed);
}

}  // namespace gplvmf
