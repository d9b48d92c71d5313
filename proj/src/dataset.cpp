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

#include "gplvmf/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "gplvmf/errors.hpp"

namespace gplvmf {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(delim, start);
    out.push_back(trim(std::string_view(line).substr(start, pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

bool parse_index(const std::string& s, int& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec == std::errc() && ptr == s.data() + s.size()) return true;
  // tolerate "3.0" style indices written by numeric tools
  double v = 0.0;
  if (!parse_double(s, v) || v != std::floor(v) || std::abs(v) > 1e9) return false;
  out = static_cast<int>(v);
  return true;
}

}  // namespace

void ContextSchema::validate() const {
  if (user_count <= 0) throw DataError("schema: user count must be positive");
  if (item_count <= 0) throw DataError("schema: item count must be positive");
  std::set<std::string> names;
  for (const auto& c : contexts) {
    if (c.name.empty()) throw DataError("schema: context with empty name");
    if (!names.insert(c.name).second) throw DataError("schema: duplicate context name '" + c.name + "'");
    if (c.name == "user" || c.name == "item" || c.name == "rating")
      throw DataError("schema: context name '" + c.name + "' is reserved");
    if (c.categorical() && c.cardinality < 1)
      throw DataError("schema: categorical context '" + c.name + "' needs cardinality >= 1");
    if (c.latent_dim < 0) throw DataError("schema: negative latent_dim for '" + c.name + "'");
  }
}

Standardization Standardization::identity(std::size_t contexts) {
  Standardization s;
  s.mean.assign(contexts, 0.0);
  s.scale.assign(contexts, 1.0);
  s.scaled.assign(contexts, false);
  return s;
}

Standardization Standardization::fit(const ContextSchema& schema, std::span<const RatingRecord> raw,
                                     std::span<const std::size_t> rows,
                                     std::vector<std::string>* warnings) {
  const auto d_count = schema.size();
  auto s = identity(d_count);
  for (std::size_t d = 0; d < d_count; ++d) {
    const auto& ctx = schema.contexts[d];
    if (ctx.categorical() || rows.empty()) continue;
    double mean = 0.0;
    for (auto r : rows) mean += raw[r].context[d];
    mean /= static_cast<double>(rows.size());
    double var = 0.0;
    for (auto r : rows) {
      const double dev = raw[r].context[d] - mean;
      var += dev * dev;
    }
    var /= static_cast<double>(rows.size());
    if (var > 0.0 && std::isfinite(var)) {
      s.mean[d] = mean;
      s.scale[d] = std::sqrt(var);
      s.scaled[d] = true;
    } else if (warnings) {
      warnings->push_back("real-valued context '" + ctx.name +
                          "' is constant; passed through unscaled");
    }
  }
  return s;
}

Standardization Standardization::fit(const ContextSchema& schema, std::span<const RatingRecord> raw,
                                     std::vector<std::string>* warnings) {
  std::vector<std::size_t> rows(raw.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return fit(schema, raw, rows, warnings);
}

double Standardization::apply(std::size_t d, double raw) const {
  return scaled[d] ? (raw - mean[d]) / scale[d] : raw;
}

double Standardization::revert(std::size_t d, double z) const {
  return scaled[d] ? z * scale[d] + mean[d] : z;
}

RatingRecord Standardization::apply(RatingRecord r) const {
  for (std::size_t d = 0; d < r.context.size(); ++d) r.context[d] = apply(d, r.context[d]);
  return r;
}

RatingRecord Standardization::revert(RatingRecord r) const {
  for (std::size_t d = 0; d < r.context.size(); ++d) r.context[d] = revert(d, r.context[d]);
  return r;
}

std::vector<RatingRecord> RatingTable::raw_records() const {
  std::vector<RatingRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(standardization.revert(r));
  return out;
}

void validate_record(const ContextSchema& schema, const RatingRecord& r, const std::string& where) {
  if (r.user < 0 || r.user >= schema.user_count)
    throw DataError(where + ": user index " + std::to_string(r.user) + " out of range [0, " +
                    std::to_string(schema.user_count) + ")");
  if (r.item < 0 || r.item >= schema.item_count)
    throw DataError(where + ": item index " + std::to_string(r.item) + " out of range [0, " +
                    std::to_string(schema.item_count) + ")");
  if (r.context.size() != schema.size())
    throw DataError(where + ": expected " + std::to_string(schema.size()) + " context values, got " +
                    std::to_string(r.context.size()));
  for (std::size_t d = 0; d < schema.size(); ++d) {
    const auto& ctx = schema.contexts[d];
    const double v = r.context[d];
    if (!std::isfinite(v)) throw DataError(where + ": non-finite value for context '" + ctx.name + "'");
    if (ctx.categorical() && (v != std::floor(v) || v < 0 || v >= ctx.cardinality))
      throw DataError(where + ": category " + std::to_string(v) + " of context '" + ctx.name +
                      "' out of range [0, " + std::to_string(ctx.cardinality) + ")");
  }
  if (!std::isfinite(r.rating)) throw DataError(where + ": non-finite rating");
}

RatingTable make_table(const ContextSchema& schema, std::vector<RatingRecord> raw) {
  schema.validate();
  if (raw.empty()) throw DataError("no records");
  for (std::size_t i = 0; i < raw.size(); ++i)
    validate_record(schema, raw[i], "record " + std::to_string(i));
  RatingTable table;
  table.schema = schema;
  table.standardization = Standardization::fit(schema, raw, &table.warnings);
  table.records.reserve(raw.size());
  for (auto& r : raw) table.records.push_back(table.standardization.apply(std::move(r)));
  return table;
}

RatingTable parse_table(std::istream& in, const ContextSchema& schema, const TextFormat& format) {
  schema.validate();
  std::string line;
  std::size_t line_no = 0;
  // header: first non-blank line
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) {
      header = split(line, format.delimiter);
      break;
    }
  }
  if (header.empty()) throw DataError("no records");

  const std::size_t d_count = schema.size();
  const bool has_rating =
      !format.rating_optional || std::find(header.begin(), header.end(), "rating") != header.end();
  const std::size_t expected = (has_rating ? 3 : 2) + d_count;
  if (header.size() != expected)
    throw DataError("line " + std::to_string(line_no) + ": header has " +
                    std::to_string(header.size()) + " columns, expected " + std::to_string(expected));
  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (!column.emplace(header[i], i).second)
      throw DataError("line " + std::to_string(line_no) + ": duplicate column '" + header[i] + "'");
  }
  auto col = [&](const std::string& name) {
    auto it = column.find(name);
    if (it == column.end())
      throw DataError("line " + std::to_string(line_no) + ": header lacks column '" + name + "'");
    return it->second;
  };
  const std::size_t user_col = col("user");
  const std::size_t item_col = col("item");
  const std::size_t rating_col = has_rating ? col("rating") : 0;
  std::vector<std::size_t> ctx_col(d_count);
  for (std::size_t d = 0; d < d_count; ++d) ctx_col[d] = col(schema.contexts[d].name);

  std::vector<RatingRecord> raw;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto where = "line " + std::to_string(line_no);
    const auto fields = split(line, format.delimiter);
    if (fields.size() != expected)
      throw DataError(where + ": malformed row with " + std::to_string(fields.size()) +
                      " fields, expected " + std::to_string(expected));
    RatingRecord r;
    if (!parse_index(fields[user_col], r.user))
      throw DataError(where + ": user '" + fields[user_col] + "' is not an integer index");
    if (!parse_index(fields[item_col], r.item))
      throw DataError(where + ": item '" + fields[item_col] + "' is not an integer index");
    if (has_rating && !parse_double(fields[rating_col], r.rating))
      throw DataError(where + ": non-numeric rating '" + fields[rating_col] + "'");
    r.context.resize(d_count);
    for (std::size_t d = 0; d < d_count; ++d) {
      const auto& text = fields[ctx_col[d]];
      if (schema.contexts[d].categorical()) {
        int c = 0;
        if (!parse_index(text, c))
          throw DataError(where + ": context '" + schema.contexts[d].name + "' value '" + text +
                          "' is not a category index");
        r.context[d] = c;
      } else if (!parse_double(text, r.context[d])) {
        throw DataError(where + ": context '" + schema.contexts[d].name + "' value '" + text +
                        "' is not numeric");
      }
    }
    validate_record(schema, r, where);
    raw.push_back(std::move(r));
  }
  if (raw.empty()) throw DataError("no records");
  return make_table(schema, std::move(raw));
}

RatingTable load_table(const std::filesystem::path& path, const ContextSchema& schema,
                       const TextFormat& format) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  auto table = parse_table(in, schema, format);
  for (const auto& w : table.warnings) std::cerr << "warning: " << w << '\n';
  return table;
}

void write_table(std::ostream& out, const RatingTable& table, const TextFormat& format) {
  const char sep = format.delimiter;
  out << "user" << sep << "item";
  for (const auto& c : table.schema.contexts) out << sep << c.name;
  out << sep << "rating\n";
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& rec : table.records) {
    const auto r = table.standardization.revert(rec);
    out << r.user << sep << r.item;
    for (std::size_t d = 0; d < r.context.size(); ++d) {
      if (table.schema.contexts[d].categorical())
        out << sep << r.category(d);
      else
        out << sep << r.context[d];
    }
    out << sep << r.rating << '\n';
  }
}

void write_table(const std::filesystem::path& path, const RatingTable& table, const TextFormat& format) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  write_table(out, table, format);
}

std::pair<RatingTable, RatingTable> split_table(const RatingTable& table,
                                                std::span<const std::size_t> train_rows,
                                                std::span<const std::size_t> test_rows) {
  const auto raw = table.raw_records();
  RatingTable train;
  RatingTable test;
  train.schema = test.schema = table.schema;
  train.standardization = Standardization::fit(table.schema, raw, train_rows, &train.warnings);
  test.standardization = train.standardization;
  for (auto r : train_rows) train.records.push_back(train.standardization.apply(raw.at(r)));
  for (auto r : test_rows) test.records.push_back(test.standardization.apply(raw.at(r)));
  return {std::move(train), std::move(test)};
}

Eigen::VectorXd UserBlock::ratings() const {
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t t = 0; t < rows.size(); ++t) y(static_cast<Eigen::Index>(t)) = rows[t].rating;
  return y;
}

std::vector<UserBlock> group_by_user(const RatingTable& table) {
  std::map<int, std::size_t> slot;
  std::vector<UserBlock> blocks;
  for (const auto& r : table.records) {
    auto [it, inserted] = slot.emplace(r.user, blocks.size());
    if (inserted) blocks.push_back(UserBlock{r.user, {}});
    blocks[it->second].rows.push_back(r);
  }
  std::sort(blocks.begin(), blocks.end(),
            [](const UserBlock& a, const UserBlock& b) { return a.user < b.user; });
  return blocks;
}

std::vector<std::size_t> FoldPlan::test_rows(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignments.size(); ++i)
    if (assignments[i] == fold) out.push_back(i);
  return out;
}

std::vector<std::size_t> FoldPlan::train_rows(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignments.size(); ++i)
    if (assignments[i] != fold) out.push_back(i);
  return out;
}

std::vector<std::size_t> FoldPlan::fold_sizes() const {
  std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
  for (int a : assignments) ++sizes[static_cast<std::size_t>(a)];
  return sizes;
}

FoldPlan make_folds(std::size_t record_count, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("fold count must be at least 2");
  if (static_cast<std::size_t>(k) > record_count)
    throw DataError("fold count " + std::to_string(k) + " exceeds record count " +
                    std::to_string(record_count));
  std::vector<std::size_t> order(record_count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  // explicit Fisher-Yates: std::shuffle output differs between standard libraries
  for (std::size_t i = record_count; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  FoldPlan plan;
  plan.k = k;
  plan.assignments.assign(record_count, 0);
  for (std::size_t pos = 0; pos < record_count; ++pos)
    plan.assignments[order[pos]] = static_cast<int>(pos % static_cast<std::size_t>(k));
  return plan;
}

}  // namespace gplvmf
