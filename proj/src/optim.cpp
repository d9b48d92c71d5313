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

#include "gplvmf/optim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>
#include <set>

#include "gplvmf/errors.hpp"
#include "gplvmf/scg.hpp"

namespace gplvmf {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

// Entities a block touches, deduplicated.
struct Touched {
  std::vector<int> items;
  std::vector<std::vector<int>> categories;  // per context
};

Touched touched_by(const UserBlock& block, const ContextSchema& schema) {
  std::set<int> items;
  std::vector<std::set<int>> cats(schema.size());
  for (const auto& r : block.rows) {
    items.insert(r.item);
    for (std::size_t d = 0; d < schema.size(); ++d)
      if (schema.contexts[d].categorical()) cats[d].insert(r.category(d));
  }
  Touched t;
  t.items.assign(items.begin(), items.end());
  t.categories.resize(schema.size());
  for (std::size_t d = 0; d < schema.size(); ++d) t.categories[d].assign(cats[d].begin(), cats[d].end());
  return t;
}

void seed_latents(EntityLatents& e, const std::vector<bool>& seen, double scale, double variance,
                  std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (Eigen::Index i = 0; i < e.count(); ++i) {
    for (Eigen::Index q = 0; q < e.dim(); ++q) {
      const double draw = normal(rng);
      const bool s = seen[static_cast<std::size_t>(i)];
      e.mean(i, q) = s ? scale * draw : 0.0;
      e.variance(i, q) = s ? variance : 1.0;
    }
  }
}

// Ascent step on one entity row; log-variance parameterization.
void step_row(EntityLatents& e, EntityLatents& g, Eigen::Index row, double lr) {
  e.mean.row(row) += lr * g.mean.row(row);
  e.variance.row(row).array() *= (lr * g.variance.row(row).array()).exp();
  g.mean.row(row).setZero();
  g.variance.row(row).setZero();
}

}  // namespace

std::string to_string(Method method) { return method == Method::SGD ? "sgd" : "scg"; }

Method parse_method(const std::string& name) {
  if (name == "sgd" || name == "SGD") return Method::SGD;
  if (name == "scg" || name == "SCG") return Method::SCG;
  throw ConfigError("unknown optimizer '" + name + "' (expected sgd or scg)");
}

void TrainConfig::validate() const {
  if (iterations < 1) throw ConfigError("iterations/epochs must be >= 1");
  if (!(learning_rate >= 0.0)) throw ConfigError("learning rate must be non-negative");
  if (method == Method::SGD && learning_rate < 0.0) throw ConfigError("learning rate must be > 0");
  if (!(lr_decay > 0.0)) throw ConfigError("lr_decay must be positive");
  if (dims.inducing < 1) throw ConfigError("inducing point count must be >= 1");
  if (dims.item_dim < 1 || dims.context_dim < 1 || dims.bias_dim < 1)
    throw ConfigError("latent dimensions must be >= 1");
  if (!(init_variance > 0.0)) throw ConfigError("init_variance must be positive");
  if (patience < 1) throw ConfigError("patience must be >= 1");
  if (!(clip_norm > 0.0)) throw ConfigError("clip_norm must be positive");
}

void TrainTrace::write(std::ostream& out, char delimiter) const {
  out << "iteration" << delimiter << "bound" << delimiter << "mae" << delimiter << "rmse" << delimiter
      << "seconds\n";
  for (const auto& e : entries) {
    out << e.iteration << delimiter << e.bound << delimiter;
    if (e.mae) out << *e.mae;
    out << delimiter;
    if (e.rmse) out << *e.rmse;
    out << delimiter << e.seconds << '\n';
  }
}

VariationalState init_state(const ContextSchema& schema, const std::vector<UserBlock>& blocks,
                            const TrainConfig& config, std::uint64_t seed) {
  config.validate();
  schema.validate();
  VariationalState s = VariationalState::zeros(schema, config.dims);
  std::mt19937_64 rng(seed);

  std::vector<bool> item_seen(static_cast<std::size_t>(schema.item_count), false);
  std::vector<std::vector<bool>> cat_seen(schema.size());
  for (std::size_t d = 0; d < schema.size(); ++d)
    cat_seen[d].assign(static_cast<std::size_t>(std::max(0, schema.contexts[d].cardinality)), false);
  double rating_sum = 0.0;
  std::size_t rating_count = 0;
  for (const auto& b : blocks) {
    for (const auto& r : b.rows) {
      item_seen[static_cast<std::size_t>(r.item)] = true;
      for (std::size_t d = 0; d < schema.size(); ++d)
        if (schema.contexts[d].categorical()) cat_seen[d][static_cast<std::size_t>(r.category(d))] = true;
      rating_sum += r.rating;
      ++rating_count;
    }
  }

  seed_latents(s.item, item_seen, config.init_mean_scale, config.init_variance, rng);
  for (std::size_t d = 0; d < schema.size(); ++d)
    if (schema.contexts[d].categorical())
      seed_latents(s.context[d], cat_seen[d], config.init_mean_scale, config.init_variance, rng);
  seed_latents(s.bias.item, item_seen, config.init_mean_scale, config.init_variance, rng);
  for (std::size_t d = 0; d < schema.size(); ++d)
    if (schema.contexts[d].categorical())
      seed_latents(s.bias.context[d], cat_seen[d], config.init_mean_scale, config.init_variance, rng);

  const double global_mean = rating_count > 0 ? rating_sum / static_cast<double>(rating_count) : 0.0;
  s.bias.user_bias.setConstant(config.dims.use_mean ? global_mean : 0.0);
  if (config.dims.use_mean)
    for (const auto& b : blocks) s.bias.user_bias(b.user) = b.ratings().mean();
  s.signal_variance.setOnes();
  s.noise_precision.setOnes();
  s.inverse_length_scales.setConstant(1.0 / static_cast<double>(s.layout.dim));

  // inducing inputs: latent means of randomly chosen training rows, plus jitter
  std::vector<std::pair<std::size_t, std::size_t>> rows;
  for (std::size_t b = 0; b < blocks.size(); ++b)
    for (std::size_t t = 0; t < blocks[b].count(); ++t) rows.emplace_back(b, t);
  std::normal_distribution<double> normal(0.0, 1.0);
  if (!rows.empty()) {
    std::vector<std::size_t> order(rows.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    for (Eigen::Index j = 0; j < s.inducing.rows(); ++j) {
      const auto [b, t] = rows[order[static_cast<std::size_t>(j) % order.size()]];
      UserBlock one{blocks[b].user, {blocks[b].rows[t]}};
      const LatentPoints p = gather_points(s, one);
      for (Eigen::Index q = 0; q < s.inducing.cols(); ++q)
        s.inducing(j, q) = p.mean(0, q) + config.inducing_jitter * normal(rng);
    }
  } else {
    for (Eigen::Index i = 0; i < s.inducing.size(); ++i) s.inducing.data()[i] = normal(rng);
  }
  return s;
}

std::vector<std::size_t> sgd_visit_order(std::size_t block_count, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> order(block_count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(epoch) + 1);
  for (std::size_t i = block_count; i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
  return order;
}

double sgd_epoch(const std::vector<UserBlock>& blocks, VariationalState& state, const TrainConfig& config,
                 int epoch) {
  const auto& schema = state.schema;
  const bool use_mean = state.layout.use_mean;

  // number of users touching each entity
  std::vector<Touched> touched;
  touched.reserve(blocks.size());
  Eigen::VectorXd item_users = Eigen::VectorXd::Zero(schema.item_count);
  std::vector<Eigen::VectorXd> cat_users(schema.size());
  for (std::size_t d = 0; d < schema.size(); ++d)
    cat_users[d] = Eigen::VectorXd::Zero(std::max(0, schema.contexts[d].cardinality));
  for (const auto& b : blocks) {
    touched.push_back(touched_by(b, schema));
    for (int i : touched.back().items) item_users(i) += 1.0;
    for (std::size_t d = 0; d < schema.size(); ++d)
      for (int c : touched.back().categories[d]) cat_users[d](c) += 1.0;
  }

  const double lr = config.learning_rate * std::pow(config.lr_decay, epoch);
  VariationalState grad = state.zeros_like();
  double fitted = 0.0;

  for (std::size_t idx : sgd_visit_order(blocks.size(), config.seed, epoch)) {
    const auto& block = blocks[idx];
    const auto& tch = touched[idx];
    const int user = block.user;
    fitted += user_bound(block, state, config.elbo, grad);

    auto kl_share = [](const EntityLatents& e, EntityLatents& g, Eigen::Index row, double w) {
      g.mean.row(row) -= w * e.mean.row(row);
      g.variance.row(row).array() -= w * 0.5 * (e.variance.row(row).array() - 1.0);
    };
    double sq = grad.inducing.squaredNorm() + grad.inverse_length_scales.squaredNorm() +
                grad.bias.real_weight.squaredNorm();
    sq += grad.signal_variance(user) * grad.signal_variance(user) +
          grad.noise_precision(user) * grad.noise_precision(user) +
          grad.bias.user_bias(user) * grad.bias.user_bias(user);
    for (int i : tch.items) {
      const double w = 1.0 / item_users(i);
      kl_share(state.item, grad.item, i, w);
      sq += grad.item.mean.row(i).squaredNorm() + grad.item.variance.row(i).squaredNorm();
      if (use_mean) {
        kl_share(state.bias.item, grad.bias.item, i, w);
        sq += grad.bias.item.mean.row(i).squaredNorm() + grad.bias.item.variance.row(i).squaredNorm();
      }
    }
    for (std::size_t d = 0; d < schema.size(); ++d) {
      for (int c : tch.categories[d]) {
        const double w = 1.0 / cat_users[d](c);
        kl_share(state.context[d], grad.context[d], c, w);
        sq += grad.context[d].mean.row(c).squaredNorm() + grad.context[d].variance.row(c).squaredNorm();
        if (use_mean) {
          kl_share(state.bias.context[d], grad.bias.context[d], c, w);
          sq += grad.bias.context[d].mean.row(c).squaredNorm() +
                grad.bias.context[d].variance.row(c).squaredNorm();
        }
      }
    }
    if (!std::isfinite(sq)) {
      std::string where = "unknown block";
      const Eigen::VectorXd flat = pack_raw(grad);
      for (Eigen::Index i = 0; i < flat.size(); ++i)
        if (!std::isfinite(flat(i))) {
          where = parameter_name(state, i);
          break;
        }
      throw NumericalError("SGD: non-finite gradient for user " + std::to_string(user) + " at " + where);
    }
    const double norm = std::sqrt(sq);
    const double eta = lr * (norm > config.clip_norm ? config.clip_norm / norm : 1.0);

    state.inducing += eta * grad.inducing;
    grad.inducing.setZero();
    state.inverse_length_scales.array() *= (eta * grad.inverse_length_scales.array()).exp();
    grad.inverse_length_scales.setZero();
    state.bias.real_weight += eta * grad.bias.real_weight;
    grad.bias.real_weight.setZero();
    state.signal_variance(user) *= std::exp(eta * grad.signal_variance(user));
    state.noise_precision(user) *= std::exp(eta * grad.noise_precision(user));
    state.bias.user_bias(user) += eta * grad.bias.user_bias(user);
    grad.signal_variance(user) = grad.noise_precision(user) = grad.bias.user_bias(user) = 0.0;
    for (int i : tch.items) {
      step_row(state.item, grad.item, i, eta);
      step_row(state.bias.item, grad.bias.item, i, eta);
    }
    for (std::size_t d = 0; d < schema.size(); ++d)
      for (int c : tch.categories[d]) {
        step_row(state.context[d], grad.context[d], c, eta);
        step_row(state.bias.context[d], grad.bias.context[d], c, eta);
      }
  }
  return fitted - kl_to_prior(state);
}

namespace {

// Tracks the best validation MAE and decides when to stop.
struct EarlyStop {
  int patience;
  double best = std::numeric_limits<double>::infinity();
  int since_best = 0;
  std::optional<VariationalState> best_state;

  bool update(double mae, const VariationalState& s) {
    if (mae < best) {
      best = mae;
      since_best = 0;
      best_state = s;
      return true;
    }
    return ++since_best < patience;
  }
};

}  // namespace

TrainResult scg_run(const std::vector<UserBlock>& blocks, VariationalState state, const TrainConfig& config,
                    const Validator& validator) {
  const auto start = Clock::now();
  VariationalState work = state;
  auto objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    unpack(x, work);
    const BoundReport rep = total_bound(blocks, work, config.elbo, true);
    g = -rep.gradient;
    return -rep.total;
  };
  TrainResult result;
  EarlyStop stop{config.patience};
  bool early = false;
  auto callback = [&](int it, const Eigen::VectorXd& x, double f, bool accepted) {
    TraceEntry e;
    e.iteration = it;
    e.bound = -f;
    e.accepted = accepted;
    bool keep_going = true;
    if (validator) {
      VariationalState s = state;
      unpack(x, s);
      const auto [mae, rmse] = validator(s);
      e.mae = mae;
      e.rmse = rmse;
      keep_going = stop.update(mae, s);
      early = !keep_going;
    }
    e.seconds = seconds_since(start);
    result.trace.entries.push_back(e);
    return keep_going;
  };
  ScgOptions opt;
  opt.max_iterations = config.iterations;
  opt.gradient_tolerance = config.tolerance;
  opt.f_tolerance = config.tolerance * 1e-3;
  const ScgResult r = scg_minimize(objective, pack(state), opt, callback);
  unpack(r.x, state);
  result.trace.status = early ? "early-stop" : to_string(r.status);
  result.state = stop.best_state ? std::move(*stop.best_state) : std::move(state);
  return result;
}

TrainResult sgd_run(const std::vector<UserBlock>& blocks, VariationalState state, const TrainConfig& config,
                    const Validator& validator) {
  const auto start = Clock::now();
  TrainResult result;
  EarlyStop stop{config.patience};
  result.trace.status = "max-iterations";
  for (int epoch = 0; epoch < config.iterations; ++epoch) {
    TraceEntry e;
    e.iteration = epoch + 1;
    e.bound = sgd_epoch(blocks, state, config, epoch);
    bool keep_going = true;
    if (validator) {
      const auto [mae, rmse] = validator(state);
      e.mae = mae;
      e.rmse = rmse;
      keep_going = stop.update(mae, state);
    }
    e.seconds = seconds_since(start);
    result.trace.entries.push_back(e);
    if (!keep_going) {
      result.trace.status = "early-stop";
      break;
    }
  }
  result.state = stop.best_state ? std::move(*stop.best_state) : std::move(state);
  return result;
}

TrainResult train(const ContextSchema& schema, const std::vector<UserBlock>& blocks,
                  const TrainConfig& config, const Validator& validator) {
  if (blocks.empty()) throw DataError("no training ratings");
  VariationalState state = init_state(schema, blocks, config, config.seed);
  return config.method == Method::SGD ? sgd_run(blocks, std::move(state), config, validator)
                                      : scg_run(blocks, std::move(state), config, validator);
}

}  // namespace gplvmf
