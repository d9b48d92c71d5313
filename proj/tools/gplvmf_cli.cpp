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

// Command-line front end: train, evaluate, predict, analyze-contexts, synthesize.

#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>

#include "CLI11.hpp"

#include "gplvmf/config.hpp"
#include "gplvmf/dataset.hpp"
#include "gplvmf/errors.hpp"
#include "gplvmf/harness.hpp"
#include "gplvmf/optim.hpp"
#include "gplvmf/predict.hpp"
#include "gplvmf/serialize.hpp"

using namespace gplvmf;

namespace {

// Writes to a file when a path is given, stdout otherwise.
class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw DataError("cannot write " + path);
    }
    stream().precision(std::numeric_limits<double>::max_digits10);
  }
  std::ostream& stream() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

int run_train(const std::string& config_path, const std::string& data_path, const std::string& model_path,
              const std::string& trace_path) {
  const ExperimentConfig cfg = load_config(config_path);
  const RatingTable table = load_table(data_path, cfg.schema, cfg.format);
  const auto blocks = group_by_user(table);
  std::cerr << "training on " << table.size() << " ratings from " << blocks.size() << " users ("
            << to_string(cfg.train.method) << ")\n";
  TrainResult result = train(cfg.schema, blocks, cfg.train, {});
  std::cerr << "status " << result.trace.status << ", final bound " << result.trace.entries.back().bound << '\n';
  if (!trace_path.empty()) {
    Output out(trace_path);
    result.trace.write(out.stream(), cfg.format.delimiter);
  }
  const Predictor predictor(std::move(result.state), blocks, cfg.predict_options());
  save_model(model_path, SavedModel::capture(predictor, cfg.train.dims, table.standardization));
  return 0;
}

int run_evaluate(const std::string& config_path, const std::string& data_path, std::optional<int> folds,
                 std::optional<std::uint64_t> seed, const std::string& out_path) {
  const ExperimentConfig cfg = load_config(config_path);
  const RatingTable table = load_table(data_path, cfg.schema, cfg.format);
  EvalOptions opt;
  opt.k = folds.value_or(cfg.folds);
  opt.seed = seed.value_or(cfg.fold_seed);
  opt.predict = cfg.predict_options();
  opt.predict.global_mean_fallback = true;
  const EvalResult res = evaluate_cv(table, cfg.train, opt);
  for (const auto& w : res.warnings) std::cerr << "warning: " << w << '\n';

  Output out(out_path);
  auto& os = out.stream();
  const char d = cfg.format.delimiter;
  os << "fold" << d << "status" << d << "mae" << d << "rmse" << d << "const_mae" << d << "const_rmse" << d
     << "test_ratings" << d << "train_seconds\n";
  for (const auto& f : res.folds) {
    os << f.fold << d << (f.completed ? "ok" : "failed") << d << f.model.mae << d << f.model.rmse << d
       << f.baseline.mae << d << f.baseline.rmse << d << f.test_count << d << f.train_seconds << '\n';
  }
  os << "mean" << d << res.completed() << "/" << res.folds.size() << d << res.mean.mae << d << res.mean.rmse << d
     << res.baseline_mean.mae << d << res.baseline_mean.rmse << d << d << '\n';
  os << "std" << d << d << res.stddev.mae << d << res.stddev.rmse << d << d << d << d << '\n';
  return res.completed() > 0 ? 0 : 1;
}

int run_predict(const std::string& model_path, const std::string& query_path, const std::string& out_path,
                char delimiter, bool fallback, std::optional<bool> noise) {
  const SavedModel model = load_model(model_path);
  SavedModel tuned = model;
  tuned.options.global_mean_fallback = fallback;
  if (noise) tuned.options.add_noise = *noise;
  const Predictor predictor = tuned.predictor();
  const auto& schema = model.state.schema;
  const RatingTable queries = load_table(query_path, schema, TextFormat{delimiter, true});
  const auto raw = queries.raw_records();

  Output out(out_path);
  auto& os = out.stream();
  os << "user" << delimiter << "item";
  for (const auto& c : schema.contexts) os << delimiter << c.name;
  os << delimiter << "mean" << delimiter << "variance" << delimiter << "clamped_mean\n";
  for (const auto& r : raw) {
    const Prediction p = predictor.predict(model.standardization.apply(r));
    os << r.user << delimiter << r.item;
    for (std::size_t k = 0; k < r.context.size(); ++k) {
      os << delimiter;
      if (schema.contexts[k].categorical()) {
        os << r.category(k);
      } else {
        os << r.context[k];
      }
    }
    os << delimiter << p.mean << delimiter << p.variance << delimiter << p.clamped_mean << '\n';
  }
  return 0;
}

int run_analyze(const std::string& model_path, const std::string& out_path, char delimiter) {
  const SavedModel model = load_model(model_path);
  const ContextRelevance rel = context_relevance(model.state);
  Output out(out_path);
  auto& os = out.stream();
  os << "context" << delimiter << "score" << delimiter << "share\n";
  for (const auto& e : rel.entries) os << e.name << delimiter << e.score << delimiter << e.share << '\n';
  return 0;
}

int run_synthesize(const std::string& spec_path, const std::string& out_path, const std::string& truth_path,
                   const std::string& schema_path, char delimiter) {
  const SyntheticSpec spec = load_synthetic_spec(spec_path);
  const SyntheticData data = synthesize(spec);
  write_table(out_path, data.table, TextFormat{delimiter});
  if (!schema_path.empty()) {
    Output out(schema_path);
    out.stream() << dump_schema(data.table.schema) << '\n';
  }
  if (!truth_path.empty()) {
    SavedModel truth;
    truth.dims.item_dim = spec.item_dim;
    truth.dims.bias_dim = spec.bias_dim;
    truth.dims.inducing = static_cast<int>(data.truth.inducing_count());
    truth.dims.use_mean = spec.use_mean;
    truth.state = data.truth;
    truth.standardization = data.table.standardization;
    save_model(truth_path, truth);
  }
  std::cerr << "wrote " << data.table.size() << " ratings to " << out_path << '\n';
  return 0;
}

char delimiter_of(const std::string& s) {
  if (s == "\\t" || s == "tab") return '\t';
  if (s.size() != 1) throw ConfigError("delimiter must be a single character");
  return s[0];
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian-process latent variable factorization for context-aware ratings"};
  app.require_subcommand(1);

  std::string config, data, model, trace, out, queries, spec, truth, schema, delim = ",";
  std::optional<int> folds;
  std::optional<std::uint64_t> seed;
  bool fallback = false;
  std::optional<bool> noise;

  auto* train_cmd = app.add_subcommand("train", "fit a model and save it");
  train_cmd->add_option("-c,--config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("-d,--data", data, "ratings file")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("-m,--model", model, "output model file")->required();
  train_cmd->add_option("--trace", trace, "write the per-iteration trace here");

  auto* eval_cmd = app.add_subcommand("evaluate", "k-fold cross-validation");
  eval_cmd->add_option("-c,--config", config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("-d,--data", data, "ratings file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("-k,--folds", folds, "fold count (overrides the config)");
  eval_cmd->add_option("--seed", seed, "fold seed (overrides the config)");
  eval_cmd->add_option("-o,--out", out, "result table (stdout by default)");

  auto* pred_cmd = app.add_subcommand("predict", "predict ratings for query rows");
  pred_cmd->add_option("-m,--model", model, "model file")->required()->check(CLI::ExistingFile);
  pred_cmd->add_option("-q,--queries", queries, "query rows: user, item, contexts")->required()->check(CLI::ExistingFile);
  pred_cmd->add_option("-o,--out", out, "output file (stdout by default)");
  pred_cmd->add_option("--delimiter", delim, "field delimiter");
  pred_cmd->add_flag("--fallback", fallback, "answer unknown users with the global mean");
  pred_cmd->add_flag("--noise,!--no-noise", noise, "add observation noise to the variance");

  auto* rel_cmd = app.add_subcommand("analyze-contexts", "context relevance from inverse length scales");
  rel_cmd->add_option("-m,--model", model, "model file")->required()->check(CLI::ExistingFile);
  rel_cmd->add_option("-o,--out", out, "output file (stdout by default)");
  rel_cmd->add_option("--delimiter", delim, "field delimiter");

  auto* syn_cmd = app.add_subcommand("synthesize", "sample a dataset from the generative model");
  syn_cmd->add_option("-s,--spec", spec, "synthetic spec (JSON)")->required()->check(CLI::ExistingFile);
  syn_cmd->add_option("-o,--out", out, "ratings file")->required();
  syn_cmd->add_option("--truth", truth, "write the generating parameters as a model file");
  syn_cmd->add_option("--schema", schema, "write the schema JSON");
  syn_cmd->add_option("--delimiter", delim, "field delimiter");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train_cmd) return run_train(config, data, model, trace);
    if (*eval_cmd) return run_evaluate(config, data, folds, seed, out);
    if (*pred_cmd) return run_predict(model, queries, out, delimiter_of(delim), fallback, noise);
    if (*rel_cmd) return run_analyze(model, out, delimiter_of(delim));
    if (*syn_cmd) return run_synthesize(spec, out, truth, schema, delimiter_of(delim));
  } catch (const UnknownUserError& e) {
    std::cerr << "error: " << e.what() << " (use --fallback to answer with the global mean)\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
