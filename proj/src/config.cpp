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

#include "gplvmf/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "gplvmf/errors.hpp"

namespace gplvmf {

namespace {

using nlohmann::json;

void expect_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items())
    if (!ok.count(key)) throw ConfigError(where + ": unknown key '" + key + "'");
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

template <class T>
T require(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing '" + key + "'");
  T out{};
  read(j, key, out, where);
  return out;
}

ContextKind parse_kind(const std::string& s, const std::string& where) {
  if (s == "categorical") return ContextKind::Categorical;
  if (s == "real") return ContextKind::RealValued;
  throw ConfigError(where + ": kind must be 'categorical' or 'real', got '" + s + "'");
}

const char* kind_name(ContextKind k) { return k == ContextKind::Categorical ? "categorical" : "real"; }

ContextSchema schema_from(const json& j) {
  expect_keys(j, "schema", {"users", "items", "contexts"});
  ContextSchema s;
  s.user_count = require<int>(j, "users", "schema");
  s.item_count = require<int>(j, "items", "schema");
  if (j.contains("contexts")) {
    if (!j["contexts"].is_array()) throw ConfigError("schema.contexts: expected an array");
    for (const auto& c : j["contexts"]) {
      const std::string where = "schema.contexts[" + std::to_string(s.contexts.size()) + "]";
      expect_keys(c, where, {"name", "kind", "cardinality", "latent_dim"});
      ContextSpec spec;
      spec.name = require<std::string>(c, "name", where);
      spec.kind = parse_kind(require<std::string>(c, "kind", where), where);
      read(c, "cardinality", spec.cardinality, where);
      read(c, "latent_dim", spec.latent_dim, where);
      s.contexts.push_back(spec);
    }
  }
  try {
    s.validate();
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  return s;
}

json schema_to(const ContextSchema& s) {
  json ctx = json::array();
  for (const auto& c : s.contexts) {
    json e = {{"name", c.name}, {"kind", kind_name(c.kind)}};
    if (c.categorical()) e["cardinality"] = c.cardinality;
    if (c.latent_dim > 0) e["latent_dim"] = c.latent_dim;
    ctx.push_back(e);
  }
  return {{"users", s.user_count}, {"items", s.item_count}, {"contexts", ctx}};
}

char parse_delimiter(const std::string& s) {
  if (s == "\\t" || s == "tab") return '\t';
  if (s.size() != 1) throw ConfigError("data.delimiter must be a single character");
  return s[0];
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(what + ": " + e.what());
  }
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

void ExperimentConfig::validate() const {
  try {
    schema.validate();
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
  train.validate();
  if (scale.min > scale.max) throw ConfigError("rating_scale: min exceeds max");
  if (folds < 2) throw ConfigError("evaluation.folds must be at least 2");
}

PredictOptions ExperimentConfig::predict_options() const {
  PredictOptions o;
  o.scale = scale;
  o.add_noise = add_noise;
  o.elbo = train.elbo;
  return o;
}

ExperimentConfig parse_config(const std::string& json_text) {
  const json j = parse_json(json_text, "config");
  expect_keys(j, "config", {"schema", "data", "rating_scale", "model", "train", "evaluation", "predict"});
  ExperimentConfig c;
  if (!j.contains("schema")) throw ConfigError("config: missing 'schema'");
  c.schema = schema_from(j["schema"]);

  if (j.contains("data")) {
    const auto& d = j["data"];
    expect_keys(d, "data", {"delimiter"});
    if (d.contains("delimiter")) c.format.delimiter = parse_delimiter(require<std::string>(d, "delimiter", "data"));
  }
  if (j.contains("rating_scale")) {
    const auto& r = j["rating_scale"];
    if (!r.is_array() || r.size() != 2 || !r[0].is_number() || !r[1].is_number())
      throw ConfigError("rating_scale: expected [min, max]");
    c.scale = {r[0].get<double>(), r[1].get<double>()};
  }
  if (j.contains("model")) {
    const auto& m = j["model"];
    expect_keys(m, "model", {"item_dim", "context_dim", "bias_dim", "inducing", "use_mean"});
    auto& dims = c.train.dims;
    read(m, "item_dim", dims.item_dim, "model");
    read(m, "context_dim", dims.context_dim, "model");
    read(m, "bias_dim", dims.bias_dim, "model");
    read(m, "inducing", dims.inducing, "model");
    read(m, "use_mean", dims.use_mean, "model");
  }
  if (j.contains("train")) {
    const auto& t = j["train"];
    expect_keys(t, "train",
                {"method", "iterations", "learning_rate", "lr_decay", "seed", "init_mean_scale", "init_variance",
                 "inducing_jitter", "tolerance", "patience", "clip_norm", "jitter", "threads"});
    auto& tr = c.train;
    if (t.contains("method")) tr.method = parse_method(require<std::string>(t, "method", "train"));
    read(t, "iterations", tr.iterations, "train");
    read(t, "learning_rate", tr.learning_rate, "train");
    read(t, "lr_decay", tr.lr_decay, "train");
    read(t, "seed", tr.seed, "train");
    read(t, "init_mean_scale", tr.init_mean_scale, "train");
    read(t, "init_variance", tr.init_variance, "train");
    read(t, "inducing_jitter", tr.inducing_jitter, "train");
    read(t, "tolerance", tr.tolerance, "train");
    read(t, "patience", tr.patience, "train");
    read(t, "clip_norm", tr.clip_norm, "train");
    read(t, "jitter", tr.elbo.jitter, "train");
    read(t, "threads", tr.elbo.threads, "train");
  }
  if (j.contains("evaluation")) {
    const auto& e = j["evaluation"];
    expect_keys(e, "evaluation", {"folds", "seed"});
    read(e, "folds", c.folds, "evaluation");
    read(e, "seed", c.fold_seed, "evaluation");
  }
  if (j.contains("predict")) {
    const auto& p = j["predict"];
    expect_keys(p, "predict", {"add_noise"});
    read(p, "add_noise", c.add_noise, "predict");
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) { return parse_config(slurp(path)); }

std::string dump_schema(const ContextSchema& schema) { return schema_to(schema).dump(2); }

std::string dump_config(const ExperimentConfig& c) {
  const auto& t = c.train;
  json j = {
      {"schema", schema_to(c.schema)},
      {"data", {{"delimiter", c.format.delimiter == '\t' ? std::string("\\t") : std::string(1, c.format.delimiter)}}},
      {"rating_scale", {c.scale.min, c.scale.max}},
      {"model",
       {{"item_dim", t.dims.item_dim},
        {"context_dim", t.dims.context_dim},
        {"bias_dim", t.dims.bias_dim},
        {"inducing", t.dims.inducing},
        {"use_mean", t.dims.use_mean}}},
      {"train",
       {{"method", to_string(t.method)},
        {"iterations", t.iterations},
        {"learning_rate", t.learning_rate},
        {"lr_decay", t.lr_decay},
        {"seed", t.seed},
        {"init_mean_scale", t.init_mean_scale},
        {"init_variance", t.init_variance},
        {"inducing_jitter", t.inducing_jitter},
        {"tolerance", t.tolerance},
        {"patience", t.patience},
        {"clip_norm", t.clip_norm},
        {"jitter", t.elbo.jitter},
        {"threads", t.elbo.threads}}},
      {"evaluation", {{"folds", c.folds}, {"seed", c.fold_seed}}},
      {"predict", {{"add_noise", c.add_noise}}},
  };
  return j.dump(2);
}

SyntheticSpec parse_synthetic_spec(const std::string& json_text) {
  const json j = parse_json(json_text, "synthetic spec");
  expect_keys(j, "synthetic",
              {"users", "items", "contexts", "item_dim", "item_alpha", "bias_dim", "use_mean", "signal_variance",
               "noise_precision", "user_bias_mean", "user_bias_sd", "bias_scale", "ratings_per_user", "seed"});
  SyntheticSpec s;
  read(j, "users", s.users, "synthetic");
  read(j, "items", s.items, "synthetic");
  read(j, "item_dim", s.item_dim, "synthetic");
  read(j, "item_alpha", s.item_alpha, "synthetic");
  read(j, "bias_dim", s.bias_dim, "synthetic");
  read(j, "use_mean", s.use_mean, "synthetic");
  read(j, "signal_variance", s.signal_variance, "synthetic");
  read(j, "noise_precision", s.noise_precision, "synthetic");
  read(j, "user_bias_mean", s.user_bias_mean, "synthetic");
  read(j, "user_bias_sd", s.user_bias_sd, "synthetic");
  read(j, "bias_scale", s.bias_scale, "synthetic");
  read(j, "ratings_per_user", s.ratings_per_user, "synthetic");
  read(j, "seed", s.seed, "synthetic");
  if (j.contains("contexts")) {
    for (const auto& c : j["contexts"]) {
      const std::string where = "synthetic.contexts[" + std::to_string(s.contexts.size()) + "]";
      expect_keys(c, where, {"name", "kind", "cardinality", "latent_dim", "alpha", "irrelevant"});
      SyntheticContext sc;
      sc.name = require<std::string>(c, "name", where);
      sc.kind = parse_kind(require<std::string>(c, "kind", where), where);
      read(c, "cardinality", sc.cardinality, where);
      read(c, "latent_dim", sc.latent_dim, where);
      read(c, "alpha", sc.alpha, where);
      read(c, "irrelevant", sc.irrelevant, where);
      s.contexts.push_back(sc);
    }
  }
  s.validate();
  return s;
}

SyntheticSpec load_synthetic_spec(const std::filesystem::path& path) { return parse_synthetic_spec(slurp(path)); }

}  // namespace gplvmf
