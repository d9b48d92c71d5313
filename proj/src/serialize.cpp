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

#include "gplvmf/serialize.hpp"

#include <fstream>

#include "json.hpp"

#include "gplvmf/config.hpp"
#include "gplvmf/errors.hpp"

namespace gplvmf {

namespace {

using nlohmann::json;

json matrix_to(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json r = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

json vector_to(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

void matrix_from(const json& j, Eigen::MatrixXd& m, const std::string& what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != m.rows())
    throw DataError("model file: '" + what + "' has the wrong number of rows");
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const auto& r = j[static_cast<std::size_t>(i)];
    if (!r.is_array() || static_cast<Eigen::Index>(r.size()) != m.cols())
      throw DataError("model file: '" + what + "' has the wrong number of columns");
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(i, c) = r[static_cast<std::size_t>(c)].get<double>();
  }
}

void vector_from(const json& j, Eigen::VectorXd& v, const std::string& what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != v.size())
    throw DataError("model file: '" + what + "' has the wrong length");
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = j[static_cast<std::size_t>(i)].get<double>();
}

json latents_to(const EntityLatents& e) { return {{"mean", matrix_to(e.mean)}, {"variance", matrix_to(e.variance)}}; }

void latents_from(const json& j, EntityLatents& e, const std::string& what) {
  matrix_from(j.at("mean"), e.mean, what + ".mean");
  matrix_from(j.at("variance"), e.variance, what + ".variance");
}

}  // namespace

SavedModel SavedModel::capture(const Predictor& predictor, const ModelDims& dims,
                               const Standardization& standardization) {
  return {dims, predictor.state(), predictor.cache(), standardization, predictor.options()};
}

Predictor SavedModel::predictor() const { return Predictor(state, cache, options); }

void save_model(std::ostream& out, const SavedModel& m) {
  const auto& s = m.state;
  json contexts = json::array(), bias_contexts = json::array();
  for (std::size_t d = 0; d < s.context.size(); ++d) {
    contexts.push_back(latents_to(s.context[d]));
    bias_contexts.push_back(latents_to(s.bias.context[d]));
  }
  json posterior = json::array();
  for (std::size_t u = 0; u < m.cache.posterior.size(); ++u) {
    const auto& p = m.cache.posterior[u];
    if (p) posterior.push_back({{"user", u}, {"weights", vector_to(p->weights)}, {"core", matrix_to(p->core)}});
  }
  std::vector<bool> scaled = m.standardization.scaled;
  json j = {
      {"format", kModelFormat},
      {"version", kModelVersion},
      {"schema", json::parse(dump_schema(s.schema))},
      {"dims",
       {{"item_dim", m.dims.item_dim},
        {"context_dim", m.dims.context_dim},
        {"bias_dim", m.dims.bias_dim},
        {"inducing", m.dims.inducing},
        {"use_mean", m.dims.use_mean}}},
      {"standardization",
       {{"mean", m.standardization.mean}, {"scale", m.standardization.scale}, {"scaled", scaled}}},
      {"predict",
       {{"rating_scale", {m.options.scale.min, m.options.scale.max}},
        {"add_noise", m.options.add_noise},
        {"global_mean_fallback", m.options.global_mean_fallback},
        {"jitter", m.options.elbo.jitter}}},
      {"state",
       {{"item", latents_to(s.item)},
        {"context", contexts},
        {"bias",
         {{"user_bias", vector_to(s.bias.user_bias)},
          {"item", latents_to(s.bias.item)},
          {"context", bias_contexts},
          {"real_weight", vector_to(s.bias.real_weight)}}},
        {"inducing", matrix_to(s.inducing)},
        {"inverse_length_scales", vector_to(s.inverse_length_scales)},
        {"signal_variance", vector_to(s.signal_variance)},
        {"noise_precision", vector_to(s.noise_precision)}}},
      {"posterior", posterior},
      {"global_mean", m.cache.global_mean},
      {"global_variance", m.cache.global_variance},
  };
  out << j.dump() << '\n';
  if (!out) throw DataError("model file: write failed");
}

void save_model(const std::filesystem::path& path, const SavedModel& model) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  save_model(out, model);
}

SavedModel load_model(std::istream& in) {
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("model file: ") + e.what());
  }
  if (!j.is_object() || j.value("format", "") != kModelFormat) throw DataError("model file: not a gplvmf model");
  const int version = j.value("version", 0);
  if (version < 1 || version > kModelVersion)
    throw DataError("model file: unsupported version " + std::to_string(version));
  try {
    SavedModel m;
    // reuse the config parser for the schema block
    const json cfg = {{"schema", j.at("schema")}};
    const ContextSchema schema = parse_config(cfg.dump()).schema;
    const auto& d = j.at("dims");
    m.dims.item_dim = d.at("item_dim").get<int>();
    m.dims.context_dim = d.at("context_dim").get<int>();
    m.dims.bias_dim = d.at("bias_dim").get<int>();
    m.dims.inducing = d.at("inducing").get<int>();
    m.dims.use_mean = d.at("use_mean").get<bool>();

    const auto& st = j.at("standardization");
    m.standardization.mean = st.at("mean").get<std::vector<double>>();
    m.standardization.scale = st.at("scale").get<std::vector<double>>();
    m.standardization.scaled = st.at("scaled").get<std::vector<bool>>();
    if (m.standardization.mean.size() != schema.size() || m.standardization.scale.size() != schema.size() ||
        m.standardization.scaled.size() != schema.size())
      throw DataError("model file: standardization does not match the schema");

    const auto& p = j.at("predict");
    const auto scale = p.at("rating_scale").get<std::vector<double>>();
    if (scale.size() != 2) throw DataError("model file: rating_scale must have two entries");
    m.options.scale = {scale[0], scale[1]};
    m.options.add_noise = p.at("add_noise").get<bool>();
    m.options.global_mean_fallback = p.at("global_mean_fallback").get<bool>();
    m.options.elbo.jitter = p.at("jitter").get<double>();

    VariationalState& s = m.state;
    s = VariationalState::zeros(schema, m.dims);
    const auto& js = j.at("state");
    latents_from(js.at("item"), s.item, "item");
    const auto& ctx = js.at("context");
    const auto& bias = js.at("bias");
    const auto& bctx = bias.at("context");
    if (ctx.size() != schema.size() || bctx.size() != schema.size())
      throw DataError("model file: context latents do not match the schema");
    for (std::size_t k = 0; k < schema.size(); ++k) {
      latents_from(ctx[k], s.context[k], "context[" + schema.contexts[k].name + "]");
      latents_from(bctx[k], s.bias.context[k], "bias.context[" + schema.contexts[k].name + "]");
    }
    vector_from(bias.at("user_bias"), s.bias.user_bias, "bias.user_bias");
    latents_from(bias.at("item"), s.bias.item, "bias.item");
    vector_from(bias.at("real_weight"), s.bias.real_weight, "bias.real_weight");
    matrix_from(js.at("inducing"), s.inducing, "inducing");
    vector_from(js.at("inverse_length_scales"), s.inverse_length_scales, "inverse_length_scales");
    vector_from(js.at("signal_variance"), s.signal_variance, "signal_variance");
    vector_from(js.at("noise_precision"), s.noise_precision, "noise_precision");

    m.cache.posterior.assign(static_cast<std::size_t>(schema.user_count), std::nullopt);
    const Eigen::Index mm = m.dims.inducing;
    for (const auto& e : j.at("posterior")) {
      const int user = e.at("user").get<int>();
      if (user < 0 || user >= schema.user_count) throw DataError("model file: posterior for unknown user");
      UserPosterior up{Eigen::VectorXd(mm), Eigen::MatrixXd(mm, mm)};
      vector_from(e.at("weights"), up.weights, "posterior.weights");
      matrix_from(e.at("core"), up.core, "posterior.core");
      m.cache.posterior[static_cast<std::size_t>(user)] = std::move(up);
    }
    m.cache.global_mean = j.at("global_mean").get<double>();
    m.cache.global_variance = j.at("global_variance").get<double>();
    return m;
  } catch (const json::exception& e) {
    throw DataError(std::string("model file: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("model file: ") + e.what());
  }
}

SavedModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return load_model(in);
}

}  // namespace gplvmf
