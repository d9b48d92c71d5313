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

#include "gplvmf/state.hpp"

#include <cmath>
#include <string>

#include "gplvmf/errors.hpp"

namespace gplvmf {

namespace {

struct Segment {
  double* data;
  Eigen::Index size;
  bool positive;
  std::string name;
};

// Fixed traversal order shared by pack/unpack and parameter_name.
std::vector<Segment> segments(VariationalState& s) {
  std::vector<Segment> out;
  auto add = [&out](Eigen::MatrixXd& m, bool positive, std::string name) {
    out.push_back({m.data(), m.size(), positive, std::move(name)});
  };
  auto add_vec = [&out](Eigen::VectorXd& v, bool positive, std::string name) {
    out.push_back({v.data(), v.size(), positive, std::move(name)});
  };
  add(s.item.mean, false, "item.mean");
  add(s.item.variance, true, "item.log_variance");
  for (std::size_t d = 0; d < s.context.size(); ++d) {
    const auto& name = s.schema.contexts[d].name;
    add(s.context[d].mean, false, "context[" + name + "].mean");
    add(s.context[d].variance, true, "context[" + name + "].log_variance");
  }
  add(s.bias.item.mean, false, "bias.item.mean");
  add(s.bias.item.variance, true, "bias.item.log_variance");
  for (std::size_t d = 0; d < s.bias.context.size(); ++d) {
    const auto& name = s.schema.contexts[d].name;
    add(s.bias.context[d].mean, false, "bias.context[" + name + "].mean");
    add(s.bias.context[d].variance, true, "bias.context[" + name + "].log_variance");
  }
  add_vec(s.bias.real_weight, false, "bias.real_weight");
  add_vec(s.bias.user_bias, false, "user_bias");
  add(s.inducing, false, "inducing");
  add_vec(s.inverse_length_scales, true, "log_inverse_length_scales");
  add_vec(s.signal_variance, true, "log_signal_variance");
  add_vec(s.noise_precision, true, "log_noise_precision");
  return out;
}

void copy_out(const VariationalState& s, Eigen::VectorXd& x, bool transform) {
  auto segs = segments(const_cast<VariationalState&>(s));
  Eigen::Index total = 0;
  for (const auto& seg : segs) total += seg.size;
  x.resize(total);
  Eigen::Index pos = 0;
  for (const auto& seg : segs) {
    for (Eigen::Index i = 0; i < seg.size; ++i)
      x(pos + i) = (transform && seg.positive) ? std::log(seg.data[i]) : seg.data[i];
    pos += seg.size;
  }
}

void copy_in(const Eigen::VectorXd& x, VariationalState& s, bool transform) {
  auto segs = segments(s);
  Eigen::Index total = 0;
  for (const auto& seg : segs) total += seg.size;
  if (x.size() != total)
    throw std::invalid_argument("unpack: vector size " + std::to_string(x.size()) +
                                " does not match parameter count " + std::to_string(total));
  Eigen::Index pos = 0;
  for (const auto& seg : segs) {
    for (Eigen::Index i = 0; i < seg.size; ++i)
      seg.data[i] = (transform && seg.positive) ? std::exp(x(pos + i)) : x(pos + i);
    pos += seg.size;
  }
}

}  // namespace

LatentLayout LatentLayout::make(const ContextSchema& schema, const ModelDims& dims) {
  if (dims.item_dim < 1) throw ConfigError("item latent dimension must be >= 1");
  if (dims.context_dim < 1) throw ConfigError("context latent dimension must be >= 1");
  if (dims.bias_dim < 1) throw ConfigError("bias latent dimension must be >= 1");
  if (dims.inducing < 1) throw ConfigError("inducing point count must be >= 1");
  LatentLayout l;
  l.item_dim = dims.item_dim;
  l.bias_dim = dims.bias_dim;
  l.use_mean = dims.use_mean;
  int offset = dims.item_dim;
  l.fixed.assign(static_cast<std::size_t>(dims.item_dim), false);
  for (const auto& ctx : schema.contexts) {
    const int q = ctx.categorical() ? (ctx.latent_dim > 0 ? ctx.latent_dim : dims.context_dim) : 1;
    l.context_dim.push_back(q);
    l.context_offset.push_back(offset);
    offset += q;
    l.fixed.insert(l.fixed.end(), static_cast<std::size_t>(q), !ctx.categorical());
  }
  l.dim = offset;
  return l;
}

VariationalState VariationalState::zeros(const ContextSchema& schema, const ModelDims& dims) {
  VariationalState s;
  s.schema = schema;
  s.layout = LatentLayout::make(schema, dims);
  s.item = EntityLatents::zeros(schema.item_count, dims.item_dim);
  s.context.resize(schema.size());
  for (std::size_t d = 0; d < schema.size(); ++d) {
    const auto& ctx = schema.contexts[d];
    s.context[d] = ctx.categorical() ? EntityLatents::zeros(ctx.cardinality, s.layout.context_dim[d])
                                     : EntityLatents::zeros(0, 0);
  }
  s.bias = BiasLatents::zeros(schema, dims.bias_dim);
  s.inducing = Eigen::MatrixXd::Zero(dims.inducing, s.layout.dim);
  s.inverse_length_scales = Eigen::VectorXd::Zero(s.layout.dim);
  s.signal_variance = Eigen::VectorXd::Zero(schema.user_count);
  s.noise_precision = Eigen::VectorXd::Zero(schema.user_count);
  return s;
}

VariationalState VariationalState::zeros_like() const {
  VariationalState z = *this;
  auto segs = segments(z);
  for (auto& seg : segs) std::fill(seg.data, seg.data + seg.size, 0.0);
  return z;
}

Eigen::Index VariationalState::parameter_count() const {
  Eigen::Index total = 0;
  for (const auto& seg : segments(const_cast<VariationalState&>(*this))) total += seg.size;
  return total;
}

Eigen::VectorXd pack(const VariationalState& state) {
  Eigen::VectorXd x;
  copy_out(state, x, true);
  return x;
}

void unpack(const Eigen::VectorXd& x, VariationalState& state) { copy_in(x, state, true); }

Eigen::VectorXd pack_raw(const VariationalState& state) {
  Eigen::VectorXd x;
  copy_out(state, x, false);
  return x;
}

void unpack_raw(const Eigen::VectorXd& x, VariationalState& state) { copy_in(x, state, false); }

std::string parameter_name(const VariationalState& state, Eigen::Index index) {
  Eigen::Index pos = 0;
  for (const auto& seg : segments(const_cast<VariationalState&>(state))) {
    if (index < pos + seg.size) return seg.name + "[" + std::to_string(index - pos) + "]";
    pos += seg.size;
  }
  return "<out of range>";
}

LatentPoints gather_points(const VariationalState& state, const UserBlock& block) {
  const auto& layout = state.layout;
  const auto n = static_cast<Eigen::Index>(block.count());
  LatentPoints p;
  p.mean.resize(n, layout.dim);
  p.variance.resize(n, layout.dim);
  p.fixed = layout.fixed;
  for (Eigen::Index t = 0; t < n; ++t) {
    const auto& r = block.rows[static_cast<std::size_t>(t)];
    p.mean.row(t).head(layout.item_dim) = state.item.mean.row(r.item);
    p.variance.row(t).head(layout.item_dim) = state.item.variance.row(r.item);
    for (std::size_t d = 0; d < state.schema.size(); ++d) {
      const int off = layout.context_offset[d];
      const int q = layout.context_dim[d];
      if (state.schema.contexts[d].categorical()) {
        const int c = r.category(d);
        p.mean.row(t).segment(off, q) = state.context[d].mean.row(c);
        p.variance.row(t).segment(off, q) = state.context[d].variance.row(c);
      } else {
        p.mean(t, off) = r.context[d];
        p.variance(t, off) = 0.0;
      }
    }
  }
  return p;
}

void scatter_point_gradient(const VariationalState& state, const UserBlock& block,
                            const Eigen::MatrixXd& d_mean, const Eigen::MatrixXd& d_variance,
                            VariationalState& grad, double weight) {
  const auto& layout = state.layout;
  for (std::size_t i = 0; i < block.count(); ++i) {
    const auto t = static_cast<Eigen::Index>(i);
    const auto& r = block.rows[i];
    grad.item.mean.row(r.item) += weight * d_mean.row(t).head(layout.item_dim);
    grad.item.variance.row(r.item) +=
        weight * d_variance.row(t).head(layout.item_dim).cwiseProduct(state.item.variance.row(r.item));
    for (std::size_t d = 0; d < state.schema.size(); ++d) {
      if (!state.schema.contexts[d].categorical()) continue;
      const int off = layout.context_offset[d];
      const int q = layout.context_dim[d];
      const int c = r.category(d);
      grad.context[d].mean.row(c) += weight * d_mean.row(t).segment(off, q);
      grad.context[d].variance.row(c) +=
          weight * d_variance.row(t).segment(off, q).cwiseProduct(state.context[d].variance.row(c));
    }
  }
}

}  // namespace gplvmf
