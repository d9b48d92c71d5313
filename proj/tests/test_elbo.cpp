#include <cmath>
#include <numbers>

#include "doctest.h"
#include "gplvmf/elbo.hpp"
#include "gplvmf/errors.hpp"
#include "test_support.hpp"

using namespace gplvmf;
using gplvmf::testing::Instance;
using gplvmf::testing::InstanceShape;

namespace {

// one user, one rating, one item with a single latent coordinate, no contexts
Instance scalar_instance(double mu, double s, double z, double alpha, double sigma2, double beta,
                         double y, double item_bias_mean, double item_bias_var, double user_bias) {
  InstanceShape shape;
  shape.users = 1;
  shape.items = 1;
  shape.ratings_per_user = 1;
  shape.categorical_contexts = 0;
  shape.real_contexts = 0;
  shape.dims.item_dim = 1;
  shape.dims.inducing = 1;
  Instance inst = gplvmf::testing::random_instance(shape, 1);
  inst.blocks[0].rows[0].rating = y;
  auto& st = inst.state;
  st.item.mean(0, 0) = mu;
  st.item.variance(0, 0) = s;
  st.inducing(0, 0) = z;
  st.inverse_length_scales(0) = alpha;
  st.signal_variance(0) = sigma2;
  st.noise_precision(0) = beta;
  st.bias.item.mean(0, 0) = item_bias_mean;
  st.bias.item.variance(0, 0) = item_bias_var;
  st.bias.user_bias(0) = user_bias;
  return inst;
}

}  // namespace

TEST_CASE("kl_to_prior values") {
  InstanceShape shape;
  shape.real_contexts = 1;
  Instance inst = gplvmf::testing::random_instance(shape, 3);
  auto& st = inst.state;
  auto reset = [](EntityLatents& e) {
    e.mean.setZero();
    e.variance.setOnes();
  };
  reset(st.item);
  for (auto& c : st.context) reset(c);
  reset(st.bias.item);
  for (auto& c : st.bias.context) reset(c);
  CHECK(kl_to_prior(st) == 0.0);
  st.item.mean(0, 0) = 1.0;
  CHECK(kl_to_prior(st) == doctest::Approx(0.5));
  st.item.variance(1, 0) = 0.0;
  CHECK_THROWS_AS(kl_to_prior(st), NumericalError);
}

TEST_CASE("kl_to_prior matches quadrature of the KL integrand") {
  // one free coordinate at a time, integrated by the trapezoid rule
  const double mus[] = {0.3, -1.2, 0.0};
  const double vars[] = {0.2, 1.7, 0.6};
  for (int i = 0; i < 3; ++i) {
    const double mu = mus[i], s = vars[i];
    const double sd = std::sqrt(s);
    double kl = 0.0;
    const int steps = 200000;
    const double lo = mu - 12 * sd, hi = mu + 12 * sd, h = (hi - lo) / steps;
    for (int k = 0; k <= steps; ++k) {
      const double x = lo + k * h;
      const double logq = -0.5 * std::log(2 * std::numbers::pi * s) - 0.5 * (x - mu) * (x - mu) / s;
      const double logp = -0.5 * std::log(2 * std::numbers::pi) - 0.5 * x * x;
      kl += (k == 0 || k == steps ? 0.5 : 1.0) * std::exp(logq) * (logq - logp) * h;
    }
    InstanceShape shape;
    shape.users = 1;
    shape.items = 1;
    shape.ratings_per_user = 1;
    shape.categorical_contexts = 0;
    shape.real_contexts = 0;
    shape.dims.item_dim = 1;
    shape.dims.use_mean = false;
    Instance inst = gplvmf::testing::random_instance(shape, 4);
    inst.state.item.mean(0, 0) = mu;
    inst.state.item.variance(0, 0) = s;
    CHECK(kl_to_prior(inst.state) == doctest::Approx(kl).epsilon(1e-6));
  }
}

TEST_CASE("user_bound scalar case equals hand formula") {
  const double mu = 0.4, s = 0.3, z = -0.2, alpha = 1.3, sigma2 = 0.8, beta = 2.0, y = 3.1;
  const double bm = 0.25, bv = 0.4, bn = 2.5;
  Instance inst = scalar_instance(mu, s, z, alpha, sigma2, beta, y, bm, bv, bn);
  ElboOptions opt;
  opt.jitter = 1e-6;
  const double k = sigma2 * (1.0 + 1e-6);
  const double d = mu - z;
  const double p1 = sigma2 / std::sqrt(1 + alpha * s) * std::exp(-0.5 * alpha * d * d / (1 + alpha * s));
  const double p2 = sigma2 * sigma2 / std::sqrt(1 + 2 * alpha * s) * std::exp(-alpha * d * d / (1 + 2 * alpha * s));
  const double m = bn + bm;
  const double phi0 = m * m + bv;
  const double yt = y - m;
  const double a = k + beta * p2;
  const double hand = 0.5 * std::log(beta) - 0.5 * std::log(2 * std::numbers::pi) + 0.5 * std::log(k) -
                      0.5 * std::log(a) - 0.5 * beta * (y * y - 2 * y * m + phi0) +
                      0.5 * beta * beta * p1 * p1 * yt * yt / a - 0.5 * beta * sigma2 + 0.5 * beta * p2 / k;
  CHECK(user_bound(inst.blocks[0], inst.state, opt) == doctest::Approx(hand).epsilon(1e-12));

  // both spellings of q(u): K (beta^-1 K + Psi2)^-1 Psi1' r  and  beta K (K + beta Psi2)^-1 Psi1' r
  const InducingPosterior qu = optimal_qu(inst.blocks[0], inst.state, opt);
  CHECK(qu.mean(0) == doctest::Approx(k * p1 * yt / (k / beta + p2)).epsilon(1e-12));
  CHECK(qu.mean(0) == doctest::Approx(beta * k * p1 * yt / a).epsilon(1e-12));
  CHECK(qu.covariance(0, 0) == doctest::Approx(k * k / a).epsilon(1e-12));
}

TEST_CASE("optimal_qu mean vanishes for zero residual") {
  Instance inst = scalar_instance(0.1, 0.2, 0.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.1, 0.0);
  inst.blocks[0].rows[0].rating = 0.0;  // phi1 = b_n + item bias = 0
  CHECK(optimal_qu(inst.blocks[0], inst.state).mean.norm() < 1e-15);

  InstanceShape shape;
  shape.users = 1;
  shape.ratings_per_user = 4;
  Instance big = gplvmf::testing::random_instance(shape, 12);
  const auto post = optimal_qu(big.blocks[0], big.state);
  CHECK((post.covariance - post.covariance.transpose()).norm() < 1e-12);
  CHECK(Eigen::LLT<Eigen::MatrixXd>(post.covariance).info() == Eigen::Success);
}

TEST_CASE("bound is tight at Z = X with vanishing variances") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    InstanceShape shape;
    shape.users = 1;
    shape.items = 6;
    shape.ratings_per_user = 4;
    shape.dims.inducing = 4;
    Instance inst = gplvmf::testing::random_instance(shape, seed);
    auto& st = inst.state;
    auto& block = inst.blocks[0];
    // distinct items so the inputs are distinct
    for (std::size_t t = 0; t < block.count(); ++t) block.rows[t].item = static_cast<int>(t);
    auto shrink = [](EntityLatents& e) { e.variance.setConstant(1e-14); };
    shrink(st.item);
    for (auto& c : st.context) shrink(c);
    shrink(st.bias.item);
    for (auto& c : st.bias.context) shrink(c);
    st.inducing = gather_points(st, block).mean;
    ElboOptions opt;
    opt.jitter = 1e-12;
    CHECK(user_bound(block, st, opt) ==
          doctest::Approx(gplvmf::testing::exact_log_marginal(block, st)).epsilon(1e-9));
  }
}

TEST_CASE("total bound: single user, duplication, permutation") {
  InstanceShape shape;
  shape.users = 1;
  shape.ratings_per_user = 4;
  Instance inst = gplvmf::testing::random_instance(shape, 21);
  const auto rep = total_bound(inst.blocks, inst.state);
  const double fn = user_bound(inst.blocks[0], inst.state);
  CHECK(rep.total == doctest::Approx(fn - kl_to_prior(inst.state)));
  CHECK(rep.kl >= 0.0);

  auto doubled = inst.blocks;
  doubled.push_back(inst.blocks[0]);
  const auto rep2 = total_bound(doubled, inst.state);
  CHECK(rep2.per_user.sum() == doctest::Approx(2 * fn));
  CHECK(rep2.kl == rep.kl);

  auto perm = inst.blocks;
  std::reverse(perm[0].rows.begin(), perm[0].rows.end());
  CHECK(user_bound(perm[0], inst.state) == doctest::Approx(fn).epsilon(1e-12));
}

TEST_CASE("duplicate inducing point is inert up to the jitter") {
  // A jittered duplicate acts as a second noisy copy of u at that input, so
  // the bound moves by O(jitter) rather than exactly zero.
  for (std::uint64_t seed = 31; seed < 36; ++seed) {
    for (double jitter : {1e-6, 1e-7}) {
      InstanceShape shape;
      shape.users = 1;
      shape.ratings_per_user = 4;
      shape.dims.inducing = 3;
      Instance inst = gplvmf::testing::random_instance(shape, seed);
      ElboOptions opt;
      opt.jitter = jitter;
      const double before = user_bound(inst.blocks[0], inst.state, opt);
      auto st = inst.state;
      Eigen::MatrixXd z(4, st.inducing.cols());
      z << st.inducing, st.inducing.row(1);
      st.inducing = z;
      CHECK(std::abs(user_bound(inst.blocks[0], st, opt) - before) < 10 * jitter);
    }
  }
}

TEST_CASE("total bound gradient matches finite differences") {
  for (std::uint64_t seed = 100; seed < 104; ++seed) {
    InstanceShape shape;
    shape.dims.item_dim = 2;
    shape.dims.inducing = 3;
    shape.dims.use_mean = seed % 2 == 0;
    Instance inst = gplvmf::testing::random_instance(shape, seed);
    const auto rep = total_bound(inst.blocks, inst.state);
    const Eigen::VectorXd x = pack(inst.state);
    auto f = [&](const Eigen::VectorXd& v) {
      VariationalState s = inst.state;
      unpack(v, s);
      return total_bound(inst.blocks, s, {}, false).total;
    };
    const Eigen::VectorXd fd = gplvmf::testing::finite_difference(f, x);
    CHECK(gplvmf::testing::max_relative_error(rep.gradient, fd) < 1e-4);
  }
}

TEST_CASE("bound lies below Monte-Carlo evidence") {
  InstanceShape shape;
  shape.users = 1;
  shape.items = 2;
  shape.ratings_per_user = 2;
  shape.categorical_contexts = 0;
  shape.real_contexts = 0;
  shape.dims.item_dim = 1;
  shape.dims.inducing = 2;
  Instance inst = gplvmf::testing::random_instance(shape, 55);
  const auto rep = total_bound(inst.blocks, inst.state, {}, false);
  const auto [logp, se] = gplvmf::testing::mc_log_evidence(inst.blocks, inst.state, 100000, 9);
  CHECK(rep.total <= logp + 3 * se);
}
