#include <cmath>
#include <random>

#include "doctest.h"
#include "gplvmf/errors.hpp"
#include "gplvmf/scg.hpp"

using namespace gplvmf;

namespace {

Eigen::MatrixXd random_spd(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd a(n, n);
  for (int i = 0; i < a.size(); ++i) a.data()[i] = normal(rng);
  return a * a.transpose() + n * Eigen::MatrixXd::Identity(n, n);
}

}  // namespace

TEST_CASE("scg solves a quadratic within dim iterations") {
  for (int n : {2, 5, 10}) {
    const Eigen::MatrixXd a = random_spd(n, 10 + n);
    const Eigen::VectorXd b = Eigen::VectorXd::LinSpaced(n, -1.0, 2.0);
    const Eigen::VectorXd solution = a.ldlt().solve(b);
    auto f = [&](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
      g = a * x - b;
      return 0.5 * x.dot(a * x) - b.dot(x);
    };
    ScgOptions opt;
    opt.max_iterations = n;
    opt.gradient_tolerance = 1e-12;
    const ScgResult r = scg_minimize(f, Eigen::VectorXd::Zero(n), opt);
    CHECK(r.iterations <= n);
    CHECK((r.x - solution).norm() < 1e-8);
  }
}

TEST_CASE("scg accepted steps never increase f") {
  auto rosen = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g.resize(2);
    g(0) = -2.0 * (1.0 - x(0)) - 400.0 * x(0) * (x(1) - x(0) * x(0));
    g(1) = 200.0 * (x(1) - x(0) * x(0));
    return std::pow(1.0 - x(0), 2) + 100.0 * std::pow(x(1) - x(0) * x(0), 2);
  };
  ScgOptions opt;
  opt.max_iterations = 2000;
  opt.gradient_tolerance = 1e-10;
  const ScgResult r = scg_minimize(rosen, Eigen::Vector2d(-1.2, 1.0), opt);
  for (std::size_t i = 1; i < r.history.size(); ++i) CHECK(r.history[i] <= r.history[i - 1]);
  CHECK((r.x - Eigen::Vector2d(1.0, 1.0)).norm() < 1e-4);
}

TEST_CASE("scg treats throwing trial points as rejected") {
  auto f = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    if (x(0) > 0.7) throw NumericalError("outside domain");
    g = 2.0 * (x - Eigen::VectorXd::Constant(1, 0.5));
    return (x(0) - 0.5) * (x(0) - 0.5);
  };
  const ScgResult r = scg_minimize(f, Eigen::VectorXd::Constant(1, -3.0), ScgOptions{});
  CHECK(std::abs(r.x(0) - 0.5) < 1e-6);
}

TEST_CASE("scg start point must be finite") {
  auto f = [](const Eigen::VectorXd&, Eigen::VectorXd& g) {
    g = Eigen::VectorXd::Zero(1);
    return std::nan("");
  };
  CHECK_THROWS_AS(scg_minimize(f, Eigen::VectorXd::Zero(1), ScgOptions{}), NumericalError);
}

TEST_CASE("scg callback can stop the run") {
  auto f = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = 2.0 * x;
    return x.squaredNorm();
  };
  int calls = 0;
  const ScgResult r = scg_minimize(f, Eigen::VectorXd::Constant(3, 1.0), ScgOptions{},
                                   [&](int, const Eigen::VectorXd&, double, bool) { return ++calls < 1; });
  CHECK(calls == 1);
  CHECK(r.status == ScgStatus::Stopped);
}

TEST_CASE("scg reports a line-scale collapse as a status") {
  // gradient points the wrong way, so no step is ever accepted
  auto f = [](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    g = -2.0 * x - Eigen::VectorXd::Ones(x.size());
    return x.squaredNorm();
  };
  ScgOptions opt;
  opt.max_iterations = 10000;
  opt.lambda_max = 1e20;
  const ScgResult r = scg_minimize(f, Eigen::VectorXd::Constant(2, 0.3), opt);
  CHECK(r.status == ScgStatus::LineScaleCollapse);
  CHECK(r.restarts == 1);
}
