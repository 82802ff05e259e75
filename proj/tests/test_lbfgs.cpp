#include "bifactor/lbfgs.hpp"

#include <doctest.h>

#include <cmath>

using namespace bifactor;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST_CASE("convex quadratic converges to its minimizer") {
  const int n = 12;
  MatrixXd a = MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) a(i, i) = 1.0 + i;
  const VectorXd target = VectorXd::LinSpaced(n, -2.0, 2.0);
  auto objective = [&](const VectorXd& x, double& f, VectorXd& g) {
    const VectorXd d = x - target;
    f = 0.5 * d.dot(a * d);
    g = a * d;
    return true;
  };
  const auto res = lbfgs_minimize(objective, VectorXd::Zero(n), LbfgsOptions{});
  CHECK(res.status == LbfgsStatus::kGradTol);
  CHECK((res.x - target).norm() < 1e-6);
}

TEST_CASE("rosenbrock") {
  auto objective = [](const VectorXd& x, double& f, VectorXd& g) {
    const double a = 1.0 - x[0];
    const double b = x[1] - x[0] * x[0];
    f = a * a + 100.0 * b * b;
    g.resize(2);
    g[0] = -2.0 * a - 400.0 * x[0] * b;
    g[1] = 200.0 * b;
    return true;
  };
  VectorXd x0(2);
  x0 << -1.2, 1.0;
  LbfgsOptions options;
  options.max_iters = 2000;
  const auto res = lbfgs_minimize(objective, x0, options);
  CHECK(res.f < 1e-10);
  CHECK((res.x - VectorXd::Ones(2)).norm() < 1e-4);
}

TEST_CASE("already stationary point returns immediately") {
  auto objective = [](const VectorXd& x, double& f, VectorXd& g) {
    f = x.squaredNorm();
    g = 2.0 * x;
    return true;
  };
  const auto res = lbfgs_minimize(objective, VectorXd::Zero(3), LbfgsOptions{});
  CHECK(res.status == LbfgsStatus::kGradTol);
  CHECK(res.iters == 0);
  CHECK(res.x.norm() == 0.0);
}

TEST_CASE("non-evaluable regions are avoided by backtracking") {
  // f = -log(1 - ||x||^2) + ||x - c||^2, undefined outside the unit ball.
  VectorXd c(2);
  c << 0.9, 0.0;
  auto objective = [&](const VectorXd& x, double& f, VectorXd& g) {
    const double r2 = x.squaredNorm();
    if (r2 >= 1.0) return false;
    f = -std::log(1.0 - r2) + (x - c).squaredNorm();
    g = 2.0 * x / (1.0 - r2) + 2.0 * (x - c);
    return true;
  };
  const auto res = lbfgs_minimize(objective, VectorXd::Zero(2), LbfgsOptions{});
  CHECK(res.x.squaredNorm() < 1.0);
  CHECK(res.status == LbfgsStatus::kGradTol);
  CHECK(res.f <= 0.9 * 0.9);  // objective decreased from the start value
}

TEST_CASE("objective never increases from the initial value") {
  auto objective = [](const VectorXd& x, double& f, VectorXd& g) {
    f = std::pow(x[0] - 3.0, 4) + x.tail(x.size() - 1).squaredNorm();
    g.resize(x.size());
    g[0] = 4.0 * std::pow(x[0] - 3.0, 3);
    g.tail(x.size() - 1) = 2.0 * x.tail(x.size() - 1);
    return true;
  };
  VectorXd x0 = VectorXd::Constant(5, 10.0);
  double f0, dummy_f;
  VectorXd dummy_g;
  objective(x0, f0, dummy_g);
  LbfgsOptions options;
  options.max_iters = 7;  // stop early on purpose
  const auto res = lbfgs_minimize(objective, x0, options);
  objective(res.x, dummy_f, dummy_g);
  CHECK(res.f <= f0);
  CHECK(res.f == doctest::Approx(dummy_f));
}
