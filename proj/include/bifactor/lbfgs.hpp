// Limited-memory quasi-Newton minimizer with a backtracking line search.
// The objective callback may report a point as non-evaluable (e.g. the
// implied covariance lost positive definiteness); the line search treats
// that as +infinity and backtracks.
#pragma once

#include <Eigen/Dense>

#include <functional>

namespace bifactor {

// Fills f and grad at x; returns false when the point is not evaluable.
using ObjectiveFn =
    std::function<bool(const Eigen::VectorXd& x, double& f, Eigen::VectorXd& grad)>;

struct LbfgsOptions {
  int max_iters = 500;
  double grad_tol = 1e-6;
  int memory = 8;
  double armijo_c = 1e-4;
  double step_shrink = 0.5;
  int max_backtracks = 60;
};

enum class LbfgsStatus {
  kGradTol,          // gradient norm fell below grad_tol
  kMaxIters,
  kLineSearchFailed, // no acceptable step after max_backtracks halvings
  kStalled,          // step size underflowed relative to x
};

struct LbfgsResult {
  Eigen::VectorXd x;
  double f = 0.0;
  double grad_norm = 0.0;
  int iters = 0;
  int n_evals = 0;
  LbfgsStatus status = LbfgsStatus::kMaxIters;
};

// x0 must be evaluable. The returned objective value never exceeds f(x0).
LbfgsResult lbfgs_minimize(const ObjectiveFn& objective, Eigen::VectorXd x0,
                           const LbfgsOptions& options);

}  // namespace bifactor
