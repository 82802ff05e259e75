#include "bifactor/lbfgs.hpp"

#include "bifactor/types.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <vector>

namespace bifactor {

namespace {

struct CurvaturePair {
  Eigen::VectorXd s;
  Eigen::VectorXd y;
  double rho = 0.0;
};

}  // namespace

LbfgsResult lbfgs_minimize(const ObjectiveFn& objective, Eigen::VectorXd x0,
                           const LbfgsOptions& options) {
  LbfgsResult result;
  const int n = static_cast<int>(x0.size());
  Eigen::VectorXd x = std::move(x0);
  Eigen::VectorXd grad(n);
  double f = 0.0;
  if (!objective(x, f, grad)) {
    throw Error("initial point of the inner solve is not evaluable");
  }
  ++result.n_evals;

  std::deque<CurvaturePair> memory;
  Eigen::VectorXd x_new(n), grad_new(n), direction(n), q(n);

  for (int iter = 0; iter < options.max_iters; ++iter) {
    result.iters = iter;
    const double grad_norm = grad.norm();
    if (grad_norm <= options.grad_tol) {
      result.status = LbfgsStatus::kGradTol;
      break;
    }

    // Two-loop recursion.
    q = -grad;
    std::vector<double> alpha(memory.size());
    for (int i = static_cast<int>(memory.size()) - 1; i >= 0; --i) {
      alpha[i] = memory[i].rho * memory[i].s.dot(q);
      q -= alpha[i] * memory[i].y;
    }
    if (!memory.empty()) {
      const auto& last = memory.back();
      q *= last.s.dot(last.y) / last.y.squaredNorm();
    }
    for (size_t i = 0; i < memory.size(); ++i) {
      const double beta = memory[i].rho * memory[i].y.dot(q);
      q += (alpha[i] - beta) * memory[i].s;
    }
    direction = q;

    double dir_deriv = grad.dot(direction);
    if (!(dir_deriv < 0.0)) {
      memory.clear();
      direction = -grad;
      dir_deriv = -grad_norm * grad_norm;
    }

    double step = memory.empty() ? std::min(1.0, 1.0 / std::max(grad_norm, 1.0)) : 1.0;
    bool accepted = false;
    double f_new = 0.0;
    for (int bt = 0; bt < options.max_backtracks; ++bt) {
      x_new = x + step * direction;
      ++result.n_evals;
      if (objective(x_new, f_new, grad_new) &&
          f_new <= f + options.armijo_c * step * dir_deriv) {
        accepted = true;
        break;
      }
      step *= options.step_shrink;
    }
    if (!accepted) {
      result.status = LbfgsStatus::kLineSearchFailed;
      break;
    }

    CurvaturePair pair;
    pair.s = x_new - x;
    pair.y = grad_new - grad;
    const double sy = pair.s.dot(pair.y);

    const double x_scale = std::max(1.0, x.cwiseAbs().maxCoeff());
    if (pair.s.cwiseAbs().maxCoeff() < 1e-15 * x_scale) {
      x = std::move(x_new);
      f = f_new;
      grad = grad_new;
      result.status = LbfgsStatus::kStalled;
      break;
    }

    // Armijo alone does not guarantee positive curvature; skip bad pairs.
    if (sy > 1e-12 * pair.s.norm() * pair.y.norm()) {
      pair.rho = 1.0 / sy;
      memory.push_back(std::move(pair));
      if (static_cast<int>(memory.size()) > options.memory) memory.pop_front();
    }

    x = std::move(x_new);
    f = f_new;
    grad = grad_new;
    result.status = LbfgsStatus::kMaxIters;
  }

  result.x = std::move(x);
  result.f = f;
  result.grad_norm = grad.norm();
  if (result.grad_norm <= options.grad_tol) result.status = LbfgsStatus::kGradTol;
  return result;
}

}  // namespace bifactor
