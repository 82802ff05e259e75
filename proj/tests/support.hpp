// Test-only oracles, kept independent of the library implementation paths
// they are used to check.
#pragma once

#include "bifactor/alm.hpp"
#include "bifactor/lbfgs.hpp"
#include "bifactor/types.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

namespace testsupport {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Naive product-form evaluation of the correlation Cholesky factor:
// U(i,j) = z(i,j) * prod_{k<i} sqrt(1 - z(k,j)^2), U(j,j) with the full
// product. Plain nested loops, no shared code with the library.
inline MatrixXd product_form_u(const VectorXd& gamma, int G) {
  MatrixXd z = MatrixXd::Zero(G, G);
  int idx = 0;
  for (int j = 1; j < G; ++j) {
    for (int i = 0; i < j; ++i) z(i, j) = std::tanh(gamma[idx++]);
  }
  MatrixXd u = MatrixXd::Zero(G, G);
  for (int j = 0; j < G; ++j) {
    for (int i = 0; i < j; ++i) {
      double prod = 1.0;
      for (int k = 0; k < i; ++k) prod *= std::sqrt(1.0 - z(k, j) * z(k, j));
      u(i, j) = z(i, j) * prod;
    }
    double prod = 1.0;
    for (int k = 0; k < j; ++k) prod *= std::sqrt(1.0 - z(k, j) * z(k, j));
    u(j, j) = prod;
  }
  return u;
}

// Recursive evaluation with the ratio form; singular where some z(i-1,j)
// is exactly zero, so callers must avoid that set.
inline MatrixXd recursive_form_u(const VectorXd& gamma, int G) {
  MatrixXd z = MatrixXd::Zero(G, G);
  int idx = 0;
  for (int j = 1; j < G; ++j) {
    for (int i = 0; i < j; ++i) z(i, j) = std::tanh(gamma[idx++]);
  }
  MatrixXd u = MatrixXd::Zero(G, G);
  u(0, 0) = 1.0;
  for (int j = 1; j < G; ++j) {
    u(0, j) = z(0, j);
    for (int i = 1; i < j; ++i) {
      u(i, j) = z(i, j) / z(i - 1, j) * u(i - 1, j) *
                std::sqrt(1.0 - z(i - 1, j) * z(i - 1, j));
    }
    u(j, j) = u(j - 1, j) / z(j - 1, j) * std::sqrt(1.0 - z(j - 1, j) * z(j - 1, j));
  }
  return u;
}

inline MatrixXd phi_from_u(const MatrixXd& u) {
  const int G = static_cast<int>(u.rows());
  MatrixXd phi = MatrixXd::Identity(G + 1, G + 1);
  phi.bottomRightCorner(G, G) = u.transpose() * u;
  return phi;
}

// Central finite differences of a scalar function, step 1e-6.
inline VectorXd finite_difference(const std::function<double(const VectorXd&)>& f,
                                  const VectorXd& x, double step = 1e-6) {
  VectorXd g(x.size());
  VectorXd xp = x;
  for (int i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    xp[i] = saved + step;
    const double fp = f(xp);
    xp[i] = saved - step;
    const double fm = f(xp);
    xp[i] = saved;
    g[i] = (fp - fm) / (2.0 * step);
  }
  return g;
}

inline double rel_error(const VectorXd& a, const VectorXd& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-8});
  return (a - b).norm() / scale;
}

// Brute force over every group permutation and every sign pattern of all
// columns, including the general one.
inline double brute_force_mse(const MatrixXd& hat, const MatrixXd& star) {
  const int K = static_cast<int>(hat.cols());
  const int G = K - 1;
  std::vector<int> perm(G);
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    for (int signs = 0; signs < (1 << K); ++signs) {
      MatrixXd permuted(star.rows(), K);
      permuted.col(0) = star.col(0);
      for (int g = 0; g < G; ++g) permuted.col(1 + g) = star.col(1 + perm[g]);
      for (int k = 0; k < K; ++k) {
        if (signs & (1 << k)) permuted.col(k) *= -1.0;
      }
      best = std::min(best, (hat - permuted).squaredNorm());
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / static_cast<double>(hat.rows() * K);
}

// ACC by exhaustive enumeration of the label permutations.
inline double brute_force_acc(const std::vector<std::vector<int>>& hat,
                              const std::vector<std::vector<int>>& star, int n_items) {
  const int G = static_cast<int>(star.size());
  std::vector<int> perm(G);
  std::iota(perm.begin(), perm.end(), 0);
  double best = 0.0;
  do {
    double total = 0.0;
    for (int g = 0; g < G; ++g) {
      std::vector<bool> in_star(n_items + 1, false), in_hat(n_items + 1, false);
      for (int item : star[g]) in_star[item] = true;
      for (int item : hat[perm[g]]) in_hat[item] = true;
      for (int item = 1; item <= n_items; ++item) {
        if (in_star[item] && in_hat[item]) total += 1.0;
        if (!in_star[item] && !in_hat[item]) total += 1.0;
      }
    }
    best = std::max(best, total / static_cast<double>(n_items * G));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// EMC by exhaustive enumeration.
inline int brute_force_emc(const std::vector<std::vector<int>>& hat,
                           const std::vector<std::vector<int>>& star) {
  const int G = static_cast<int>(star.size());
  std::vector<int> perm(G);
  std::iota(perm.begin(), perm.end(), 0);
  auto sorted = [](std::vector<int> v) {
    std::sort(v.begin(), v.end());
    return v;
  };
  do {
    bool all = true;
    for (int g = 0; g < G && all; ++g) {
      if (sorted(hat[perm[g]]) != sorted(star[g])) all = false;
    }
    if (all) return 1;
  } while (std::next_permutation(perm.begin(), perm.end()));
  return 0;
}

// Confirmatory maximum-likelihood fit with the zero pattern fixed by the
// given assignment (per item: group in 1..G). Free parameters: the general
// column, each item's own group loading, gamma, log psi. Independent of the
// ALM path; used to enumerate all structures at micro scale.
inline double confirmatory_loss(const bifactor::SampleCov& data,
                                const std::vector<int>& assignment, int n_groups,
                                int n_starts, std::uint64_t seed) {
  using namespace bifactor;
  const int J = data.J();
  const int K = n_groups + 1;
  const int n_gamma = n_groups * (n_groups - 1) / 2;
  const int dim = J + J + n_gamma + J;  // general | own group loading | gamma | log psi

  auto unpack = [&](const VectorXd& x) {
    FactorParams p;
    p.lambda = MatrixXd::Zero(J, K);
    for (int j = 0; j < J; ++j) {
      p.lambda(j, 0) = x[j];
      if (assignment[j] >= 1) p.lambda(j, assignment[j]) = x[J + j];
    }
    p.gamma = x.segment(2 * J, n_gamma);
    p.psi = x.segment(2 * J + n_gamma, J).array().exp();
    return p;
  };
  auto objective = [&](const VectorXd& x, double& f, VectorXd& grad) {
    const FactorParams p = unpack(x);
    if (!p.psi.allFinite()) return false;
    try {
      f = discrepancy(p, data);
    } catch (const SigmaNotPdError&) {
      return false;
    }
    // Forward differences would be too slow; use the analytic gradient via
    // augmented_gradient with no constraints and map back to the free slots.
    const Gradient g =
        augmented_gradient(p, zero_coefficients(J, 0, 0.0), ConstraintSet{}, data);
    grad.resize(dim);
    for (int j = 0; j < J; ++j) {
      grad[j] = g.lambda(j, 0);
      grad[J + j] = assignment[j] >= 1 ? g.lambda(j, assignment[j]) : 0.0;
    }
    grad.segment(2 * J, n_gamma) = g.gamma;
    grad.segment(2 * J + n_gamma, J) = g.psi.cwiseProduct(p.psi);
    return true;
  };

  double best = std::numeric_limits<double>::infinity();
  for (int s = 0; s < n_starts; ++s) {
    std::mt19937_64 rng(seed * 1315423911ull + static_cast<std::uint64_t>(s) + 1);
    std::normal_distribution<double> normal(0.0, 1.0);
    VectorXd x(dim);
    for (int i = 0; i < 2 * J; ++i) x[i] = normal(rng);
    for (int i = 0; i < n_gamma; ++i) x[2 * J + i] = 0.0;
    x.segment(2 * J + n_gamma, J) = (0.5 * data.S.diagonal()).array().log();
    LbfgsOptions options;
    options.max_iters = 400;
    options.grad_tol = 1e-7;
    const auto res = lbfgs_minimize(objective, x, options);
    best = std::min(best, res.f);
  }
  return best;
}

}  // namespace testsupport
