// Augmented Lagrangian method for exact exploratory bi-factor and
// hierarchical factor analysis: inner unconstrained solves, multiplier and
// penalty updates, the two-part stopping rule, structure extraction, and
// multi-start orchestration.
#pragma once

#include "bifactor/lbfgs.hpp"
#include "bifactor/objective.hpp"
#include "bifactor/types.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

namespace bifactor {

struct AlmConfig {
  double c0 = 1.0;           // initial penalty coefficient
  double c_theta = 0.25;     // residual shrink ratio that keeps the penalty
  double c_sigma = 10.0;     // penalty multiplier when residuals stall
  double delta1 = 1e-2;      // normalized parameter-change tolerance
  double delta2 = 1e-2;      // structure tolerance (h-criterion and extraction)
  int t_max = 1000;          // outer-iteration cap per restart
  int inner_max_iters = 500;
  double inner_grad_tol = 1e-6;
  int n_starts = 50;
  std::uint64_t seed = 0;
  int max_restarts = 3;      // warm restarts per start before giving up
  bool record_trace = false;
  int n_threads = 0;         // 0: BIFACTOR_THREADS env var, then all cores
};

// The structural hypothesis a fit enforces: number of factor columns, the
// product constraints, whether the factor covariance is fixed to the
// identity, which order statistic the h-criterion uses, and how deep each
// non-root column sits in the factor hierarchy (all 1 for bi-factor).
struct ModelStructure {
  int n_factors = 0;
  ConstraintSet constraints;
  bool identity_phi = false;
  int h_order = 2;
  std::vector<int> column_depth;  // per column 1..K-1
};

ModelStructure bifactor_structure(int n_groups);
ModelStructure hierarchy_structure(const HierarchyTree& tree);

// Per outer-iteration log, kept only when AlmConfig::record_trace is set.
struct IterationRecord {
  int t = 0;
  double c = 0.0;                // penalty coefficient used at this iteration
  double residual_norm = 0.0;    // Frobenius norm of the residual matrix
  double param_change = 0.0;     // normalized change from the previous iterate
  double h_value = 0.0;          // max over rows of the h-order statistic
  MatrixXd residuals;
  MatrixXd beta_before;
  MatrixXd beta_after;
};

struct FitResult {
  FactorParams params;
  MatrixXd phi;
  double loss = std::numeric_limits<double>::quiet_NaN();
  // Per item: group id in 1..G (0 = unassigned). For hierarchical fits this
  // holds the deepest non-root factor id minus one; see factor_sets for the
  // full per-factor membership.
  std::vector<int> structure;
  std::vector<std::vector<int>> factor_sets;  // per factor 1..K, 1-based items
  bool converged = false;
  bool exact_structure = false;  // no row has two loadings above delta2
  int outer_iters = 0;           // summed over restarts
  int restarts_used = 0;
  double h_max = std::numeric_limits<double>::quiet_NaN();
  double final_param_change = std::numeric_limits<double>::quiet_NaN();
  int start_index = -1;
  std::vector<IterationRecord> trace;
};

// Second-largest (or h_order-th largest) |group loading| per row, maximized
// over rows; the distance of lambda from the exact structure set.
double structure_criterion(const MatrixXd& lambda, int h_order);

struct ExtractedStructure {
  std::vector<int> assignment;  // per item, 0 = unassigned
  bool exact = true;            // false if some row exceeds delta2 twice
};

// Item j belongs to group g iff |lambda(j, g)| > delta2 (group columns only).
// Rows with several columns above delta2 are assigned to the largest one and
// flagged non-exact.
ExtractedStructure extract_structure(const MatrixXd& lambda, double delta2);

// Depth-aware variant for hierarchical fits: the assignment is the deepest
// column above delta2 (an item's leaf factor), and a row is non-exact only
// when two columns of the same depth exceed delta2. With all depths equal to
// 1 this reduces to extract_structure.
ExtractedStructure extract_structure(const MatrixXd& lambda, double delta2,
                                     const std::vector<int>& column_depth);

// Per-factor item sets {j : |lambda(j, k-1)| > delta2} for k = 1..K.
std::vector<std::vector<int>> extract_factor_sets(const MatrixXd& lambda, double delta2);

// One inner solve of the augmented Lagrangian subproblem. init must satisfy
// the positive-definiteness precondition (alm_fit inflates psi if needed).
LbfgsResult inner_minimize(const ObjectiveFn& objective, const Eigen::VectorXd& init,
                           const AlmConfig& config);

FitResult alm_fit(const SampleCov& data, const ModelStructure& model,
                  const AlmConfig& config, const FactorParams& init);

// Draws the random starting point for start index `index`: lambda entries
// i.i.d. standard normal, gamma = 0, psi = diag(S)/2.
FactorParams random_start(const SampleCov& data, const ModelStructure& model,
                          std::uint64_t seed, int index);

// Runs alm_fit from n_starts seeded random inits (possibly in parallel) and
// returns the converged result with the smallest discrepancy, ties broken by
// start index. Throws AllStartsFailedError when no start converges.
FitResult multi_start_fit(const SampleCov& data, const ModelStructure& model,
                          const AlmConfig& config);

}  // namespace bifactor
