// Domain types shared across the library: sample covariance input, the
// factor-model parameter block, constraint pair sets, and factor hierarchies.
#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace bifactor {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct DimensionError : Error {
  using Error::Error;
};

// Thrown when the implied covariance fails a symmetric positive-definite
// factorization; the inner solver catches this condition via the
// non-throwing evaluation path and backtracks instead.
struct SigmaNotPdError : Error {
  using Error::Error;
};

struct NotPositiveDefiniteError : Error {
  using Error::Error;
};

struct AsymmetricMatrixError : Error {
  using Error::Error;
};

struct AllStartsFailedError : Error {
  using Error::Error;
};

struct StructureMismatchError : Error {
  using Error::Error;
};

struct MalformedTreeError : Error {
  using Error::Error;
};

// Sample covariance matrix of J observed variables plus the sample size the
// likelihood is scaled by. Construct through make_sample_cov, which enforces
// symmetry (1e-10 relative), positive definiteness, and N >= 2.
struct SampleCov {
  MatrixXd S;
  std::int64_t N = 0;

  int J() const { return static_cast<int>(S.rows()); }
};

SampleCov make_sample_cov(MatrixXd S, std::int64_t N);

// Parameters of the (extended) bi-factor / hierarchical factor model.
// lambda is J x K with the general factor in column 0. gamma holds the
// unconstrained correlation parameters (empty means the factor covariance is
// fixed to the identity). psi holds the J residual variances, all > 0.
struct FactorParams {
  MatrixXd lambda;
  VectorXd gamma;
  VectorXd psi;

  int J() const { return static_cast<int>(lambda.rows()); }
  int n_factors() const { return static_cast<int>(lambda.cols()); }
  int n_groups() const { return n_factors() - 1; }
};

// Throws DimensionError unless the three blocks are mutually consistent:
// psi has J entries, gamma has either 0 or (K-1)(K-2)/2 entries, psi > 0.
void validate_params(const FactorParams& params);

// Unordered pair of group-factor columns of lambda (0-based; column 0 is the
// general factor and never appears). first < second, both >= 1.
struct ColumnPair {
  int first = 0;
  int second = 0;

  friend bool operator==(const ColumnPair&, const ColumnPair&) = default;
};

// The elementwise products lambda(j, p.first) * lambda(j, p.second) must
// vanish for every row j and every pair p.
struct ConstraintSet {
  std::vector<ColumnPair> pairs;

  int size() const { return static_cast<int>(pairs.size()); }
};

void validate_constraints(const ConstraintSet& constraints, int n_factors);

// Rooted factor hierarchy. Factors are numbered 1..K, factor 1 is the root,
// and factor f corresponds to column f-1 of lambda. parent[f] gives the
// parent id of factor f, with parent[1] == 0.
struct HierarchyTree {
  std::vector<int> parent;  // 1-based; parent[0] unused

  int n_factors() const { return static_cast<int>(parent.size()) - 1; }
  std::vector<int> children(int f) const;
  bool is_ancestor(int a, int b) const;  // strict: a != b
  int depth(int f) const;                // root has depth 0
  int max_leaf_depth() const;
};

// Builds a tree from (child, parent) edges; the root must be listed as
// (1, 0). Throws MalformedTreeError on cycles, missing nodes, duplicate
// parents, or a root other than 1.
HierarchyTree make_tree(const std::vector<std::pair<int, int>>& edges);

// Two-layer tree: root 1 with G leaf factors. Its constraint pairs coincide
// with the bi-factor ones.
HierarchyTree two_layer_tree(int n_groups);

// All permutations of {1..K} that fix the root and preserve the parent
// relation. The identity is always first.
std::vector<std::vector<int>> tree_automorphisms(const HierarchyTree& tree);

bool is_valid_correlation_matrix(const MatrixXd& phi, double tol = 1e-10);

}  // namespace bifactor
