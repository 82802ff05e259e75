// Unconstrained parameterization of the factor correlation matrix.
//
// A vector gamma of length G(G-1)/2 maps through z = tanh(gamma) to an upper
// triangular G x G matrix U with unit-norm columns, and the correlation
// matrix of the G+1 factors is blockdiag(1, U^T U): the general factor stays
// uncorrelated with every group factor while the group block ranges over all
// positive-definite correlation matrices.
#pragma once

#include "bifactor/types.hpp"

namespace bifactor {

inline int gamma_length(int n_groups) { return n_groups * (n_groups - 1) / 2; }

// gamma packs the strict upper triangle of the G x G matrix z column by
// column: (0,1), (0,2), (1,2), (0,3), ... in 0-based (row, col) indices.
int gamma_index(int row, int col);

// Returns the (G+1) x (G+1) correlation matrix for the given gamma.
// G >= 1; gamma must have length G(G-1)/2 (empty for G = 1).
MatrixXd build_phi(const VectorXd& gamma, int n_groups);

// Derivative of build_phi with respect to each gamma entry, in pack order.
// Every slice is symmetric with zero diagonal and zero first row/column.
std::vector<MatrixXd> phi_jacobian(const VectorXd& gamma, int n_groups);

// Internal pieces shared with the objective gradient.
namespace detail {

// U (upper triangular, unit-norm columns) and the prefix products
// prefix(k, j) = prod_{m<k} sqrt(1 - z(m,j)^2), with prefix(0, j) = 1.
struct CholeskyFactor {
  MatrixXd U;
  MatrixXd prefix;
  MatrixXd z;
};

CholeskyFactor build_cholesky_factor(const VectorXd& gamma, int n_groups);

// d U.col(j) / d gamma(i,j) for one gamma entry; zero outside column j.
VectorXd dU_column(const CholeskyFactor& f, int i, int j);

}  // namespace detail

}  // namespace bifactor
