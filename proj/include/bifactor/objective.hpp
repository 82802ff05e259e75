// Normal-theory discrepancy between the implied and sample covariance, the
// augmented Lagrangian objective built on top of it, and analytic gradients.
#pragma once

#include "bifactor/types.hpp"

namespace bifactor {

// Multiplier matrix (one row per item, one column per constraint pair) and
// penalty coefficient of the augmented Lagrangian.
struct AugLagCoefficients {
  MatrixXd beta;  // J x |pairs|
  double c = 1.0;
};

AugLagCoefficients zero_coefficients(int n_items, int n_pairs, double c);

// N * (log det Sigma + tr(S Sigma^-1) - log det S - J) with
// Sigma = Lambda Phi Lambda^T + diag(psi). Nonnegative, zero iff Sigma == S.
// Throws SigmaNotPdError when Sigma is not positive definite.
double discrepancy(const FactorParams& params, const SampleCov& data);

// Matrix of products lambda(j, k) * lambda(j, k') with one column per
// constraint pair, in pair order.
MatrixXd constraint_residuals(const MatrixXd& lambda, const ConstraintSet& constraints);

// discrepancy + sum beta .* r + c * sum r^2 over the residual matrix r.
double augmented_objective(const FactorParams& params, const AugLagCoefficients& coeffs,
                           const ConstraintSet& constraints, const SampleCov& data);

struct Gradient {
  MatrixXd lambda;  // J x K
  VectorXd gamma;
  VectorXd psi;
};

// Analytic gradient of augmented_objective in the original parameters
// (psi, not its log). The fit term uses dl/dSigma = N (Sigma^-1 -
// Sigma^-1 S Sigma^-1) with the chain rule through Lambda, psi, and the
// correlation parameterization; the multiplier and penalty terms
// differentiate the residual products directly.
Gradient augmented_gradient(const FactorParams& params, const AugLagCoefficients& coeffs,
                            const ConstraintSet& constraints, const SampleCov& data);

}  // namespace bifactor
