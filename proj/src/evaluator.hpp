// Internal evaluation core for the discrepancy and the augmented Lagrangian;
// shared by the public objective functions and the ALM solver.
#pragma once

#include "bifactor/correlation.hpp"
#include "bifactor/objective.hpp"
#include "bifactor/types.hpp"

namespace bifactor::detail {

// Log-determinant of a symmetric positive-definite matrix; throws
// NotPositiveDefiniteError otherwise.
double log_det_spd(const MatrixXd& m);

// Evaluates the augmented objective (beta may be null for the bare fit term)
// and, when grad is non-null, its analytic gradient in the original
// parameters. Returns false when the implied covariance is not positive
// definite; outputs are unspecified in that case.
bool eval_auglag(const SampleCov& data, double log_det_s, const FactorParams& params,
                 const MatrixXd* beta, double c, const ConstraintSet& constraints,
                 double& f, Gradient* grad);

}  // namespace bifactor::detail
