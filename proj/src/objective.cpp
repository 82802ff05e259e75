#include "bifactor/objective.hpp"

#include "bifactor/correlation.hpp"
#include "evaluator.hpp"

#include <Eigen/Cholesky>

#include <cmath>

namespace bifactor {

namespace detail {

double log_det_spd(const MatrixXd& m) {
  Eigen::LLT<MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefiniteError("matrix is not positive definite");
  }
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

bool eval_auglag(const SampleCov& data, double log_det_s, const FactorParams& params,
                 const MatrixXd* beta, double c, const ConstraintSet& constraints,
                 double& f, Gradient* grad) {
  const int J = params.J();
  const int K = params.n_factors();
  const MatrixXd& lambda = params.lambda;

  const bool identity_phi = params.gamma.size() == 0;
  detail::CholeskyFactor chol_factor;
  MatrixXd phi;
  if (identity_phi) {
    phi = MatrixXd::Identity(K, K);
  } else {
    chol_factor = detail::build_cholesky_factor(params.gamma, K - 1);
    phi = MatrixXd::Identity(K, K);
    phi.bottomRightCorner(K - 1, K - 1) = chol_factor.U.transpose() * chol_factor.U;
    phi.diagonal().setOnes();
  }

  if (!lambda.allFinite() || !params.psi.allFinite() || (params.psi.array() <= 0.0).any()) {
    return false;
  }

  MatrixXd sigma = lambda * phi * lambda.transpose();
  sigma.diagonal() += params.psi;
  Eigen::LLT<MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) return false;

  const double log_det_sigma = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const MatrixXd sigma_inv = llt.solve(MatrixXd::Identity(J, J));
  const double trace_term = (data.S.cwiseProduct(sigma_inv)).sum();
  const double n = static_cast<double>(data.N);
  f = n * (log_det_sigma + trace_term - log_det_s - static_cast<double>(J));

  // Multiplier and penalty terms on the residual products.
  if (beta != nullptr || c != 0.0) {
    for (int p = 0; p < constraints.size(); ++p) {
      const auto [a, b] = constraints.pairs[p];
      for (int j = 0; j < J; ++j) {
        const double r = lambda(j, a) * lambda(j, b);
        if (beta != nullptr) f += (*beta)(j, p) * r;
        f += c * r * r;
      }
    }
  }
  if (!std::isfinite(f)) return false;
  if (grad == nullptr) return true;

  const MatrixXd w = n * (sigma_inv - sigma_inv * data.S * sigma_inv);
  grad->lambda = 2.0 * w * lambda * phi;
  grad->psi = w.diagonal();
  grad->gamma = VectorXd::Zero(params.gamma.size());
  if (!identity_phi) {
    const int G = K - 1;
    const MatrixXd m = lambda.transpose() * w * lambda;  // K x K, symmetric
    int idx = 0;
    for (int j = 0; j < G; ++j) {
      for (int i = 0; i < j; ++i) {
        const VectorXd dw = chol_factor.U.transpose() * detail::dU_column(chol_factor, i, j);
        double acc = 0.0;
        for (int a = 0; a < G; ++a) {
          if (a != j) acc += m(1 + j, 1 + a) * dw[a];
        }
        grad->gamma[idx++] = 2.0 * acc;
      }
    }
  }

  for (int p = 0; p < constraints.size(); ++p) {
    const auto [a, b] = constraints.pairs[p];
    for (int j = 0; j < J; ++j) {
      const double r = lambda(j, a) * lambda(j, b);
      const double coeff = (beta != nullptr ? (*beta)(j, p) : 0.0) + 2.0 * c * r;
      grad->lambda(j, a) += coeff * lambda(j, b);
      grad->lambda(j, b) += coeff * lambda(j, a);
    }
  }
  return true;
}

}  // namespace detail

AugLagCoefficients zero_coefficients(int n_items, int n_pairs, double c) {
  return AugLagCoefficients{MatrixXd::Zero(n_items, n_pairs), c};
}

namespace {

void check_shapes(const FactorParams& params, const SampleCov& data) {
  validate_params(params);
  if (params.J() != data.J()) {
    throw DimensionError("parameter and data dimensions disagree");
  }
}

}  // namespace

double discrepancy(const FactorParams& params, const SampleCov& data) {
  check_shapes(params, data);
  const double log_det_s = detail::log_det_spd(data.S);
  double f = 0.0;
  ConstraintSet none;
  if (!detail::eval_auglag(data, log_det_s, params, nullptr, 0.0, none, f, nullptr)) {
    throw SigmaNotPdError("implied covariance is not positive definite");
  }
  return f;
}

MatrixXd constraint_residuals(const MatrixXd& lambda, const ConstraintSet& constraints) {
  validate_constraints(constraints, static_cast<int>(lambda.cols()));
  MatrixXd r(lambda.rows(), constraints.size());
  for (int p = 0; p < constraints.size(); ++p) {
    const auto [a, b] = constraints.pairs[p];
    r.col(p) = lambda.col(a).cwiseProduct(lambda.col(b));
  }
  return r;
}

double augmented_objective(const FactorParams& params, const AugLagCoefficients& coeffs,
                           const ConstraintSet& constraints, const SampleCov& data) {
  check_shapes(params, data);
  validate_constraints(constraints, params.n_factors());
  if (coeffs.beta.rows() != params.J() || coeffs.beta.cols() != constraints.size()) {
    throw DimensionError("beta must be J x |pairs|");
  }
  const double log_det_s = detail::log_det_spd(data.S);
  double f = 0.0;
  if (!detail::eval_auglag(data, log_det_s, params, &coeffs.beta, coeffs.c, constraints, f,
                           nullptr)) {
    throw SigmaNotPdError("implied covariance is not positive definite");
  }
  return f;
}

Gradient augmented_gradient(const FactorParams& params, const AugLagCoefficients& coeffs,
                            const ConstraintSet& constraints, const SampleCov& data) {
  check_shapes(params, data);
  validate_constraints(constraints, params.n_factors());
  if (coeffs.beta.rows() != params.J() || coeffs.beta.cols() != constraints.size()) {
    throw DimensionError("beta must be J x |pairs|");
  }
  const double log_det_s = detail::log_det_spd(data.S);
  double f = 0.0;
  Gradient grad;
  if (!detail::eval_auglag(data, log_det_s, params, &coeffs.beta, coeffs.c, constraints, f,
                           &grad)) {
    throw SigmaNotPdError("implied covariance is not positive definite");
  }
  return grad;
}

}  // namespace bifactor
