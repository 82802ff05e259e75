#include "bifactor/correlation.hpp"

#include <algorithm>
#include <cmath>

namespace bifactor {

namespace {

// Keep z away from +-1 so the square roots stay positive at extreme gamma.
constexpr double kZBound = 1.0 - 1e-12;

double clamped_tanh(double gamma) {
  const double z = std::tanh(gamma);
  return std::clamp(z, -kZBound, kZBound);
}

}  // namespace

int gamma_index(int row, int col) { return col * (col - 1) / 2 + row; }

namespace detail {

CholeskyFactor build_cholesky_factor(const VectorXd& gamma, int n_groups) {
  const int G = n_groups;
  CholeskyFactor f;
  f.U = MatrixXd::Zero(G, G);
  f.prefix = MatrixXd::Zero(G + 1, G);
  f.z = MatrixXd::Zero(G, G);
  for (int j = 0; j < G; ++j) {
    f.prefix(0, j) = 1.0;
    for (int i = 0; i < j; ++i) {
      const double z = clamped_tanh(gamma[gamma_index(i, j)]);
      f.z(i, j) = z;
      f.U(i, j) = z * f.prefix(i, j);
      f.prefix(i + 1, j) = f.prefix(i, j) * std::sqrt(1.0 - z * z);
    }
    f.U(j, j) = f.prefix(j, j);
  }
  return f;
}

VectorXd dU_column(const CholeskyFactor& f, int i, int j) {
  const int G = static_cast<int>(f.U.rows());
  VectorXd d = VectorXd::Zero(G);
  const double z = f.z(i, j);
  d[i] = f.prefix(i, j) * (1.0 - z * z);
  for (int k = i + 1; k <= j; ++k) d[k] = -z * f.U(k, j);
  return d;
}

}  // namespace detail

MatrixXd build_phi(const VectorXd& gamma, int n_groups) {
  if (n_groups < 1) throw DimensionError("need at least one group factor");
  if (gamma.size() != gamma_length(n_groups)) {
    throw DimensionError("gamma length does not match G(G-1)/2");
  }
  if (!gamma.allFinite()) throw Error("gamma must be finite");
  const auto f = detail::build_cholesky_factor(gamma, n_groups);
  MatrixXd phi = MatrixXd::Identity(n_groups + 1, n_groups + 1);
  phi.bottomRightCorner(n_groups, n_groups) = f.U.transpose() * f.U;
  phi.diagonal().setOnes();  // exact unit diagonal despite rounding
  return phi;
}

std::vector<MatrixXd> phi_jacobian(const VectorXd& gamma, int n_groups) {
  if (n_groups < 1) throw DimensionError("need at least one group factor");
  if (gamma.size() != gamma_length(n_groups)) {
    throw DimensionError("gamma length does not match G(G-1)/2");
  }
  const int G = n_groups;
  const auto f = detail::build_cholesky_factor(gamma, G);
  std::vector<MatrixXd> slices;
  slices.reserve(gamma.size());
  for (int j = 0; j < G; ++j) {
    for (int i = 0; i < j; ++i) {
      // dPhi has nonzeros only in row/column 1+j of the group block:
      // d(U^T U) = dU_j^T U e_j^T + e_j U^T dU_j with dU_j supported on
      // column j.
      const VectorXd w = f.U.transpose() * detail::dU_column(f, i, j);
      MatrixXd slice = MatrixXd::Zero(G + 1, G + 1);
      for (int a = 0; a < G; ++a) {
        slice(1 + a, 1 + j) += w[a];
        slice(1 + j, 1 + a) += w[a];
      }
      slice(1 + j, 1 + j) = 2.0 * w[j];
      slice.diagonal()(1 + j) = 0.0;  // unit diagonal is constant in gamma
      slices.push_back(std::move(slice));
    }
  }
  return slices;
}

}  // namespace bifactor
