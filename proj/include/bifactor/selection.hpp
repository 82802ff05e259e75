// BIC-based choice of the number of group factors, plus the echelon-
// constrained exploratory factor analysis baseline it is compared against.
#pragma once

#include "bifactor/alm.hpp"
#include "bifactor/types.hpp"

#include <optional>
#include <vector>

namespace bifactor {

// l_G + (G-1) G log(N) / 2. The penalty counts only the free correlation
// parameters; the loading and uniqueness counts do not depend on G.
double bic_bifactor(double loss, int n_groups, std::int64_t N);

// l_K^e + (J K - K(K-1)/2) log(N) for the K-factor orthogonal model.
double bic_efa(double loss, int n_factors, int n_items, std::int64_t N);

struct BicSweepResult {
  std::vector<int> candidates;      // G values, in the order evaluated
  std::vector<double> losses;       // NaN where the candidate failed
  std::vector<double> bics;
  std::vector<bool> ok;
  std::vector<std::optional<FitResult>> fits;
  int chosen = 0;                   // argmin BIC; ties toward smaller G
};

// Fits each candidate G with bi-factor constraints via multi_start_fit and
// picks the BIC minimizer. Candidates whose starts all fail are excluded
// from the argmin but reported. Throws AllStartsFailedError only when every
// candidate fails.
BicSweepResult select_g(const SampleCov& data, const std::vector<int>& candidates,
                        const AlmConfig& config);

struct EfaFit {
  MatrixXd lambda;  // J x K, echelon zeros in place
  VectorXd psi;
  double loss = 0.0;
  bool converged = false;
};

// Maximum-likelihood exploratory factor analysis with K orthogonal factors,
// identified by the fixed zeros lambda(i, j) = 0 for rows i = 2..K-1 and
// columns j > i (1-based). Best of config.n_starts random starts.
EfaFit efa_fit(const SampleCov& data, int n_factors, const AlmConfig& config);

struct EfaSweepResult {
  std::vector<int> candidates_g;    // G = K - 1 values
  std::vector<double> losses;
  std::vector<double> bics;
  std::vector<bool> ok;
  int chosen_g = 0;
};

// Selects K = G + 1 over the EFA model by bic_efa and reports G = K - 1.
EfaSweepResult select_g_efa(const SampleCov& data, const std::vector<int>& candidates_g,
                            const AlmConfig& config);

}  // namespace bifactor
