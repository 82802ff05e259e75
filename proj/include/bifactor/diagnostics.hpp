// Runnable identifiability diagnostics: the Q_g / H sets, the cardinality
// and rank conditions built from them, and the row-deletion disjoint
// submatrix rank test.
#pragma once

#include "bifactor/types.hpp"

#include <optional>
#include <vector>

namespace bifactor {

struct DiagnosticTolerances {
  double zero_tol = 1e-6;   // membership threshold for "nonzero" loadings
  double rank_tol = 1e-8;   // relative threshold for rank-2 tests
  double phi_zero_tol = 1e-6;
  int search_restarts = 50; // randomized restarts of the row-split search
};

struct IdentifiabilityReport {
  std::vector<std::vector<int>> q_sets;  // per group, 1-based item ids
  std::vector<int> h_set;                // groups (1-based) with rank-2 blocks
  bool condition2 = false;
  int condition2_witness = 0;            // witnessing group, 0 if none
  bool condition3 = false;
  bool condition5 = false;
  // Per item: true when two disjoint full-column-rank submatrices of lambda
  // with that row deleted were found. The search is greedy with randomized
  // restarts, so false means "no certificate found", not a proof of failure.
  std::vector<bool> anderson_rubin_rows;
  DiagnosticTolerances tolerances;
};

// structure: per item, group id in 1..G (0 = unassigned; such items must
// have all group loadings below zero_tol). Throws StructureMismatchError if
// lambda has an above-tolerance entry outside the declared structure.
// Q_g collects the items of group g whose own group loading is nonzero; H
// collects the groups whose [general, group] block has numerical rank 2.
std::pair<std::vector<std::vector<int>>, std::vector<int>> compute_q_h(
    const MatrixXd& lambda, const std::vector<int>& structure,
    const DiagnosticTolerances& tol = {});

// Evaluates the cardinality/rank conditions on top of compute_q_h. The
// correlation matrix is optional; it only sharpens the |Q_g| >= 3 clause for
// group factors uncorrelated with every other group factor, and without it
// no factor is treated as isolated.
IdentifiabilityReport check_conditions(const MatrixXd& lambda,
                                       const std::vector<int>& structure,
                                       const DiagnosticTolerances& tol = {},
                                       const std::optional<MatrixXd>& phi = std::nullopt);

}  // namespace bifactor
