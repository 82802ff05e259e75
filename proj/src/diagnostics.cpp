#include "bifactor/diagnostics.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace bifactor {

namespace {

int n_groups_of(const MatrixXd& lambda) { return static_cast<int>(lambda.cols()) - 1; }

bool rank2(const MatrixXd& block, double rank_tol) {
  if (block.rows() < 2) return false;
  Eigen::JacobiSVD<MatrixXd> svd(block);
  const auto& sv = svd.singularValues();
  return sv.size() >= 2 && sv[1] > rank_tol * std::max(sv[0], 1e-300);
}

// Rows u, v of a two-column block are independent iff the 2x2 determinant is
// large relative to the row norms.
bool rows_independent(const Eigen::RowVector2d& u, const Eigen::RowVector2d& v,
                      double rank_tol) {
  const double det = u[0] * v[1] - u[1] * v[0];
  return std::abs(det) > rank_tol * u.norm() * v.norm();
}

int numerical_rank(const MatrixXd& m, double rank_tol) {
  if (m.rows() == 0 || m.cols() == 0) return 0;
  Eigen::ColPivHouseholderQR<MatrixXd> qr(m);
  qr.setThreshold(rank_tol);
  return static_cast<int>(qr.rank());
}

// Greedy certificate search: build a full-column-rank row set, then require
// the remaining rows to be full rank too.
bool disjoint_split_found(const MatrixXd& lambda_minus_row, double rank_tol,
                          int restarts, std::uint64_t seed) {
  const int rows = static_cast<int>(lambda_minus_row.rows());
  const int cols = static_cast<int>(lambda_minus_row.cols());
  if (rows < 2 * cols) return false;
  std::vector<int> order(rows);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  for (int attempt = 0; attempt <= restarts; ++attempt) {
    if (attempt > 0) std::shuffle(order.begin(), order.end(), rng);
    std::vector<int> first_set;
    std::vector<char> taken(rows, 0);
    MatrixXd acc(0, cols);
    for (int idx : order) {
      if (static_cast<int>(first_set.size()) == cols) break;
      MatrixXd candidate(acc.rows() + 1, cols);
      candidate.topRows(acc.rows()) = acc;
      candidate.bottomRows(1) = lambda_minus_row.row(idx);
      if (numerical_rank(candidate, rank_tol) > numerical_rank(acc, rank_tol)) {
        acc = std::move(candidate);
        first_set.push_back(idx);
        taken[idx] = 1;
      }
    }
    if (static_cast<int>(first_set.size()) < cols) continue;
    MatrixXd rest(rows - cols, cols);
    int r = 0;
    for (int idx = 0; idx < rows; ++idx) {
      if (!taken[idx]) rest.row(r++) = lambda_minus_row.row(idx);
    }
    if (numerical_rank(rest, rank_tol) == cols) return true;
  }
  return false;
}

}  // namespace

std::pair<std::vector<std::vector<int>>, std::vector<int>> compute_q_h(
    const MatrixXd& lambda, const std::vector<int>& structure,
    const DiagnosticTolerances& tol) {
  const int J = static_cast<int>(lambda.rows());
  const int G = n_groups_of(lambda);
  if (static_cast<int>(structure.size()) != J) {
    throw DimensionError("structure must assign every item");
  }
  for (int j = 0; j < J; ++j) {
    if (structure[j] < 0 || structure[j] > G) {
      throw StructureMismatchError("group id out of range");
    }
    for (int g = 1; g <= G; ++g) {
      if (g != structure[j] && std::abs(lambda(j, g)) > tol.zero_tol) {
        throw StructureMismatchError("loading outside the declared structure");
      }
    }
  }

  std::vector<std::vector<int>> q_sets(G);
  std::vector<int> h_set;
  for (int g = 1; g <= G; ++g) {
    std::vector<int> members;
    for (int j = 0; j < J; ++j) {
      if (structure[j] == g) members.push_back(j);
    }
    for (int j : members) {
      if (std::abs(lambda(j, g)) > tol.zero_tol) q_sets[g - 1].push_back(j + 1);
    }
    MatrixXd block(members.size(), 2);
    for (size_t r = 0; r < members.size(); ++r) {
      block(r, 0) = lambda(members[r], 0);
      block(r, 1) = lambda(members[r], g);
    }
    if (rank2(block, tol.rank_tol)) h_set.push_back(g);
  }
  return {q_sets, h_set};
}

IdentifiabilityReport check_conditions(const MatrixXd& lambda,
                                       const std::vector<int>& structure,
                                       const DiagnosticTolerances& tol,
                                       const std::optional<MatrixXd>& phi) {
  IdentifiabilityReport report;
  report.tolerances = tol;
  auto [q_sets, h_set] = compute_q_h(lambda, structure, tol);
  report.q_sets = q_sets;
  report.h_set = h_set;
  const int J = static_cast<int>(lambda.rows());
  const int G = n_groups_of(lambda);

  // Condition: at least two rank-2 groups plus one witnessing group with
  // three nonzero loadings whose rows are pairwise independent.
  report.condition2 = false;
  report.condition2_witness = 0;
  if (static_cast<int>(h_set.size()) >= 2) {
    for (int g : h_set) {
      if (static_cast<int>(q_sets[g - 1].size()) < 3) continue;
      std::vector<int> members;
      for (int j = 0; j < J; ++j) {
        if (structure[j] == g) members.push_back(j);
      }
      bool all_independent = true;
      for (size_t a = 0; a < members.size() && all_independent; ++a) {
        for (size_t b = a + 1; b < members.size() && all_independent; ++b) {
          Eigen::RowVector2d u(lambda(members[a], 0), lambda(members[a], g));
          Eigen::RowVector2d v(lambda(members[b], 0), lambda(members[b], g));
          if (!rows_independent(u, v, tol.rank_tol)) all_independent = false;
        }
      }
      if (all_independent) {
        report.condition2 = true;
        report.condition2_witness = g;
        break;
      }
    }
  }

  // Cardinality condition: |Q_g| >= 3 everywhere and at least three rank-2
  // groups.
  report.condition3 = static_cast<int>(h_set.size()) >= 3;
  for (int g = 1; g <= G; ++g) {
    if (static_cast<int>(q_sets[g - 1].size()) < 3) report.condition3 = false;
  }

  // Necessary condition: |H| >= 2, |Q_g| >= 2 everywhere, and |Q_g| >= 3 for
  // group factors uncorrelated with every other group factor (only checkable
  // when phi is supplied).
  report.condition5 = static_cast<int>(h_set.size()) >= 2;
  for (int g = 1; g <= G; ++g) {
    size_t need = 2;
    if (phi.has_value() && G >= 2) {
      double max_corr = 0.0;
      for (int g2 = 1; g2 <= G; ++g2) {
        if (g2 != g) max_corr = std::max(max_corr, std::abs((*phi)(g, g2)));
      }
      if (max_corr <= tol.phi_zero_tol) need = 3;
    }
    if (q_sets[g - 1].size() < need) report.condition5 = false;
  }

  // Row-deletion certificate for separating the low-rank and diagonal parts.
  report.anderson_rubin_rows.assign(J, false);
  for (int j = 0; j < J; ++j) {
    MatrixXd rest(J - 1, lambda.cols());
    rest.topRows(j) = lambda.topRows(j);
    rest.bottomRows(J - 1 - j) = lambda.bottomRows(J - 1 - j);
    report.anderson_rubin_rows[j] = disjoint_split_found(
        rest, tol.rank_tol, tol.search_restarts, 0x414e44ull + static_cast<std::uint64_t>(j));
  }
  return report;
}

}  // namespace bifactor
