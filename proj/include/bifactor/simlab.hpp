// Ground-truth generation, multivariate normal sampling, structure-recovery
// metrics, and the replication runner behind the simulation studies.
#pragma once

#include "bifactor/alm.hpp"
#include "bifactor/selection.hpp"
#include "bifactor/types.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace bifactor {

struct TruthModel {
  MatrixXd lambda;                       // J x K
  MatrixXd phi;                          // K x K
  VectorXd psi;                          // identity in all studies
  std::vector<std::vector<int>> groups;  // per factor/group, 1-based items
  std::optional<HierarchyTree> hierarchy;

  MatrixXd implied_sigma() const;
  int J() const { return static_cast<int>(lambda.rows()); }
  int n_factors() const { return static_cast<int>(lambda.cols()); }
};

// Interleaved groups B_g = {g, g+G, ...}; general loadings i.i.d. U(0,1),
// group loadings sign(x)(0.1 + 2|x|) with x standard normal, gamma i.i.d.
// N(0, 1/4), psi = 1. Requires G | J.
TruthModel generate_bifactor_truth(int n_items, int n_groups, std::uint64_t seed);

// Whether sibling blocks of the three-layer hierarchy share their boundary
// item (as the block list is printed) or split it half-open. The studies use
// kHalfOpen; kSharedBoundary makes the truth itself violate the constraints
// on boundary rows.
enum class HierBoundary { kSharedBoundary, kHalfOpen };

// Three-layer hierarchy of seven factors (root; two mid factors; four leaf
// factors) over J items, J divisible by 4. Factor covariance is the
// identity; loadings as in the bi-factor generator.
TruthModel generate_hier_truth(int n_items, std::uint64_t seed,
                               HierBoundary boundary = HierBoundary::kSharedBoundary);

// Sample covariance (divisor N, centered at the sample mean) of N draws from
// a zero-mean normal with the truth's implied covariance. Requires N > J.
SampleCov sample_covariance(const TruthModel& truth, std::int64_t N, std::uint64_t seed);

// min over group-column permutations and per-column sign flips of
// ||lambda_hat - lambda_star P D||_F^2 / (J K). Exhaustive over permutations
// up to G = 8, optimal assignment beyond (the column costs are separable).
double mse_lambda(const MatrixXd& lambda_hat, const MatrixXd& lambda_star);

// 1 iff some relabeling of the estimated groups reproduces every true group
// exactly.
int emc(const std::vector<std::vector<int>>& groups_hat,
        const std::vector<std::vector<int>>& groups_star, int n_items);

// Average over groups and items of correctly recovered memberships and
// non-memberships, maximized over relabelings via assignment matching.
double acc(const std::vector<std::vector<int>>& groups_hat,
           const std::vector<std::vector<int>>& groups_star, int n_items);

std::vector<std::vector<int>> structure_to_groups(const std::vector<int>& structure,
                                                  int n_groups);

// EMC/ACC over the automorphisms of the hierarchy tree (8 for the
// three-layer tree of seven factors). Takes the per-factor item sets for all
// factors; the match itself runs over the non-root factors, whose columns
// the constraints and the threshold rule govern.
std::pair<int, double> hier_match_metrics(const std::vector<std::vector<int>>& sets_hat,
                                          const TruthModel& truth);

enum class StudyKind { kStudy1, kStudy2, kHier };

struct StudySpec {
  StudyKind kind = StudyKind::kStudy1;
  int n_items = 15;
  int n_groups = 3;     // ignored for kHier (always 7 factors)
  std::int64_t N = 500;
  std::vector<int> candidates;  // study2 only; default {G-1, G, G+1}
  HierBoundary boundary = HierBoundary::kHalfOpen;
};

struct ReplicationRow {
  int rep = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  double loss = 0.0;
  double mse = 0.0;
  int emc = 0;
  double acc = 0.0;
  int g_alm = 0;     // study2
  int sc_alm = 0;
  int g_efa = 0;
  int sc_efa = 0;
  int outer_iters = 0;
  int restarts = 0;
};

struct StudyReport {
  StudySpec spec;
  int replications = 0;
  std::uint64_t base_seed = 0;
  AlmConfig config;
  std::vector<ReplicationRow> rows;
  int n_failed = 0;
  // Aggregates over successful replications (NaN when none).
  double mean_mse = 0.0;
  double mean_emc = 0.0;
  double mean_acc = 0.0;
  double mean_g_alm = 0.0;
  double mean_sc_alm = 0.0;
  double mean_g_efa = 0.0;
  double mean_sc_efa = 0.0;
};

// Generates the truth once, then per replication samples a dataset, fits it
// (multi-start ALM; for study2 also the EFA baseline and both BIC sweeps),
// and aggregates the recovery metrics. Deterministic given base_seed.
StudyReport run_study(const StudySpec& spec, int replications, std::uint64_t base_seed,
                      const AlmConfig& config);

}  // namespace bifactor
