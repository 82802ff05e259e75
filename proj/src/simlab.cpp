#include "bifactor/simlab.hpp"

#include "bifactor/assignment.hpp"
#include "bifactor/constraints.hpp"
#include "bifactor/correlation.hpp"
#include "bifactor/util.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

namespace bifactor {

MatrixXd TruthModel::implied_sigma() const {
  MatrixXd sigma = lambda * phi * lambda.transpose();
  sigma.diagonal() += psi;
  return sigma;
}

TruthModel generate_bifactor_truth(int n_items, int n_groups, std::uint64_t seed) {
  if (n_groups < 1 || n_items < 1 || n_items % n_groups != 0) {
    throw Error("J must be a positive multiple of G");
  }
  const int J = n_items;
  const int G = n_groups;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  TruthModel truth;
  truth.groups.assign(G, {});
  for (int g = 1; g <= G; ++g) {
    for (int j = g; j <= J; j += G) truth.groups[g - 1].push_back(j);
  }

  VectorXd gamma(gamma_length(G));
  for (int i = 0; i < gamma.size(); ++i) gamma[i] = 0.5 * normal(rng);
  truth.phi = build_phi(gamma, G);

  truth.lambda = MatrixXd::Zero(J, G + 1);
  for (int j = 0; j < J; ++j) truth.lambda(j, 0) = uniform(rng);
  for (int g = 1; g <= G; ++g) {
    for (int j : truth.groups[g - 1]) {
      const double x = normal(rng);
      truth.lambda(j - 1, g) = (x >= 0.0 ? 1.0 : -1.0) * (0.1 + 2.0 * std::abs(x));
    }
  }
  truth.psi = VectorXd::Ones(J);
  return truth;
}

TruthModel generate_hier_truth(int n_items, std::uint64_t seed, HierBoundary boundary) {
  if (n_items < 8 || n_items % 4 != 0) throw Error("J must be a multiple of 4 (>= 8)");
  const int J = n_items;
  const int half = J / 2;
  const int quarter = J / 4;

  auto range = [](int lo, int hi) {  // inclusive
    std::vector<int> out;
    for (int v = lo; v <= hi; ++v) out.push_back(v);
    return out;
  };
  const int shift = boundary == HierBoundary::kSharedBoundary ? 0 : 1;

  TruthModel truth;
  truth.groups = {
      range(1, J),
      range(1, half),
      range(half + shift, J),
      range(1, quarter),
      range(quarter + shift, half),
      range(half + shift, 3 * quarter),
      range(3 * quarter + shift, J),
  };
  truth.hierarchy =
      make_tree({{1, 0}, {2, 1}, {3, 1}, {4, 2}, {5, 2}, {6, 3}, {7, 3}});

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  truth.lambda = MatrixXd::Zero(J, 7);
  for (int j = 0; j < J; ++j) truth.lambda(j, 0) = uniform(rng);
  for (int f = 2; f <= 7; ++f) {
    for (int j : truth.groups[f - 1]) {
      const double x = normal(rng);
      truth.lambda(j - 1, f - 1) = (x >= 0.0 ? 1.0 : -1.0) * (0.1 + 2.0 * std::abs(x));
    }
  }
  truth.phi = MatrixXd::Identity(7, 7);
  truth.psi = VectorXd::Ones(J);
  return truth;
}

SampleCov sample_covariance(const TruthModel& truth, std::int64_t N, std::uint64_t seed) {
  const int J = truth.J();
  if (N <= J) throw Error("need N > J for a positive definite sample covariance");
  const MatrixXd sigma = truth.implied_sigma();
  Eigen::LLT<MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefiniteError("truth covariance is not positive definite");
  }
  const MatrixXd chol_l = llt.matrixL();

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  MatrixXd scatter = MatrixXd::Zero(J, J);
  VectorXd sum = VectorXd::Zero(J);
  VectorXd z(J), x(J);
  for (std::int64_t i = 0; i < N; ++i) {
    for (int j = 0; j < J; ++j) z[j] = normal(rng);
    x.noalias() = chol_l * z;
    scatter.noalias() += x * x.transpose();
    sum += x;
  }
  const double n = static_cast<double>(N);
  const VectorXd mean = sum / n;
  MatrixXd s = scatter / n - mean * mean.transpose();
  s = 0.5 * (s + s.transpose());
  return make_sample_cov(std::move(s), N);
}

namespace {

// Cost of matching an estimated column onto a true column with the optimal
// sign: || a -+ b ||^2 minimized over the sign.
double column_cost(const VectorXd& a, const VectorXd& b) {
  return a.squaredNorm() + b.squaredNorm() - 2.0 * std::abs(a.dot(b));
}

}  // namespace

double mse_lambda(const MatrixXd& lambda_hat, const MatrixXd& lambda_star) {
  if (lambda_hat.rows() != lambda_star.rows() || lambda_hat.cols() != lambda_star.cols()) {
    throw DimensionError("loading matrices must have equal shape");
  }
  const int K = static_cast<int>(lambda_hat.cols());
  const int G = K - 1;
  const double denom = static_cast<double>(lambda_hat.rows() * K);
  const double general = column_cost(lambda_hat.col(0), lambda_star.col(0));

  if (G <= 0) return general / denom;

  MatrixXd cost(G, G);
  for (int a = 0; a < G; ++a) {
    for (int b = 0; b < G; ++b) {
      cost(a, b) = column_cost(lambda_hat.col(1 + a), lambda_star.col(1 + b));
    }
  }
  double best;
  if (G <= 8) {
    std::vector<int> perm(G);
    std::iota(perm.begin(), perm.end(), 0);
    best = std::numeric_limits<double>::infinity();
    do {
      double total = 0.0;
      for (int a = 0; a < G; ++a) total += cost(a, perm[a]);
      best = std::min(best, total);
    } while (std::next_permutation(perm.begin(), perm.end()));
  } else {
    std::vector<int> row_to_col;
    best = solve_assignment(cost, row_to_col);
  }
  return (general + best) / denom;
}

namespace {

std::vector<std::set<int>> to_sets(const std::vector<std::vector<int>>& groups) {
  std::vector<std::set<int>> out;
  out.reserve(groups.size());
  for (const auto& g : groups) out.emplace_back(g.begin(), g.end());
  return out;
}

}  // namespace

int emc(const std::vector<std::vector<int>>& groups_hat,
        const std::vector<std::vector<int>>& groups_star, int n_items) {
  (void)n_items;
  if (groups_hat.size() != groups_star.size()) return 0;
  // Exact match under some relabeling <=> equal multisets of item sets.
  auto a = to_sets(groups_hat);
  auto b = to_sets(groups_star);
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  return a == b ? 1 : 0;
}

double acc(const std::vector<std::vector<int>>& groups_hat,
           const std::vector<std::vector<int>>& groups_star, int n_items) {
  const int G = static_cast<int>(groups_star.size());
  if (static_cast<int>(groups_hat.size()) != G) {
    throw DimensionError("group counts differ");
  }
  const auto hat = to_sets(groups_hat);
  const auto star = to_sets(groups_star);
  // score(g, g') = |B*_g ∩ B_g'| + |B_g'^C ∩ B*_g^C|, maximized over the
  // matching; the assignment solver minimizes, so negate.
  MatrixXd cost(G, G);
  for (int g = 0; g < G; ++g) {
    for (int h = 0; h < G; ++h) {
      int inter = 0;
      for (int item : star[g]) inter += hat[h].count(item) ? 1 : 0;
      const int comp_inter =
          n_items - static_cast<int>(star[g].size()) - static_cast<int>(hat[h].size()) + inter;
      cost(g, h) = -static_cast<double>(inter + comp_inter);
    }
  }
  std::vector<int> row_to_col;
  const double total = -solve_assignment(cost, row_to_col);
  return total / static_cast<double>(n_items * G);
}

std::vector<std::vector<int>> structure_to_groups(const std::vector<int>& structure,
                                                  int n_groups) {
  std::vector<std::vector<int>> out(n_groups);
  for (size_t j = 0; j < structure.size(); ++j) {
    const int g = structure[j];
    if (g >= 1 && g <= n_groups) out[g - 1].push_back(static_cast<int>(j) + 1);
  }
  return out;
}

std::pair<int, double> hier_match_metrics(const std::vector<std::vector<int>>& sets_hat,
                                          const TruthModel& truth) {
  if (!truth.hierarchy.has_value()) throw Error("truth has no hierarchy");
  const auto& tree = *truth.hierarchy;
  const int K = tree.n_factors();
  if (static_cast<int>(sets_hat.size()) != K ||
      static_cast<int>(truth.groups.size()) != K) {
    throw DimensionError("need one item set per factor");
  }
  const int J = truth.J();
  const auto hat = to_sets(sets_hat);
  const auto star = to_sets(truth.groups);

  // The match runs over the non-root factors: structure extraction applies
  // the threshold to the constrained columns, while the root column is
  // unconstrained and every item belongs to it by construction.
  int best_emc = 0;
  double best_acc = 0.0;
  for (const auto& perm : tree_automorphisms(tree)) {
    bool exact = true;
    double total = 0.0;
    for (int f = 2; f <= K; ++f) {
      const auto& b_star = star[f - 1];
      const auto& b_hat = hat[perm[f] - 1];
      if (b_star != b_hat) exact = false;
      int inter = 0;
      for (int item : b_star) inter += b_hat.count(item) ? 1 : 0;
      const int comp_inter =
          J - static_cast<int>(b_star.size()) - static_cast<int>(b_hat.size()) + inter;
      total += inter + comp_inter;
    }
    best_emc = std::max(best_emc, exact ? 1 : 0);
    best_acc = std::max(best_acc, total / static_cast<double>(J * (K - 1)));
  }
  return {best_emc, best_acc};
}

namespace {

std::vector<int> default_candidates(int g_true) {
  std::vector<int> out;
  for (int g = std::max(1, g_true - 1); g <= g_true + 1; ++g) out.push_back(g);
  return out;
}

}  // namespace

StudyReport run_study(const StudySpec& spec, int replications, std::uint64_t base_seed,
                      const AlmConfig& config) {
  StudyReport report;
  report.spec = spec;
  report.replications = replications;
  report.base_seed = base_seed;
  report.config = config;

  TruthModel truth;
  ModelStructure model;
  switch (spec.kind) {
    case StudyKind::kStudy1:
    case StudyKind::kStudy2:
      truth = generate_bifactor_truth(spec.n_items, spec.n_groups,
                                      mix_seed(base_seed, kStreamTruth, 0));
      model = bifactor_structure(spec.n_groups);
      break;
    case StudyKind::kHier:
      truth = generate_hier_truth(spec.n_items, mix_seed(base_seed, kStreamTruth, 0),
                                  spec.boundary);
      model = hierarchy_structure(*truth.hierarchy);
      break;
  }
  const std::vector<int> candidates =
      spec.candidates.empty() ? default_candidates(spec.n_groups) : spec.candidates;

  double sum_mse = 0.0, sum_emc = 0.0, sum_acc = 0.0;
  double sum_g_alm = 0.0, sum_sc_alm = 0.0, sum_g_efa = 0.0, sum_sc_efa = 0.0;
  int n_ok = 0;

  for (int rep = 0; rep < replications; ++rep) {
    ReplicationRow row;
    row.rep = rep;
    row.seed = mix_seed(base_seed, kStreamData, static_cast<std::uint64_t>(rep));
    const SampleCov data = sample_covariance(truth, spec.N, row.seed);
    AlmConfig cfg = config;
    cfg.seed = mix_seed(base_seed, kStreamFit, static_cast<std::uint64_t>(rep));
    try {
      switch (spec.kind) {
        case StudyKind::kStudy1: {
          const FitResult fit = multi_start_fit(data, model, cfg);
          row.loss = fit.loss;
          row.mse = mse_lambda(fit.params.lambda, truth.lambda);
          const auto groups_hat = structure_to_groups(fit.structure, spec.n_groups);
          row.emc = emc(groups_hat, truth.groups, spec.n_items);
          row.acc = acc(groups_hat, truth.groups, spec.n_items);
          row.outer_iters = fit.outer_iters;
          row.restarts = fit.restarts_used;
          break;
        }
        case StudyKind::kStudy2: {
          const BicSweepResult alm_sweep = select_g(data, candidates, cfg);
          const EfaSweepResult efa_sweep = select_g_efa(data, candidates, cfg);
          row.g_alm = alm_sweep.chosen;
          row.sc_alm = alm_sweep.chosen == spec.n_groups ? 1 : 0;
          row.g_efa = efa_sweep.chosen_g;
          row.sc_efa = efa_sweep.chosen_g == spec.n_groups ? 1 : 0;
          break;
        }
        case StudyKind::kHier: {
          const FitResult fit = multi_start_fit(data, model, cfg);
          row.loss = fit.loss;
          row.mse = mse_lambda(fit.params.lambda, truth.lambda);
          const auto [e, a] = hier_match_metrics(fit.factor_sets, truth);
          row.emc = e;
          row.acc = a;
          row.outer_iters = fit.outer_iters;
          row.restarts = fit.restarts_used;
          break;
        }
      }
      row.ok = true;
    } catch (const AllStartsFailedError&) {
      row.ok = false;
      ++report.n_failed;
    }
    if (row.ok) {
      ++n_ok;
      sum_mse += row.mse;
      sum_emc += row.emc;
      sum_acc += row.acc;
      sum_g_alm += row.g_alm;
      sum_sc_alm += row.sc_alm;
      sum_g_efa += row.g_efa;
      sum_sc_efa += row.sc_efa;
    }
    report.rows.push_back(row);
  }

  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double denom = n_ok > 0 ? static_cast<double>(n_ok) : nan;
  report.mean_mse = sum_mse / denom;
  report.mean_emc = sum_emc / denom;
  report.mean_acc = sum_acc / denom;
  report.mean_g_alm = sum_g_alm / denom;
  report.mean_sc_alm = sum_sc_alm / denom;
  report.mean_g_efa = sum_g_efa / denom;
  report.mean_sc_efa = sum_sc_efa / denom;
  return report;
}

}  // namespace bifactor
