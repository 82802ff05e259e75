#include "bifactor/selection.hpp"

#include "bifactor/util.hpp"
#include "evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace bifactor {

double bic_bifactor(double loss, int n_groups, std::int64_t N) {
  if (N < 2 || n_groups < 1) throw Error("bic_bifactor needs N >= 2 and G >= 1");
  const double g = static_cast<double>(n_groups);
  return loss + (g - 1.0) * g * std::log(static_cast<double>(N)) / 2.0;
}

double bic_efa(double loss, int n_factors, int n_items, std::int64_t N) {
  if (N < 2 || n_factors < 1) throw Error("bic_efa needs N >= 2 and K >= 1");
  const double k = static_cast<double>(n_factors);
  const double j = static_cast<double>(n_items);
  return loss + (j * k - k * (k - 1.0) / 2.0) * std::log(static_cast<double>(N));
}

BicSweepResult select_g(const SampleCov& data, const std::vector<int>& candidates,
                        const AlmConfig& config) {
  if (candidates.empty()) throw Error("empty candidate set");
  BicSweepResult out;
  out.candidates = candidates;
  const size_t n = candidates.size();
  out.losses.assign(n, std::numeric_limits<double>::quiet_NaN());
  out.bics.assign(n, std::numeric_limits<double>::quiet_NaN());
  out.ok.assign(n, false);
  out.fits.resize(n);
  for (size_t i = 0; i < n; ++i) {
    const int g = candidates[i];
    AlmConfig cfg = config;
    cfg.seed = mix_seed(config.seed, kStreamFit, static_cast<std::uint64_t>(g));
    try {
      FitResult fit = multi_start_fit(data, bifactor_structure(g), cfg);
      out.losses[i] = fit.loss;
      out.bics[i] = bic_bifactor(fit.loss, g, data.N);
      out.ok[i] = true;
      out.fits[i] = std::move(fit);
    } catch (const AllStartsFailedError&) {
      // excluded from the argmin, reported as failed
    }
  }
  int best = -1;
  for (size_t i = 0; i < n; ++i) {
    if (!out.ok[i]) continue;
    if (best < 0 || out.bics[i] < out.bics[best] ||
        (out.bics[i] == out.bics[best] && candidates[i] < candidates[best])) {
      best = static_cast<int>(i);
    }
  }
  if (best < 0) throw AllStartsFailedError("every candidate failed");
  out.chosen = candidates[best];
  return out;
}

namespace {

// Fixed echelon zeros: rows 2..K-1 (1-based), columns above the diagonal.
std::vector<std::pair<int, int>> echelon_zeros(int n_factors) {
  std::vector<std::pair<int, int>> zeros;
  for (int i = 1; i < n_factors - 1; ++i) {      // 0-based rows 1..K-2
    for (int j = i + 1; j < n_factors; ++j) {    // 0-based cols i+1..K-1
      zeros.push_back({i, j});
    }
  }
  return zeros;
}

}  // namespace

EfaFit efa_fit(const SampleCov& data, int n_factors, const AlmConfig& config) {
  const int J = data.J();
  const int K = n_factors;
  if (K < 1 || K >= J) throw Error("EFA needs 1 <= K < J");
  if (config.n_starts < 1) throw Error("need at least one start");
  const auto zeros = echelon_zeros(K);
  const double log_det_s = detail::log_det_spd(data.S);
  const ConstraintSet no_pairs;

  // Packed coordinates: vec(lambda) | log(psi); echelon entries stay zero.
  const int dim = J * K + J;
  auto objective = [&](const VectorXd& x, double& f, VectorXd& grad) {
    FactorParams p;
    p.lambda.resize(J, K);
    for (int k = 0; k < K; ++k) p.lambda.col(k) = x.segment(k * J, J);
    for (const auto& [r, c] : zeros) p.lambda(r, c) = 0.0;
    p.gamma = VectorXd();
    p.psi = x.segment(J * K, J).array().exp();
    if (!p.psi.allFinite()) return false;
    Gradient g;
    if (!detail::eval_auglag(data, log_det_s, p, nullptr, 0.0, no_pairs, f, &g)) {
      return false;
    }
    for (const auto& [r, c] : zeros) g.lambda(r, c) = 0.0;
    grad.resize(dim);
    for (int k = 0; k < K; ++k) grad.segment(k * J, J) = g.lambda.col(k);
    grad.segment(J * K, J) = g.psi.cwiseProduct(p.psi);
    return true;
  };

  LbfgsOptions options;
  options.max_iters = config.inner_max_iters;
  options.grad_tol = config.inner_grad_tol;

  EfaFit best;
  best.loss = std::numeric_limits<double>::infinity();
  bool any = false;
  std::vector<EfaFit> fits(config.n_starts);
  std::vector<char> ok(config.n_starts, 0);
  parallel_for(config.n_starts, resolve_threads(config.n_threads), [&](int i) {
    std::mt19937_64 rng(mix_seed(config.seed, kStreamStart, static_cast<std::uint64_t>(i)));
    std::normal_distribution<double> normal(0.0, 1.0);
    VectorXd x(dim);
    for (int idx = 0; idx < J * K; ++idx) x[idx] = normal(rng);
    x.segment(J * K, J) = (0.5 * data.S.diagonal()).array().log();
    for (const auto& [r, c] : zeros) x[c * J + r] = 0.0;

    // A couple of memory-reset rounds help the occasional slow start.
    LbfgsResult res = lbfgs_minimize(objective, x, options);
    for (int round = 0; round < 2 && res.status == LbfgsStatus::kMaxIters; ++round) {
      res = lbfgs_minimize(objective, res.x, options);
    }
    EfaFit fit;
    fit.lambda.resize(J, K);
    for (int k = 0; k < K; ++k) fit.lambda.col(k) = res.x.segment(k * J, J);
    for (const auto& [r, c] : zeros) fit.lambda(r, c) = 0.0;
    fit.psi = res.x.segment(J * K, J).array().exp();
    fit.loss = res.f;
    fit.converged = res.status == LbfgsStatus::kGradTol;
    fits[i] = std::move(fit);
    ok[i] = 1;
  });
  for (int i = 0; i < config.n_starts; ++i) {
    if (!ok[i] || !fits[i].converged) continue;
    if (!any || fits[i].loss < best.loss) {
      best = fits[i];
      any = true;
    }
  }
  if (!any) {
    // Fall back to the best stalled point before giving up entirely.
    for (int i = 0; i < config.n_starts; ++i) {
      if (!ok[i]) continue;
      if (!any || fits[i].loss < best.loss) {
        best = fits[i];
        best.converged = false;
        any = true;
      }
    }
  }
  if (!any) throw AllStartsFailedError("no EFA start converged");
  return best;
}

EfaSweepResult select_g_efa(const SampleCov& data, const std::vector<int>& candidates_g,
                            const AlmConfig& config) {
  if (candidates_g.empty()) throw Error("empty candidate set");
  EfaSweepResult out;
  out.candidates_g = candidates_g;
  const size_t n = candidates_g.size();
  out.losses.assign(n, std::numeric_limits<double>::quiet_NaN());
  out.bics.assign(n, std::numeric_limits<double>::quiet_NaN());
  out.ok.assign(n, false);
  for (size_t i = 0; i < n; ++i) {
    const int k = candidates_g[i] + 1;
    AlmConfig cfg = config;
    cfg.seed = mix_seed(config.seed, kStreamFit, 1000 + static_cast<std::uint64_t>(k));
    try {
      const EfaFit fit = efa_fit(data, k, cfg);
      out.losses[i] = fit.loss;
      out.bics[i] = bic_efa(fit.loss, k, data.J(), data.N);
      out.ok[i] = true;
    } catch (const AllStartsFailedError&) {
    }
  }
  int best = -1;
  for (size_t i = 0; i < n; ++i) {
    if (!out.ok[i]) continue;
    if (best < 0 || out.bics[i] < out.bics[best] ||
        (out.bics[i] == out.bics[best] && candidates_g[i] < candidates_g[best])) {
      best = static_cast<int>(i);
    }
  }
  if (best < 0) throw AllStartsFailedError("every EFA candidate failed");
  out.chosen_g = candidates_g[best];
  return out;
}

}  // namespace bifactor
