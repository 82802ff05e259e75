#include "bifactor/alm.hpp"

#include "bifactor/constraints.hpp"
#include "bifactor/correlation.hpp"
#include "bifactor/util.hpp"
#include "evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace bifactor {

ModelStructure bifactor_structure(int n_groups) {
  ModelStructure m;
  m.n_factors = n_groups + 1;
  m.constraints = bifactor_constraint_pairs(n_groups);
  m.identity_phi = false;
  m.h_order = 2;
  m.column_depth.assign(n_groups, 1);
  return m;
}

ModelStructure hierarchy_structure(const HierarchyTree& tree) {
  ModelStructure m;
  m.n_factors = tree.n_factors();
  m.constraints = hierarchy_constraint_pairs(tree);
  m.identity_phi = true;
  m.h_order = structure_h_order(tree);
  m.column_depth.resize(tree.n_factors() - 1);
  for (int f = 2; f <= tree.n_factors(); ++f) m.column_depth[f - 2] = tree.depth(f);
  return m;
}

double structure_criterion(const MatrixXd& lambda, int h_order) {
  const int n_group_cols = static_cast<int>(lambda.cols()) - 1;
  if (n_group_cols < h_order) return 0.0;
  double worst = 0.0;
  std::vector<double> row(n_group_cols);
  for (int j = 0; j < lambda.rows(); ++j) {
    for (int k = 0; k < n_group_cols; ++k) row[k] = std::abs(lambda(j, 1 + k));
    std::nth_element(row.begin(), row.begin() + (h_order - 1), row.end(),
                     std::greater<double>());
    worst = std::max(worst, row[h_order - 1]);
  }
  return worst;
}

ExtractedStructure extract_structure(const MatrixXd& lambda, double delta2) {
  return extract_structure(lambda, delta2,
                           std::vector<int>(lambda.cols() - 1, 1));
}

ExtractedStructure extract_structure(const MatrixXd& lambda, double delta2,
                                     const std::vector<int>& column_depth) {
  const int J = static_cast<int>(lambda.rows());
  const int G = static_cast<int>(lambda.cols()) - 1;
  if (static_cast<int>(column_depth.size()) != G) {
    throw DimensionError("need one depth per non-root column");
  }
  ExtractedStructure out;
  out.assignment.assign(J, 0);
  for (int j = 0; j < J; ++j) {
    int best = 0;
    double best_mag = 0.0;
    int best_depth = 0;
    std::vector<int> hits_per_depth;
    for (int g = 1; g <= G; ++g) {
      const double mag = std::abs(lambda(j, g));
      if (mag <= delta2) continue;
      const int depth = column_depth[g - 1];
      if (depth > static_cast<int>(hits_per_depth.size())) hits_per_depth.resize(depth, 0);
      ++hits_per_depth[depth - 1];
      if (depth > best_depth || (depth == best_depth && mag > best_mag)) {
        best = g;
        best_mag = mag;
        best_depth = depth;
      }
    }
    out.assignment[j] = best;
    for (int count : hits_per_depth) {
      if (count > 1) out.exact = false;
    }
  }
  return out;
}

std::vector<std::vector<int>> extract_factor_sets(const MatrixXd& lambda, double delta2) {
  const int K = static_cast<int>(lambda.cols());
  std::vector<std::vector<int>> sets(K);
  for (int k = 0; k < K; ++k) {
    for (int j = 0; j < lambda.rows(); ++j) {
      if (std::abs(lambda(j, k)) > delta2) sets[k].push_back(j + 1);
    }
  }
  return sets;
}

namespace {

// Packed coordinates: vec(lambda) | gamma | log(psi).
class PackedProblem {
 public:
  PackedProblem(const SampleCov& data, const ModelStructure& model)
      : data_(data),
        model_(model),
        J_(data.J()),
        K_(model.n_factors),
        n_gamma_(model.identity_phi ? 0 : gamma_length(model.n_factors - 1)),
        log_det_s_(detail::log_det_spd(data.S)) {}

  int dim() const { return J_ * K_ + n_gamma_ + J_; }
  int n_free_params() const { return dim(); }

  VectorXd pack(const FactorParams& p) const {
    VectorXd x(dim());
    int off = 0;
    for (int k = 0; k < K_; ++k) {
      x.segment(off, J_) = p.lambda.col(k);
      off += J_;
    }
    x.segment(off, n_gamma_) = p.gamma;
    off += n_gamma_;
    x.segment(off, J_) = p.psi.array().log();
    return x;
  }

  FactorParams unpack(const VectorXd& x) const {
    FactorParams p;
    p.lambda.resize(J_, K_);
    int off = 0;
    for (int k = 0; k < K_; ++k) {
      p.lambda.col(k) = x.segment(off, J_);
      off += J_;
    }
    p.gamma = x.segment(off, n_gamma_);
    off += n_gamma_;
    p.psi = x.segment(off, J_).array().exp();
    return p;
  }

  // Objective closure over fixed multiplier/penalty coefficients.
  ObjectiveFn make_objective(const MatrixXd& beta, double c) const {
    return [this, &beta, c](const VectorXd& x, double& f, VectorXd& grad) {
      const FactorParams p = unpack(x);
      if (!p.psi.allFinite()) return false;
      Gradient g;
      if (!detail::eval_auglag(data_, log_det_s_, p, &beta, c, model_.constraints, f, &g)) {
        return false;
      }
      grad.resize(dim());
      int off = 0;
      for (int k = 0; k < K_; ++k) {
        grad.segment(off, J_) = g.lambda.col(k);
        off += J_;
      }
      grad.segment(off, n_gamma_) = g.gamma;
      off += n_gamma_;
      // Chain rule through psi = exp(eta).
      grad.segment(off, J_) = g.psi.cwiseProduct(p.psi);
      return true;
    };
  }

  double fit_loss(const FactorParams& p) const {
    double f = 0.0;
    ConstraintSet none;
    if (!detail::eval_auglag(data_, log_det_s_, p, nullptr, 0.0, none, f, nullptr)) {
      throw SigmaNotPdError("implied covariance is not positive definite");
    }
    return f;
  }

  int n_gamma() const { return n_gamma_; }

 private:
  const SampleCov& data_;
  const ModelStructure& model_;
  int J_;
  int K_;
  int n_gamma_;
  double log_det_s_;
};

double normalized_change(const FactorParams& a, const FactorParams& b, int n_free) {
  double sq = (a.lambda - b.lambda).squaredNorm();
  sq += (a.gamma - b.gamma).squaredNorm();
  sq += (a.psi - b.psi).squaredNorm();
  return std::sqrt(sq) / std::sqrt(static_cast<double>(n_free));
}

constexpr double kPenaltyCap = 1e14;

}  // namespace

LbfgsResult inner_minimize(const ObjectiveFn& objective, const Eigen::VectorXd& init,
                           const AlmConfig& config) {
  LbfgsOptions options;
  options.max_iters = config.inner_max_iters;
  options.grad_tol = config.inner_grad_tol;
  return lbfgs_minimize(objective, init, options);
}

FitResult alm_fit(const SampleCov& data, const ModelStructure& model,
                  const AlmConfig& config, const FactorParams& init) {
  validate_params(init);
  validate_constraints(model.constraints, model.n_factors);
  if (init.J() != data.J() || init.n_factors() != model.n_factors) {
    throw DimensionError("init dimensions do not match data/model");
  }
  if ((model.identity_phi && init.gamma.size() != 0) ||
      (!model.identity_phi && init.gamma.size() != gamma_length(model.n_factors - 1))) {
    throw DimensionError("init gamma length does not match the model");
  }

  PackedProblem problem(data, model);
  const int n_pairs = model.constraints.size();
  const int J = data.J();

  FactorParams current = init;
  // Inflate psi until the implied covariance is PD (always true for the
  // random starts; user inits may need it).
  for (int attempts = 0; attempts < 64; ++attempts) {
    double f;
    ConstraintSet none;
    if (detail::eval_auglag(data, detail::log_det_spd(data.S), current, nullptr, 0.0, none,
                            f, nullptr)) {
      break;
    }
    current.psi = 2.0 * current.psi + 0.1 * data.S.diagonal();
  }

  FitResult result;
  result.restarts_used = 0;
  result.outer_iters = 0;

  // The parameter-change denominator counts the free parameters.
  const int n_free = J * (model.n_factors + 1) + problem.n_gamma();

  bool converged = false;
  double h_at_stop = structure_criterion(current.lambda, model.h_order);
  double change_at_stop = std::numeric_limits<double>::quiet_NaN();

  for (int round = 0; round <= config.max_restarts && !converged; ++round) {
    if (round > 0) ++result.restarts_used;
    MatrixXd beta = MatrixXd::Zero(J, n_pairs);
    double c = config.c0;
    double prev_res_norm = constraint_residuals(current.lambda, model.constraints).norm();
    int capped_stall = 0;

    for (int t = 1; t <= config.t_max; ++t) {
      ++result.outer_iters;
      const FactorParams previous = current;

      const auto objective = problem.make_objective(beta, c);
      const auto inner = inner_minimize(objective, problem.pack(current), config);
      current = problem.unpack(inner.x);

      const MatrixXd residuals = constraint_residuals(current.lambda, model.constraints);
      const double res_norm = residuals.norm();
      const double change = normalized_change(current, previous, n_free);
      const double h_value = structure_criterion(current.lambda, model.h_order);

      IterationRecord record;
      if (config.record_trace) {
        record.t = t;
        record.c = c;
        record.residual_norm = res_norm;
        record.param_change = change;
        record.h_value = h_value;
        record.residuals = residuals;
        record.beta_before = beta;
      }

      beta += c * residuals;
      const bool residuals_stalled = res_norm > config.c_theta * prev_res_norm;
      if (residuals_stalled) c = std::min(c * config.c_sigma, kPenaltyCap);
      prev_res_norm = res_norm;

      if (config.record_trace) {
        record.beta_after = beta;
        result.trace.push_back(std::move(record));
      }

      if (change < config.delta1 && h_value < config.delta2) {
        converged = true;
        h_at_stop = h_value;
        change_at_stop = change;
        break;
      }
      h_at_stop = h_value;
      change_at_stop = change;

      // A run pinned at the penalty cap with frozen parameters and a violated
      // structure cannot progress; fall through to a restart.
      if (c >= kPenaltyCap && change < 1e-3 * config.delta1 && h_value >= config.delta2) {
        if (++capped_stall >= 10) break;
      } else {
        capped_stall = 0;
      }
    }
  }

  result.params = current;
  result.phi = model.identity_phi
                   ? MatrixXd::Identity(model.n_factors, model.n_factors)
                   : build_phi(current.gamma, model.n_factors - 1);
  result.loss = problem.fit_loss(current);
  result.converged = converged;
  result.h_max = h_at_stop;
  result.final_param_change = change_at_stop;
  const auto extracted =
      model.column_depth.empty()
          ? extract_structure(current.lambda, config.delta2)
          : extract_structure(current.lambda, config.delta2, model.column_depth);
  result.structure = extracted.assignment;
  result.exact_structure = extracted.exact;
  result.factor_sets = extract_factor_sets(current.lambda, config.delta2);
  return result;
}

FactorParams random_start(const SampleCov& data, const ModelStructure& model,
                          std::uint64_t seed, int index) {
  std::mt19937_64 rng(mix_seed(seed, kStreamStart, static_cast<std::uint64_t>(index)));
  std::normal_distribution<double> normal(0.0, 1.0);
  FactorParams p;
  p.lambda.resize(data.J(), model.n_factors);
  for (int j = 0; j < data.J(); ++j) {
    for (int k = 0; k < model.n_factors; ++k) p.lambda(j, k) = normal(rng);
  }
  p.gamma = VectorXd::Zero(model.identity_phi ? 0 : gamma_length(model.n_factors - 1));
  p.psi = 0.5 * data.S.diagonal();
  return p;
}

FitResult multi_start_fit(const SampleCov& data, const ModelStructure& model,
                          const AlmConfig& config) {
  if (config.n_starts < 1) throw Error("need at least one start");
  std::vector<FitResult> fits(config.n_starts);
  std::vector<std::string> errors(config.n_starts);
  parallel_for(config.n_starts, resolve_threads(config.n_threads), [&](int i) {
    try {
      const FactorParams init = random_start(data, model, config.seed, i);
      fits[i] = alm_fit(data, model, config, init);
      fits[i].start_index = i;
    } catch (const std::exception& e) {
      errors[i] = e.what();
      fits[i].converged = false;
    }
  });

  int best = -1;
  for (int i = 0; i < config.n_starts; ++i) {
    if (!fits[i].converged) continue;
    if (best < 0 || fits[i].loss < fits[best].loss) best = i;
  }
  if (best < 0) {
    std::string message = "no start converged";
    for (const auto& error : errors) {
      if (!error.empty()) {
        message += " (first error: " + error + ")";
        break;
      }
    }
    throw AllStartsFailedError(message);
  }
  return fits[best];
}

}  // namespace bifactor
