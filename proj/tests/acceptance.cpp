// Acceptance suite: end-to-end checks of noiseless recovery, oracle
// agreement at micro scale, scaled study reproductions, selection accuracy,
// gradient and reparameterization correctness, ALM mechanics, and report
// determinism. Prints one PASS/FAIL line per criterion; exit code is the
// number of failures.
#include "bifactor/alm.hpp"
#include "bifactor/cli_app.hpp"
#include "bifactor/constraints.hpp"
#include "bifactor/correlation.hpp"
#include "bifactor/objective.hpp"
#include "bifactor/selection.hpp"
#include "bifactor/simlab.hpp"
#include "bifactor/util.hpp"

#include "support.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

using namespace bifactor;

namespace {

int n_failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  std::printf("%s  AC-%02d  %s  (%s)\n", pass ? "PASS" : "FAIL", id, name.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++n_failures;
}

double elapsed_s(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), pattern, args...);
  return buf;
}

// ---------------------------------------------------------------------------

void criterion_1_noiseless_recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  const TruthModel truth = generate_bifactor_truth(15, 3, 2024);
  const SampleCov data = make_sample_cov(truth.implied_sigma(), 1000);
  AlmConfig config;
  config.n_starts = 50;
  config.seed = 42;
  const FitResult fit = multi_start_fit(data, bifactor_structure(3), config);
  const auto groups_hat = structure_to_groups(fit.structure, 3);
  const int match = emc(groups_hat, truth.groups, 15);
  const double mse = mse_lambda(fit.params.lambda, truth.lambda);
  const bool pass = match == 1 && fit.loss < 1e-6 && mse < 1e-6;
  report(1, "noiseless exact recovery at (15,3)", pass,
         fmt("emc=%d loss=%.2e mse=%.2e %.0fs", match, fit.loss, mse, elapsed_s(t0)));
}

void criterion_2_oracle_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  int agree = 0;
  const int runs = 10;
  for (int run = 0; run < runs; ++run) {
    const TruthModel truth = generate_bifactor_truth(6, 2, 500 + run);
    const SampleCov data = sample_covariance(truth, 5000, 900 + run);
    AlmConfig config;
    config.n_starts = 50;
    config.seed = 7000 + run;
    const FitResult fit = multi_start_fit(data, bifactor_structure(2), config);

    double best_loss = std::numeric_limits<double>::infinity();
    std::vector<int> best_assignment;
    for (int mask = 0; mask < (1 << 6); ++mask) {
      std::vector<int> assignment(6);
      for (int j = 0; j < 6; ++j) assignment[j] = (mask >> j & 1) + 1;
      const double loss =
          testsupport::confirmatory_loss(data, assignment, 2, 3, 331 * run + mask);
      if (loss < best_loss) {
        best_loss = loss;
        best_assignment = assignment;
      }
    }
    const auto oracle_groups = structure_to_groups(best_assignment, 2);
    const auto fit_groups = structure_to_groups(fit.structure, 2);
    if (emc(fit_groups, oracle_groups, 6) == 1) ++agree;
  }
  report(2, "micro-scale agreement with the enumeration oracle", agree >= 9,
         fmt("%d/%d runs agree %.0fs", agree, runs, elapsed_s(t0)));
}

struct StudyOneResults {
  StudyReport n500;
  StudyReport n2000;
};

StudyOneResults run_study_one() {
  StudySpec spec;
  spec.kind = StudyKind::kStudy1;
  spec.n_items = 15;
  spec.n_groups = 3;
  AlmConfig config;
  config.n_starts = 50;
  StudyOneResults out;
  spec.N = 500;
  out.n500 = run_study(spec, 20, 101, config);
  spec.N = 2000;
  out.n2000 = run_study(spec, 20, 202, config);
  return out;
}

void criteria_3_4_5_study_one(const StudyOneResults& s, double secs) {
  report(3, "study I EMC at (15,3)", s.n500.mean_emc >= 0.75 && s.n2000.mean_emc >= 0.90,
         fmt("emc N500=%.2f (need .75) N2000=%.2f (need .90) %.0fs", s.n500.mean_emc,
             s.n2000.mean_emc, secs));
  report(4, "study I ACC at (15,3)", s.n500.mean_acc >= 0.97 && s.n2000.mean_acc >= 0.97,
         fmt("acc N500=%.3f N2000=%.3f (need .97)", s.n500.mean_acc, s.n2000.mean_acc));
  report(5, "study I MSE shrinks with N", s.n2000.mean_mse < s.n500.mean_mse,
         fmt("mse N500=%.4f N2000=%.4f", s.n500.mean_mse, s.n2000.mean_mse));
}

void criterion_6_study_two() {
  const auto t0 = std::chrono::steady_clock::now();
  StudySpec spec;
  spec.kind = StudyKind::kStudy2;
  spec.n_items = 15;
  spec.n_groups = 3;
  spec.N = 2000;
  AlmConfig config;
  config.n_starts = 50;
  const StudyReport small = run_study(spec, 20, 303, config);

  spec.n_items = 30;
  spec.n_groups = 5;
  spec.N = 500;
  const StudyReport big = run_study(spec, 10, 404, config);

  const bool pass = small.mean_sc_alm >= 0.95 && small.mean_sc_efa >= 0.95 &&
                    big.mean_sc_alm >= big.mean_sc_efa - 0.1;
  report(6, "study II BIC selection",pass,
         fmt("(15,3)N2000 sc_alm=%.2f sc_efa=%.2f; (30,5)N500 sc_alm=%.2f sc_efa=%.2f %.0fs",
             small.mean_sc_alm, small.mean_sc_efa, big.mean_sc_alm, big.mean_sc_efa,
             elapsed_s(t0)));
}

void criterion_7_hierarchical() {
  const auto t0 = std::chrono::steady_clock::now();
  StudySpec spec;
  spec.kind = StudyKind::kHier;
  spec.N = 2000;
  AlmConfig config;
  config.n_starts = 50;
  spec.n_items = 20;
  const StudyReport j20 = run_study(spec, 10, 505, config);
  spec.n_items = 40;
  const StudyReport j40 = run_study(spec, 5, 606, config);
  const bool pass = j20.mean_emc >= 0.7 && j40.mean_emc >= 0.8;
  report(7, "hierarchical structure recovery", pass,
         fmt("emc J20=%.2f (need .70) J40=%.2f (need .80) %.0fs", j20.mean_emc,
             j40.mean_emc, elapsed_s(t0)));
}

void criterion_8_gradient() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(808);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  int checked = 0;
  double worst = 0.0;
  while (checked < 100) {
    const int J = 4 + static_cast<int>(rng() % 7);
    const int G = 1 + static_cast<int>(rng() % 3);
    FactorParams params;
    params.lambda = MatrixXd::NullaryExpr(J, G + 1, [&]() { return 0.6 * normal(rng); });
    params.gamma =
        VectorXd::NullaryExpr(gamma_length(G), [&]() { return 0.6 * normal(rng); });
    params.psi = VectorXd::NullaryExpr(J, [&]() { return 0.5 + unif(rng); });
    const MatrixXd a = MatrixXd::NullaryExpr(J, J, [&]() { return normal(rng); });
    MatrixXd s = a * a.transpose() / double(J) + 0.5 * MatrixXd::Identity(J, J);
    const SampleCov data = make_sample_cov(std::move(s), 50);
    const ConstraintSet constraints = bifactor_constraint_pairs(G);
    AugLagCoefficients coeffs = zero_coefficients(J, constraints.size(), 5.0 * unif(rng));
    coeffs.beta =
        MatrixXd::NullaryExpr(J, constraints.size(), [&]() { return normal(rng); });

    const int n_gamma = gamma_length(G);
    const int dim = J * (G + 1) + n_gamma + J;
    auto unpack = [&](const VectorXd& x) {
      FactorParams p;
      p.lambda.resize(J, G + 1);
      for (int k = 0; k <= G; ++k) p.lambda.col(k) = x.segment(k * J, J);
      p.gamma = x.segment(J * (G + 1), n_gamma);
      p.psi = x.segment(J * (G + 1) + n_gamma, J);
      return p;
    };
    VectorXd x(dim);
    for (int k = 0; k <= G; ++k) x.segment(k * J, J) = params.lambda.col(k);
    x.segment(J * (G + 1), n_gamma) = params.gamma;
    x.segment(J * (G + 1) + n_gamma, J) = params.psi;

    const Gradient g = augmented_gradient(params, coeffs, constraints, data);
    const VectorXd fd = testsupport::finite_difference(
        [&](const VectorXd& v) {
          return augmented_objective(unpack(v), coeffs, constraints, data);
        },
        x);
    VectorXd analytic(dim);
    for (int k = 0; k <= G; ++k) analytic.segment(k * J, J) = g.lambda.col(k);
    analytic.segment(J * (G + 1), n_gamma) = g.gamma;
    analytic.segment(J * (G + 1) + n_gamma, J) = g.psi;

    const int lam = J * (G + 1);
    worst = std::max(worst, testsupport::rel_error(analytic.head(lam), fd.head(lam)));
    if (n_gamma > 0) {
      worst = std::max(worst, testsupport::rel_error(analytic.segment(lam, n_gamma),
                                                     fd.segment(lam, n_gamma)));
    }
    worst = std::max(worst, testsupport::rel_error(analytic.tail(J), fd.tail(J)));
    ++checked;
  }
  report(8, "analytic gradient vs central differences", worst < 1e-5,
         fmt("%d instances, worst block error %.2e %.0fs", checked, worst, elapsed_s(t0)));
}

void criterion_9_reparameterization() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(909);
  std::uniform_real_distribution<double> unif(-3.0, 3.0);
  int checked = 0;
  bool ok = true;
  double worst_gap = 0.0;
  while (checked < 1000) {
    const int G = 1 + static_cast<int>(rng() % 6);
    VectorXd gamma(gamma_length(G));
    for (int i = 0; i < gamma.size(); ++i) gamma[i] = unif(rng);
    const MatrixXd phi = build_phi(gamma, G);
    ok = ok && (phi.diagonal().array() - 1.0).abs().maxCoeff() < 1e-12;
    ok = ok && (phi - phi.transpose()).cwiseAbs().maxCoeff() < 1e-12;
    for (int k = 1; k <= G; ++k) ok = ok && phi(0, k) == 0.0;
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(phi, Eigen::EigenvaluesOnly);
    ok = ok && eig.eigenvalues().minCoeff() > 0.0;

    bool defined = true;
    for (int i = 0; i < gamma.size(); ++i) {
      if (std::abs(gamma[i]) < 1e-9) defined = false;
    }
    if (defined && G >= 2) {
      const MatrixXd rec = testsupport::recursive_form_u(gamma, G);
      const MatrixXd prod = testsupport::product_form_u(gamma, G);
      const double gap = (rec - prod).cwiseAbs().maxCoeff();
      worst_gap = std::max(worst_gap, gap);
      ok = ok && gap < 1e-12;
      ok = ok && (phi.bottomRightCorner(G, G) - rec.transpose() * rec).cwiseAbs().maxCoeff() <
                     1e-12;
    }
    ++checked;
  }
  report(9, "correlation reparameterization properties", ok,
         fmt("%d gammas, worst recursive/product gap %.2e %.0fs", checked, worst_gap,
             elapsed_s(t0)));
}

void criterion_10_alm_mechanics() {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::string note = "ladder/identity/stops all hold";
  int n_converged = 0;
  for (int run = 0; run < 3 && ok; ++run) {
    const TruthModel truth = generate_bifactor_truth(9 + 3 * run, 3, 42 + run);
    const SampleCov data = sample_covariance(truth, 800, 17 + run);
    const auto model = bifactor_structure(3);
    AlmConfig config;
    config.n_starts = 1;
    config.seed = 1000 + run;
    config.record_trace = true;
    const FitResult fit =
        alm_fit(data, model, config, random_start(data, model, config.seed, 0));
    if (fit.trace.empty()) {
      ok = false;
      note = "no trace recorded";
      break;
    }
    double prev_c = 0.0;
    for (size_t i = 0; i < fit.trace.size(); ++i) {
      const auto& rec = fit.trace[i];
      if (i > 0 && rec.c < prev_c) {
        ok = false;
        note = "penalty decreased";
      }
      if (i > 0 && rec.c != prev_c && rec.c != 10.0 * prev_c) {
        ok = false;
        note = "penalty jump is not x10";
      }
      const MatrixXd expected = rec.beta_before + rec.c * rec.residuals;
      if ((expected - rec.beta_after).cwiseAbs().maxCoeff() != 0.0) {
        ok = false;
        note = "multiplier update not exact";
      }
      prev_c = rec.c;
    }
    if (fit.converged) {
      ++n_converged;
      if (!(fit.h_max < config.delta2 && fit.final_param_change < config.delta1)) {
        ok = false;
        note = "stopping inequalities violated on a converged fit";
      }
    }
  }
  ok = ok && n_converged > 0;
  report(10, "ALM mechanics on logged runs", ok,
         fmt("%s; %d converged fits %.0fs", note.c_str(), n_converged, elapsed_s(t0)));
}

void criterion_11_determinism() {
  const auto t0 = std::chrono::steady_clock::now();
  namespace fs = std::filesystem;
  const auto dir = fs::temp_directory_path() / "bifactor_acceptance";
  fs::create_directories(dir);
  const auto out = (dir / "report.csv").string();
  const std::vector<std::string> args{
      "simulate", "--study", "study1", "--j",     "9",  "--g",   "3",
      "--n",      "500",     "--reps", "3",       "--seed", "77", "--starts", "10",
      "--out",    out};
  bool ok = run_cli(args) == 0;
  std::string first;
  {
    std::ifstream in(out);
    std::stringstream ss;
    ss << in.rdbuf();
    first = ss.str();
  }
  ok = ok && run_cli(args) == 0;
  std::string second;
  {
    std::ifstream in(out);
    std::stringstream ss;
    ss << in.rdbuf();
    second = ss.str();
  }
  fs::remove_all(dir);
  ok = ok && !first.empty() && first == second;
  report(11, "byte-identical simulate reports", ok,
         fmt("%zu bytes %.0fs", first.size(), elapsed_s(t0)));
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  criterion_1_noiseless_recovery();
  criterion_2_oracle_equivalence();
  {
    const auto t1 = std::chrono::steady_clock::now();
    const StudyOneResults s = run_study_one();
    criteria_3_4_5_study_one(s, elapsed_s(t1));
  }
  criterion_6_study_two();
  criterion_7_hierarchical();
  criterion_8_gradient();
  criterion_9_reparameterization();
  criterion_10_alm_mechanics();
  criterion_11_determinism();
  std::printf("%s: %d criterion(s) failed, total %.0fs\n",
              n_failures == 0 ? "ALL PASS" : "FAILURES", n_failures, elapsed_s(t0));
  return n_failures;
}
