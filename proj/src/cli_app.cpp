#include "bifactor/cli_app.hpp"

#include "bifactor/constraints.hpp"
#include "bifactor/io.hpp"
#include "bifactor/simlab.hpp"
#include "bifactor/util.hpp"
#include "bifactor/version.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <iostream>
#include <optional>

namespace bifactor {

namespace {

struct CommonFlags {
  std::string input;
  std::string kind = "raw";
  std::int64_t n_override = 0;
  int groups = 0;
  std::string hierarchy_file;
  int starts = 50;
  std::uint64_t seed = 0;
  double delta1 = 1e-2;
  double delta2 = 1e-2;
  int tmax = 1000;
  int threads = 0;
  std::string out;
};

void add_fit_flags(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--input", flags.input, "input CSV path")->required();
  cmd->add_option("--kind", flags.kind, "raw (N x J table) or cov (J x J matrix)");
  cmd->add_option("--n", flags.n_override, "sample size (required with --kind cov)");
  cmd->add_option("--groups", flags.groups, "number of group factors");
  cmd->add_option("--hierarchy", flags.hierarchy_file,
                  "hierarchy file ('child parent' per line, root '1 0')");
  cmd->add_option("--starts", flags.starts, "number of random starts");
  cmd->add_option("--seed", flags.seed, "random seed");
  cmd->add_option("--delta1", flags.delta1, "parameter-change tolerance");
  cmd->add_option("--delta2", flags.delta2, "structure tolerance");
  cmd->add_option("--tmax", flags.tmax, "outer-iteration cap");
  cmd->add_option("--threads", flags.threads, "worker threads (0 = all cores)");
  cmd->add_option("--out", flags.out, "output path (stdout if omitted)");
}

AlmConfig config_from(const CommonFlags& flags) {
  AlmConfig config;
  config.delta1 = flags.delta1;
  config.delta2 = flags.delta2;
  config.t_max = flags.tmax;
  config.n_starts = flags.starts;
  config.seed = flags.seed;
  config.n_threads = flags.threads;
  return config;
}

SampleCov load_data(const CommonFlags& flags) {
  if (flags.kind != "raw" && flags.kind != "cov") {
    throw CsvError("BadKind", "--kind must be raw or cov");
  }
  std::optional<std::int64_t> n;
  if (flags.n_override > 0) n = flags.n_override;
  return ingest(flags.input, flags.kind == "raw" ? IngestKind::kRaw : IngestKind::kCov, n);
}

Json config_json(const AlmConfig& config) {
  Json c;
  c["c0"] = config.c0;
  c["c_theta"] = config.c_theta;
  c["c_sigma"] = config.c_sigma;
  c["delta1"] = config.delta1;
  c["delta2"] = config.delta2;
  c["t_max"] = config.t_max;
  c["inner_max_iters"] = config.inner_max_iters;
  c["inner_grad_tol"] = config.inner_grad_tol;
  c["n_starts"] = config.n_starts;
  c["seed"] = config.seed;
  c["max_restarts"] = config.max_restarts;
  c["threads"] = config.n_threads;
  return c;
}

Json manifest_json(const std::string& subcommand, const CommonFlags& flags,
                   const AlmConfig& config, double wall_ms, bool with_timing) {
  Json m;
  m["subcommand"] = subcommand;
  m["version"] = kVersion;
  m["input"] = flags.input;
  m["kind"] = flags.kind;
  m["n"] = flags.n_override;
  m["groups"] = flags.groups;
  m["hierarchy"] = flags.hierarchy_file;
  m["starts"] = flags.starts;
  m["seed"] = flags.seed;
  m["delta1"] = flags.delta1;
  m["delta2"] = flags.delta2;
  m["tmax"] = flags.tmax;
  m["threads"] = flags.threads;
  m["out"] = flags.out;
  m["config"] = config_json(config);
  if (with_timing) m["wall_ms"] = wall_ms;
  return m;
}

void emit(const std::string& out_path, const std::string& content) {
  if (out_path.empty()) {
    std::cout << content << std::endl;
  } else {
    write_text_file(out_path, content);
  }
}

void emit_error(const std::string& code, const std::string& message, int row = 0,
                int col = 0) {
  Json err;
  err["error"] = code;
  err["message"] = message;
  if (row > 0) err["row"] = row;
  if (col > 0) err["col"] = col;
  std::cerr << err.dump() << std::endl;
}

class Timer {
 public:
  double ms() const {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

int cmd_fit(const CommonFlags& flags) {
  Timer timer;
  const SampleCov data = load_data(flags);
  const AlmConfig config = config_from(flags);
  ModelStructure model;
  if (!flags.hierarchy_file.empty()) {
    model = hierarchy_structure(read_hierarchy_file(flags.hierarchy_file));
  } else if (flags.groups >= 1) {
    model = bifactor_structure(flags.groups);
  } else {
    throw CsvError("MissingModel", "need --groups G or --hierarchy FILE");
  }
  const FitResult fit = multi_start_fit(data, model, config);
  Json j = fit_result_to_json(fit, data.N);
  j["manifest"] = manifest_json("fit", flags, config, timer.ms(), true);
  emit(flags.out, j.dump(2));
  return 0;
}

int cmd_select_g(const CommonFlags& flags, int gmin, int gmax) {
  Timer timer;
  if (gmin < 1 || gmax < gmin) {
    throw CsvError("BadCandidates", "--gmin/--gmax must satisfy 1 <= gmin <= gmax");
  }
  const SampleCov data = load_data(flags);
  const AlmConfig config = config_from(flags);
  std::vector<int> candidates;
  for (int g = gmin; g <= gmax; ++g) candidates.push_back(g);
  const BicSweepResult sweep = select_g(data, candidates, config);
  Json j = sweep_to_json(sweep, data.N);
  j["manifest"] = manifest_json("select-g", flags, config, timer.ms(), true);
  emit(flags.out, j.dump(2));
  return 0;
}

int cmd_simulate(const CommonFlags& flags, const std::string& study, int j_items,
                 int g_groups, std::int64_t n_obs, int reps, const std::string& format,
                 bool hier_overlap) {
  StudySpec spec;
  if (study == "study1") {
    spec.kind = StudyKind::kStudy1;
  } else if (study == "study2") {
    spec.kind = StudyKind::kStudy2;
  } else if (study == "hier") {
    spec.kind = StudyKind::kHier;
  } else {
    throw CsvError("BadStudy", "--study must be study1, study2, or hier");
  }
  if (format != "json" && format != "csv") {
    throw CsvError("BadFormat", "--out-format must be csv or json");
  }
  if (reps < 0 || j_items < 1) {
    throw CsvError("BadStudy", "invalid study shape");
  }
  spec.n_items = j_items;
  spec.n_groups = g_groups;
  spec.N = n_obs;
  spec.boundary = hier_overlap ? HierBoundary::kSharedBoundary : HierBoundary::kHalfOpen;
  const AlmConfig config = config_from(flags);
  const StudyReport report = run_study(spec, reps, flags.seed, config);
  if (format == "csv") {
    emit(flags.out, report_to_csv(report));
  } else {
    Json j = report_to_json(report);
    // No timing here: reports must be byte-identical across reruns.
    Json m = manifest_json("simulate", flags, config, 0.0, false);
    m["study"] = study;
    m["j"] = j_items;
    m["g"] = g_groups;
    m["reps"] = reps;
    m["out_format"] = format;
    m["hier_overlap"] = hier_overlap;
    j["manifest"] = std::move(m);
    emit(flags.out, j.dump(2));
  }
  return 0;
}

int cmd_check_id(const CommonFlags& flags, const std::string& lambda_path,
                 const std::string& structure_path, double zero_tol, double rank_tol) {
  const MatrixXd lambda = read_csv_matrix(lambda_path);
  const auto structure =
      read_structure_csv(structure_path, static_cast<int>(lambda.rows()));
  DiagnosticTolerances tol;
  tol.zero_tol = zero_tol;
  tol.rank_tol = rank_tol;
  const IdentifiabilityReport report = check_conditions(lambda, structure, tol);
  Json j = identifiability_to_json(report);
  Json m;
  m["subcommand"] = "check-id";
  m["version"] = kVersion;
  m["lambda"] = lambda_path;
  m["structure"] = structure_path;
  m["zero_tol"] = zero_tol;
  m["rank_tol"] = rank_tol;
  m["out"] = flags.out;
  j["manifest"] = std::move(m);
  emit(flags.out, j.dump(2));
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Exact exploratory bi-factor and hierarchical factor analysis"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  CommonFlags flags;
  auto* fit = app.add_subcommand("fit", "fit a bi-factor or hierarchical model");
  add_fit_flags(fit, flags);

  auto* select = app.add_subcommand("select-g", "choose the number of group factors by BIC");
  add_fit_flags(select, flags);
  int gmin = 1, gmax = 1;
  select->add_option("--gmin", gmin, "smallest candidate G")->required();
  select->add_option("--gmax", gmax, "largest candidate G")->required();

  auto* simulate = app.add_subcommand("simulate", "run a simulation study");
  std::string study = "study1", format = "csv";
  int j_items = 15, g_groups = 3, reps = 0;
  std::int64_t n_obs = 500;
  bool hier_overlap = false;
  simulate->add_option("--study", study, "study1 | study2 | hier")->required();
  simulate->add_option("--j", j_items, "number of items");
  simulate->add_option("--g", g_groups, "number of group factors (true G)");
  simulate->add_option("--n", n_obs, "sample size per replication");
  simulate->add_option("--reps", reps, "number of replications")->required();
  simulate->add_option("--seed", flags.seed, "base seed");
  simulate->add_option("--starts", flags.starts, "random starts per fit");
  simulate->add_option("--delta1", flags.delta1, "parameter-change tolerance");
  simulate->add_option("--delta2", flags.delta2, "structure tolerance");
  simulate->add_option("--tmax", flags.tmax, "outer-iteration cap");
  simulate->add_option("--threads", flags.threads, "worker threads (0 = all cores)");
  simulate->add_option("--out-format", format, "csv | json");
  simulate->add_option("--out", flags.out, "output path (stdout if omitted)");
  simulate->add_flag("--hier-overlap", hier_overlap,
                     "share boundary items between sibling blocks in the hier truth");

  auto* check = app.add_subcommand("check-id", "identifiability diagnostics");
  std::string lambda_path, structure_path;
  double zero_tol = 1e-6, rank_tol = 1e-8;
  check->add_option("--lambda", lambda_path, "loading matrix CSV")->required();
  check->add_option("--structure", structure_path, "item,group CSV")->required();
  check->add_option("--zero-tol", zero_tol, "nonzero-loading threshold");
  check->add_option("--rank-tol", rank_tol, "relative rank threshold");
  check->add_option("--out", flags.out, "output path (stdout if omitted)");

  std::vector<const char*> argv;
  argv.push_back("bifactor");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (fit->parsed()) return cmd_fit(flags);
    if (select->parsed()) return cmd_select_g(flags, gmin, gmax);
    if (simulate->parsed()) {
      return cmd_simulate(flags, study, j_items, g_groups, n_obs, reps, format,
                          hier_overlap);
    }
    if (check->parsed()) {
      return cmd_check_id(flags, lambda_path, structure_path, zero_tol, rank_tol);
    }
  } catch (const CsvError& e) {
    emit_error(e.code, e.what(), e.row, e.col);
    return 2;
  } catch (const AllStartsFailedError& e) {
    emit_error("AllStartsFailed", e.what());
    return 3;
  } catch (const StructureMismatchError& e) {
    emit_error("StructureMismatch", e.what());
    return 2;
  } catch (const AsymmetricMatrixError& e) {
    emit_error("AsymmetricMatrix", e.what());
    return 2;
  } catch (const NotPositiveDefiniteError& e) {
    emit_error("NotPositiveDefinite", e.what());
    return 2;
  } catch (const MalformedTreeError& e) {
    emit_error("MalformedTree", e.what());
    return 2;
  } catch (const Error& e) {
    emit_error("Error", e.what());
    return 2;
  }
  return 0;
}

}  // namespace bifactor
