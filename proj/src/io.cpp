#include "bifactor/io.hpp"

#include "bifactor/version.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace bifactor {

namespace {

std::string trim(const std::string& s) {
  size_t lo = 0, hi = s.size();
  while (lo < hi && std::isspace(static_cast<unsigned char>(s[lo]))) ++lo;
  while (hi > lo && std::isspace(static_cast<unsigned char>(s[hi - 1]))) --hi;
  return s.substr(lo, hi - lo);
}

std::vector<std::string> split_cells(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.push_back("");
  return cells;
}

bool parse_double(const std::string& cell, double& out) {
  if (cell.empty()) return false;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc{} && ptr == end;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

MatrixXd read_csv_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CsvError("FileNotFound", "cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  bool header_allowed = true;
  size_t width = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_cells(line);
    std::vector<double> row(cells.size());
    bool numeric = true;
    int bad_col = 0;
    for (size_t c = 0; c < cells.size(); ++c) {
      if (!parse_double(cells[c], row[c])) {
        numeric = false;
        bad_col = static_cast<int>(c) + 1;
        break;
      }
    }
    if (!numeric) {
      if (header_allowed) {  // a leading non-numeric line is a header
        header_allowed = false;
        continue;
      }
      throw CsvError("NonNumericCell",
                     "non-numeric cell at line " + std::to_string(line_no) + ", column " +
                         std::to_string(bad_col),
                     line_no, bad_col);
    }
    header_allowed = false;
    if (width == 0) width = row.size();
    if (row.size() != width) {
      throw CsvError("RaggedRow", "row of width " + std::to_string(row.size()) +
                                      " at line " + std::to_string(line_no) +
                                      " (expected " + std::to_string(width) + ")",
                     line_no, 0);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw CsvError("EmptyFile", "no numeric rows in " + path);
  MatrixXd m(rows.size(), width);
  for (size_t r = 0; r < rows.size(); ++r) {
    for (size_t c = 0; c < width; ++c) m(r, c) = rows[r][c];
  }
  return m;
}

SampleCov ingest(const std::string& path, IngestKind kind,
                 std::optional<std::int64_t> n_override) {
  const MatrixXd m = read_csv_matrix(path);
  if (kind == IngestKind::kRaw) {
    const auto n = static_cast<std::int64_t>(m.rows());
    const std::int64_t effective_n = n_override.value_or(n);
    const Eigen::RowVectorXd mean = m.colwise().mean();
    const MatrixXd centered = m.rowwise() - mean;
    MatrixXd s = centered.transpose() * centered / static_cast<double>(n);
    s = 0.5 * (s + s.transpose());
    return make_sample_cov(std::move(s), effective_n);
  }
  if (!n_override.has_value()) {
    throw CsvError("MissingN", "covariance input requires an explicit sample size");
  }
  if (m.rows() != m.cols()) {
    throw CsvError("NotSquare", "covariance matrix must be square");
  }
  return make_sample_cov(m, *n_override);
}

HierarchyTree read_hierarchy_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CsvError("FileNotFound", "cannot open " + path);
  std::vector<std::pair<int, int>> edges;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::istringstream ss(t);
    int child = 0, parent = -1;
    if (!(ss >> child >> parent)) {
      throw CsvError("BadHierarchyLine", "expected 'child parent' at line " +
                                             std::to_string(line_no),
                     line_no, 0);
    }
    edges.push_back({child, parent});
  }
  return make_tree(edges);
}

std::vector<int> read_structure_csv(const std::string& path, int n_items) {
  std::ifstream in(path);
  if (!in) throw CsvError("FileNotFound", "cannot open " + path);
  std::vector<int> structure(n_items, -1);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    const auto cells = split_cells(t);
    double item = 0, group = 0;
    if (cells.size() != 2 || !parse_double(cells[0], item) || !parse_double(cells[1], group)) {
      if (line_no == 1) continue;  // header
      throw CsvError("BadStructureLine",
                     "expected 'item,group' at line " + std::to_string(line_no), line_no, 0);
    }
    const int j = static_cast<int>(item);
    if (j < 1 || j > n_items) {
      throw CsvError("ItemOutOfRange", "item id out of range at line " +
                                           std::to_string(line_no),
                     line_no, 1);
    }
    structure[j - 1] = static_cast<int>(group);
  }
  for (int j = 0; j < n_items; ++j) {
    if (structure[j] < 0) {
      throw CsvError("MissingItem", "item " + std::to_string(j + 1) + " has no group");
    }
  }
  return structure;
}

Json matrix_to_json(const MatrixXd& m) {
  Json j;
  j["rows"] = m.rows();
  j["cols"] = m.cols();
  std::vector<double> data;
  data.reserve(m.size());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  }
  j["data"] = data;
  return j;
}

MatrixXd matrix_from_json(const Json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) {
    throw Error("matrix data length does not match rows*cols");
  }
  MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = data[r * cols + c];
  }
  return m;
}

Json fit_result_to_json(const FitResult& fit, std::int64_t N) {
  Json j;
  j["lambda"] = matrix_to_json(fit.params.lambda);
  j["phi"] = matrix_to_json(fit.phi);
  j["psi"] = std::vector<double>(fit.params.psi.data(),
                                 fit.params.psi.data() + fit.params.psi.size());
  j["structure"] = fit.structure;
  j["factor_sets"] = fit.factor_sets;
  j["loss"] = fit.loss;
  const int n_gamma = static_cast<int>(fit.params.gamma.size());
  j["bic"] = fit.loss + n_gamma * std::log(static_cast<double>(N));
  j["converged"] = fit.converged;
  j["exact_structure"] = fit.exact_structure;
  j["iterations"] = fit.outer_iters;
  j["restarts_used"] = fit.restarts_used;
  j["h_max"] = fit.h_max;
  j["start_index"] = fit.start_index;
  return j;
}

Json sweep_to_json(const BicSweepResult& sweep, std::int64_t N) {
  Json j;
  j["candidates"] = sweep.candidates;
  j["losses"] = sweep.losses;
  j["bics"] = sweep.bics;
  j["ok"] = sweep.ok;
  j["chosen"] = sweep.chosen;
  for (size_t i = 0; i < sweep.candidates.size(); ++i) {
    if (sweep.ok[i] && sweep.candidates[i] == sweep.chosen && sweep.fits[i].has_value()) {
      j["fit"] = fit_result_to_json(*sweep.fits[i], N);
      break;
    }
  }
  return j;
}

Json efa_sweep_to_json(const EfaSweepResult& sweep) {
  Json j;
  j["candidates"] = sweep.candidates_g;
  j["losses"] = sweep.losses;
  j["bics"] = sweep.bics;
  j["ok"] = sweep.ok;
  j["chosen"] = sweep.chosen_g;
  return j;
}

namespace {

const char* study_name(StudyKind kind) {
  switch (kind) {
    case StudyKind::kStudy1: return "study1";
    case StudyKind::kStudy2: return "study2";
    case StudyKind::kHier: return "hier";
  }
  return "unknown";
}

}  // namespace

Json report_to_json(const StudyReport& report) {
  Json j;
  j["study"] = study_name(report.spec.kind);
  j["j"] = report.spec.n_items;
  if (report.spec.kind != StudyKind::kHier) j["g"] = report.spec.n_groups;
  j["n"] = report.spec.N;
  j["replications"] = report.replications;
  j["seed"] = report.base_seed;
  j["starts"] = report.config.n_starts;
  j["n_failed"] = report.n_failed;
  Json rows = Json::array();
  for (const auto& row : report.rows) {
    Json r;
    r["rep"] = row.rep;
    r["seed"] = row.seed;
    r["ok"] = row.ok;
    if (report.spec.kind == StudyKind::kStudy2) {
      r["g_alm"] = row.g_alm;
      r["sc_alm"] = row.sc_alm;
      r["g_efa"] = row.g_efa;
      r["sc_efa"] = row.sc_efa;
    } else {
      r["loss"] = row.loss;
      r["mse"] = row.mse;
      r["emc"] = row.emc;
      r["acc"] = row.acc;
      r["iterations"] = row.outer_iters;
      r["restarts"] = row.restarts;
    }
    rows.push_back(std::move(r));
  }
  j["rows"] = std::move(rows);
  Json agg;
  if (report.spec.kind == StudyKind::kStudy2) {
    agg["mean_g_alm"] = report.mean_g_alm;
    agg["sc_alm"] = report.mean_sc_alm;
    agg["mean_g_efa"] = report.mean_g_efa;
    agg["sc_efa"] = report.mean_sc_efa;
  } else {
    agg["mse"] = report.mean_mse;
    agg["emc"] = report.mean_emc;
    agg["acc"] = report.mean_acc;
  }
  j["aggregates"] = std::move(agg);
  return j;
}

std::string report_to_csv(const StudyReport& report) {
  std::string out;
  const bool study2 = report.spec.kind == StudyKind::kStudy2;
  if (study2) {
    out += "rep,seed,ok,g_alm,sc_alm,g_efa,sc_efa\n";
  } else {
    out += "rep,seed,ok,loss,mse,emc,acc,iterations,restarts\n";
  }
  for (const auto& row : report.rows) {
    out += std::to_string(row.rep) + "," + std::to_string(row.seed) + "," +
           (row.ok ? "1" : "0") + ",";
    if (study2) {
      out += std::to_string(row.g_alm) + "," + std::to_string(row.sc_alm) + "," +
             std::to_string(row.g_efa) + "," + std::to_string(row.sc_efa);
    } else {
      out += format_double(row.loss) + "," + format_double(row.mse) + "," +
             std::to_string(row.emc) + "," + format_double(row.acc) + "," +
             std::to_string(row.outer_iters) + "," + std::to_string(row.restarts);
    }
    out += "\n";
  }
  if (study2) {
    out += "aggregate,,," + format_double(report.mean_g_alm) + "," +
           format_double(report.mean_sc_alm) + "," + format_double(report.mean_g_efa) + "," +
           format_double(report.mean_sc_efa) + "\n";
  } else {
    out += "aggregate,,,," + format_double(report.mean_mse) + "," +
           format_double(report.mean_emc) + "," + format_double(report.mean_acc) + ",,\n";
  }
  return out;
}

Json identifiability_to_json(const IdentifiabilityReport& report) {
  Json j;
  j["q_sets"] = report.q_sets;
  j["h_set"] = report.h_set;
  j["condition2"] = report.condition2;
  j["condition2_witness"] = report.condition2_witness;
  j["condition3"] = report.condition3;
  j["condition5"] = report.condition5;
  j["anderson_rubin_rows"] = report.anderson_rubin_rows;
  Json tol;
  tol["zero_tol"] = report.tolerances.zero_tol;
  tol["rank_tol"] = report.tolerances.rank_tol;
  tol["phi_zero_tol"] = report.tolerances.phi_zero_tol;
  tol["search_restarts"] = report.tolerances.search_restarts;
  j["tolerances"] = std::move(tol);
  return j;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << content;
}

}  // namespace bifactor
