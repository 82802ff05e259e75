// CSV ingestion, hierarchy files, and JSON/CSV serialization of results.
#pragma once

#include "bifactor/alm.hpp"
#include "bifactor/diagnostics.hpp"
#include "bifactor/selection.hpp"
#include "bifactor/simlab.hpp"
#include "bifactor/types.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace bifactor {

using Json = nlohmann::ordered_json;

struct CsvError : Error {
  CsvError(std::string code_, const std::string& msg, int row_ = 0, int col_ = 0)
      : Error(msg), code(std::move(code_)), row(row_), col(col_) {}
  std::string code;  // NonNumericCell, AsymmetricMatrix, ...
  int row = 0;       // 1-based file line
  int col = 0;       // 1-based column
};

// Numeric CSV with an optional header line (detected by non-numeric cells).
// Throws CsvError{NonNumericCell|RaggedRow|EmptyFile} with the offending
// position reported.
MatrixXd read_csv_matrix(const std::string& path);

enum class IngestKind { kRaw, kCov };

// raw: N x J table, centered columnwise, reduced to its covariance with
// divisor N. cov: J x J matrix validated for symmetry and positive
// definiteness; n_override is mandatory (MissingN otherwise).
SampleCov ingest(const std::string& path, IngestKind kind,
                 std::optional<std::int64_t> n_override);

// One "child parent" pair per line, root listed as "1 0".
HierarchyTree read_hierarchy_file(const std::string& path);

// Lines of "item,group" (1-based items, groups in 0..G).
std::vector<int> read_structure_csv(const std::string& path, int n_items);

Json matrix_to_json(const MatrixXd& m);  // {rows, cols, data} row-major
MatrixXd matrix_from_json(const Json& j);

Json fit_result_to_json(const FitResult& fit, std::int64_t N);
Json sweep_to_json(const BicSweepResult& sweep, std::int64_t N);
Json efa_sweep_to_json(const EfaSweepResult& sweep);
Json report_to_json(const StudyReport& report);
Json identifiability_to_json(const IdentifiabilityReport& report);

std::string report_to_csv(const StudyReport& report);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace bifactor
