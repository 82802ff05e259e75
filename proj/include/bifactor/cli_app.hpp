#pragma once

#include <string>
#include <vector>

namespace bifactor {

// Entry point behind the command-line tool. Exit codes: 0 on success, 2 on
// ingestion/validation errors, 3 when no start converges; errors are emitted
// as JSON on stderr.
int run_cli(const std::vector<std::string>& args);

}  // namespace bifactor
