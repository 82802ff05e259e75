// Minimum-cost assignment (Jonker-Volgenant style shortest augmenting
// paths) for matching estimated factor columns or groups to true ones.
#pragma once

#include <Eigen/Dense>

#include <vector>

namespace bifactor {

// Square cost matrix; returns the minimizing column for each row and the
// total cost.
double solve_assignment(const Eigen::MatrixXd& cost, std::vector<int>& row_to_col);

}  // namespace bifactor
