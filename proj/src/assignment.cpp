#include "bifactor/assignment.hpp"

#include <limits>
#include <stdexcept>

namespace bifactor {

double solve_assignment(const Eigen::MatrixXd& cost, std::vector<int>& row_to_col) {
  const int n = static_cast<int>(cost.rows());
  if (cost.cols() != n) throw std::invalid_argument("cost matrix must be square");
  constexpr double kInf = std::numeric_limits<double>::infinity();

  // Shortest augmenting paths with potentials, 1-based helper arrays.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      int j1 = 0;
      double delta = kInf;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }

  row_to_col.assign(n, -1);
  double total = 0.0;
  for (int j = 1; j <= n; ++j) {
    if (p[j]) {
      row_to_col[p[j] - 1] = j - 1;
      total += cost(p[j] - 1, j - 1);
    }
  }
  return total;
}

}  // namespace bifactor
