#include "cegcl/assignment.hpp"

#include <limits>
#include <stdexcept>

namespace cegcl {

namespace {

// Requires rows <= cols. Returns column for each row.
std::vector<Index> solve_wide(const Matrix& a) {
  const Index n = a.rows(), m = a.cols();
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based potentials; column 0 is the virtual start.
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<Index> p(m + 1, 0), way(m + 1, 0);
  for (Index i = 1; i <= n; ++i) {
    p[0] = i;
    Index j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const Index i0 = p[j0];
      double delta = inf;
      Index j1 = 0;
      for (Index j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (Index j = 0; j <= m; ++j) {
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
      const Index j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<Index> out(static_cast<std::size_t>(n), -1);
  for (Index j = 1; j <= m; ++j) {
    if (p[j] != 0) out[p[j] - 1] = j - 1;
  }
  return out;
}

}  // namespace

std::vector<Index> min_cost_assignment(const Matrix& cost) {
  if (!cost.allFinite()) throw std::invalid_argument("assignment cost matrix must be finite");
  if (cost.rows() == 0) return {};
  if (cost.rows() <= cost.cols()) return solve_wide(cost);
  const auto by_col = solve_wide(cost.transpose());
  std::vector<Index> out(static_cast<std::size_t>(cost.rows()), -1);
  for (std::size_t c = 0; c < by_col.size(); ++c) out[by_col[c]] = static_cast<Index>(c);
  return out;
}

}  // namespace cegcl
