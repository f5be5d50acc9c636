#pragma once

#include "cegcl/types.hpp"

#include <vector>

namespace cegcl {

/// Minimum-cost rectangular assignment (Hungarian method with potentials).
/// Returns, for every row, the matched column, or -1 when the matrix has more
/// rows than columns and the row is left unmatched. O(min^2 * max).
std::vector<Index> min_cost_assignment(const Matrix& cost);

/// Same, maximizing the total weight.
inline std::vector<Index> max_weight_assignment(const Matrix& weight) { return min_cost_assignment(-weight); }

}  // namespace cegcl
