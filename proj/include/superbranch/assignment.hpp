#ifndef SUPERBRANCH_ASSIGNMENT_HPP
#define SUPERBRANCH_ASSIGNMENT_HPP

#include "superbranch/core.hpp"

#include <vector>

namespace superbranch {

struct Assignment {
  std::vector<std::size_t> row_to_col;
  double cost = 0.0;
};

/// Minimum-cost perfect matching on a square cost matrix (shortest
/// augmenting path with potentials, O(n^3)).
Assignment solve_assignment(const MatrixRef& cost);

} // namespace superbranch

#endif
