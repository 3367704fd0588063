#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace malgrid::lap {

/// Solves the square linear assignment problem on a row-major n x n cost
/// matrix by shortest augmenting paths with dual potentials (Jonker-Volgenant
/// family). Returns col_of_row. Ties resolve to the lowest column index.
std::vector<int> solve(std::span<const double> cost, std::size_t n);

/// Sum of cost[i][col_of_row[i]] in row order.
double assignment_cost(std::span<const double> cost, std::size_t n, std::span<const int> col_of_row);

}  // namespace malgrid::lap
