#include "malgrid/lap.hpp"

#include "malgrid/common.hpp"

#include <cmath>
#include <limits>

namespace malgrid::lap {

std::vector<int> solve(std::span<const double> cost, std::size_t n) {
    if (cost.size() != n * n) throw Error("lap: cost matrix must be n x n");
    for (double c : cost)
        if (!std::isfinite(c)) throw Error("lap: non-finite cost");
    if (n == 0) return {};

    constexpr double inf = std::numeric_limits<double>::infinity();
    const auto N = static_cast<int>(n);
    // 1-based internal arrays; index 0 is the virtual root column.
    std::vector<double> u(N + 1, 0.0), v(N + 1, 0.0), min_to(N + 1);
    std::vector<int> row_of_col(N + 1, 0), way(N + 1, 0);
    std::vector<char> used(N + 1);

    // Column reduction seeds the column potentials.
    for (int j = 1; j <= N; ++j) {
        double m = inf;
        for (int i = 0; i < N; ++i) m = std::min(m, cost[static_cast<std::size_t>(i) * n + (j - 1)]);
        v[j] = m;
    }

    for (int row = 1; row <= N; ++row) {
        row_of_col[0] = row;
        int j0 = 0;
        std::fill(min_to.begin(), min_to.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const int i0 = row_of_col[j0];
            const double* crow = cost.data() + static_cast<std::size_t>(i0 - 1) * n;
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= N; ++j) {
                if (used[j]) continue;
                const double reduced = crow[j - 1] - u[i0] - v[j];
                if (reduced < min_to[j]) {
                    min_to[j] = reduced;
                    way[j] = j0;
                }
                if (min_to[j] < delta) {
                    delta = min_to[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= N; ++j) {
                if (used[j]) {
                    u[row_of_col[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_to[j] -= delta;
                }
            }
            j0 = j1;
        } while (row_of_col[j0] != 0);
        do {
            const int j1 = way[j0];
            row_of_col[j0] = row_of_col[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<int> col_of_row(n, -1);
    for (int j = 1; j <= N; ++j) col_of_row[row_of_col[j] - 1] = j - 1;
    return col_of_row;
}

double assignment_cost(std::span<const double> cost, std::size_t n, std::span<const int> col_of_row) {
    double total = 0.0;
    for (std::size_t i = 0; i < col_of_row.size(); ++i) total += cost[i * n + static_cast<std::size_t>(col_of_row[i])];
    return total;
}

}  // namespace malgrid::lap
