#include "conolink/assignment.hpp"

#include <algorithm>
#include <cmath>

#include "conolink/error.hpp"

namespace conolink {

namespace {

// Square-or-wide case (rows <= cols). Classic shortest augmenting path with
// row/column potentials; 1-based internal indexing.
std::vector<int> solve_wide(const Eigen::MatrixXd& a) {
    const int n = static_cast<int>(a.rows());
    const int m = static_cast<int>(a.cols());
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0), minv(m + 1);
    std::vector<int> p(m + 1, 0), way(m + 1, 0);
    std::vector<char> used(m + 1);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= m; ++j) {
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
            for (int j = 0; j <= m; ++j) {
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
        } while (j0 != 0);
    }
    std::vector<int> row_to_col(n, -1);
    for (int j = 1; j <= m; ++j) {
        if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
    }
    return row_to_col;
}

}  // namespace

std::vector<int> solve_assignment(const Eigen::MatrixXd& cost) {
    const auto rows = cost.rows();
    const auto cols = cost.cols();
    if (rows == 0 || cols == 0) return std::vector<int>(static_cast<std::size_t>(rows), -1);

    double max_abs = 0.0;
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            const double c = cost(i, j);
            if (std::isnan(c)) throw ValidationError("assignment cost is NaN");
            if (std::isfinite(c)) max_abs = std::max(max_abs, std::abs(c));
            else if (c < 0) throw ValidationError("assignment cost is -inf");
        }
    }
    // A forbidden pair costs more than any complete assignment of allowed pairs,
    // so the solver uses as few of them as possible.
    const double big = (2.0 * max_abs + 1.0) * static_cast<double>(std::min(rows, cols) + 1);
    Eigen::MatrixXd work = cost.unaryExpr([big](double c) { return std::isfinite(c) ? c : big; });

    std::vector<int> result(static_cast<std::size_t>(rows), -1);
    if (rows <= cols) {
        result = solve_wide(work);
    } else {
        const std::vector<int> col_to_row = solve_wide(work.transpose());
        for (std::size_t j = 0; j < col_to_row.size(); ++j) {
            if (col_to_row[j] >= 0) result[static_cast<std::size_t>(col_to_row[j])] = static_cast<int>(j);
        }
    }
    for (Eigen::Index i = 0; i < rows; ++i) {
        const int j = result[static_cast<std::size_t>(i)];
        if (j >= 0 && !std::isfinite(cost(i, j))) result[static_cast<std::size_t>(i)] = -1;
    }
    return result;
}

}  // namespace conolink
