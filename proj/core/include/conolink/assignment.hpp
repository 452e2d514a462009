#pragma once

#include <limits>
#include <vector>

#include <Eigen/Core>

namespace conolink {

/// Cost entry marking a pair that may never be assigned.
inline constexpr double kForbidden = std::numeric_limits<double>::infinity();

/// Rectangular linear assignment (Hungarian method with potentials, O(n^2 m)).
///
/// Among all assignments it first maximizes the number of assigned non-forbidden
/// pairs, then minimizes their total cost. Returns, for each row, the assigned column
/// or -1. Ties resolve deterministically toward lower row/column indices.
std::vector<int> solve_assignment(const Eigen::MatrixXd& cost);

}  // namespace conolink
