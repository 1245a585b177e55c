#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace specfil {

// Row-major throughout: feature rows are gathered/scattered by node id and
// the CSR kernels stream over rows, so contiguous rows are the common case.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Index = std::int64_t;

}  // namespace specfil
