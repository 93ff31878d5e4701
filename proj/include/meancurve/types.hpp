#pragma once

#include <cstdint>

#include <Eigen/Dense>

namespace meancurve {

// Row-major so a unit's trajectory is contiguous.
using MatrixRd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MaskMatrix = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

} // namespace meancurve
