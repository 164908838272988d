#pragma once

#include <Eigen/Dense>

namespace srgt {

// Row-major so matrices map 1:1 onto the serialized flat layouts.
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;

}  // namespace srgt
