#pragma once

#include <Eigen/Dense>

namespace mlnet {

// All numerics run in 64-bit floats so finite-difference checks stay clean.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

}  // namespace mlnet
