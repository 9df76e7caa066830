#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace krigmorph {

using Point3 = Eigen::Vector3d;
using Vector3 = Eigen::Vector3d;
using PointList = std::vector<Point3>;
using PointSpan = std::span<const Point3>;

using Matrix = Eigen::MatrixXd;
using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

} // namespace krigmorph
