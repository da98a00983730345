#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace repulsor {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using SparseMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

using VertexId = int;
using FaceId = int;

// Faces with area below this are considered degenerate.
constexpr double kDegenerateAreaTol = 1e-12;

} // namespace repulsor
