#pragma once

// Dense test oracles shared across suites. Everything here goes through
// dense assembly and direct factorizations, independent of the hierarchical
// code paths under test.

#include <random>

#include "repulsor/constraints.hpp"
#include "repulsor/hmatrix.hpp"

namespace repulsor::testing {

inline Eigen::MatrixXd denseA(const TriMesh& mesh, const std::vector<FaceGeometry>& geom,
                              double p, bool lowOrder = true)
{
    double s = fractionalOrderS(p);
    Eigen::MatrixXd A = assembleDenseFractional(mesh, geom, FractionalOp::B, s - 1.0);
    if (lowOrder) A += assembleDenseFractional(mesh, geom, FractionalOp::B0, s - 1.0);
    return A;
}

inline Eigen::MatrixXd interleave3(const Eigen::MatrixXd& A)
{
    const int n = static_cast<int>(A.rows());
    Eigen::MatrixXd A3 = Eigen::MatrixXd::Zero(3 * n, 3 * n);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            for (int c = 0; c < 3; ++c) A3(3 * i + c, 3 * j + c) = A(i, j);
        }
    }
    return A3;
}

/// Direct dense solve of the full saddle system
///   [A3 J^T; J 0][x; lambda] = [g; rhsC],
/// with J carrying all constraint rows.
inline Eigen::VectorXd denseSaddleSolve(const Eigen::MatrixXd& A3, const Eigen::MatrixXd& J,
                                        const Eigen::VectorXd& g, const Eigen::VectorXd& rhsC)
{
    const int n = static_cast<int>(A3.rows());
    const int k = static_cast<int>(J.rows());
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(n + k, n + k);
    M.topLeftCorner(n, n) = A3;
    M.topRightCorner(n, k) = J.transpose();
    M.bottomLeftCorner(k, n) = J;
    Eigen::VectorXd rhs(n + k);
    rhs.head(n) = g;
    rhs.tail(k) = rhsC;
    Eigen::VectorXd sol = M.partialPivLu().solve(rhs);
    return sol.head(n);
}

inline Eigen::VectorXd randomVector(int n, unsigned seed)
{
    std::mt19937 rng(seed);
    std::normal_distribution<double> gauss;
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v[i] = gauss(rng);
    return v;
}

} // namespace repulsor::testing
