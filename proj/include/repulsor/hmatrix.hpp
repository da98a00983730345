#pragma once

#include "repulsor/bvh.hpp"

namespace repulsor {

/// Sobolev order of the energy differential: s = 2 - 2/p for surfaces.
inline double fractionalOrderS(double p) { return 2.0 - 2.0 / p; }

enum class KernelKind {
    Laplace,   // |X-Y|^-(2 sigma + 2)
    HighOrder, // same form with sigma = s - 1
    LowOrder,  // (k2(X,P;Y) + k2(Y,Q;X)) / (2 |X-Y|^(2 sigma + 2)), sigma = s - 1
};

struct KernelSpec {
    KernelKind kind = KernelKind::Laplace;
    double sigma = 0.5;

    void validate() const;
};

double kernelValue(const KernelSpec& spec, const Vec3& X, const Mat3& P, const Vec3& Y,
                   const Mat3& Q);

/// Leaf blocks of the pair decomposition of F x F. Admissible blocks satisfy
/// max(r(I), r(J)) <= chi * dist(box(I), box(J)); inadmissible leaves are
/// multiplied exactly. chi = 0 makes every block inadmissible.
struct BlockClusterTree {
    const Bvh* bvh = nullptr;
    double chi = 0.5;
    std::vector<std::pair<int, int>> admissible;
    std::vector<std::pair<int, int>> inadmissible; // both clusters are BVH leaves
};

BlockClusterTree buildBlockClusterTree(const Bvh& bvh, double chi);

/// One kernel matrix compressed over a block cluster tree: an exact sparse
/// near field over faces plus a rank-one far field over clusters, applied
/// with an upward pass, a sparse cluster-coupling product, and a downward
/// pass.
struct HKernelMatrix {
    const Bvh* bvh = nullptr;
    SparseMat near; // |F| x |F|
    SparseMat far;  // nClusters x nClusters

    Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const;
    Eigen::VectorXd apply(const Eigen::VectorXd& x) const;
};

HKernelMatrix buildKernelMatrix(const BlockClusterTree& bct, const KernelSpec& spec);

/// Dense assembly of the same kernel matrix (test oracle; zero diagonal).
Eigen::MatrixXd denseKernelMatrix(const Bvh& bvh, const KernelSpec& spec);

/// Averaging operator U (|F| x |V|): vertex values to face means times area.
SparseMat buildAveragingOperator(const TriMesh& mesh, const std::vector<FaceGeometry>& geom);

/// Piecewise-linear gradient components D_c (|F| x |V| each): row S of D_c
/// holds the c-th component of the hat-function gradients within face S.
std::array<SparseMat, 3> buildDerivativeOperator(const TriMesh& mesh,
                                                 const std::vector<FaceGeometry>& geom);

/// The fractional operators L^sigma, B, B0, A = B + B0 and the blockwise A3,
/// all applied through kernel-matrix products and the identity
///   op v = 2 W^T [diag(diag(a)^-1 H a) - H] W v,  W = U or V = diag(a) D.
class FractionalStack {
public:
    FractionalStack(const TriMesh& mesh, const std::vector<FaceGeometry>& geom,
                    const BlockClusterTree& bct, double p, bool lowOrder = true);

    // Forward kernel of the preconditioner, order 2(2-s).
    Eigen::VectorXd applyLsigmaPre(const Eigen::VectorXd& v) const;
    Eigen::VectorXd applyB(const Eigen::VectorXd& v) const;
    Eigen::VectorXd applyB0(const Eigen::VectorXd& v) const;
    /// The verbatim V-based low-order product; kept to measure its deviation
    /// from the assembled low-order operator (see b0RouteDeviation).
    Eigen::VectorXd applyB0ViaV(const Eigen::VectorXd& v) const;
    Eigen::VectorXd applyA(const Eigen::VectorXd& v) const;
    Eigen::MatrixXd applyA3(const Eigen::MatrixXd& x) const; // |V| x 3

    double orderS() const { return s_; }
    bool lowOrderEnabled() const { return lowOrder_; }
    int numVertices() const { return nV_; }
    int numFaces() const { return nF_; }
    const SparseMat& averagingOperator() const { return U_; }
    const std::array<SparseMat, 3>& derivativeOperator() const { return D_; }
    const Eigen::VectorXd& faceAreas() const { return area_; }
    const HKernelMatrix& highOrderKernel() const { return Hhigh_; }
    const HKernelMatrix& lowOrderKernel() const { return Hlow_; }
    const HKernelMatrix& preconditionerKernel() const { return Hpre_; }

private:
    int nV_ = 0, nF_ = 0;
    double p_ = 6, s_ = 0;
    bool lowOrder_ = true;
    SparseMat U_;
    std::array<SparseMat, 3> D_;
    Eigen::VectorXd area_;
    HKernelMatrix Hhigh_, Hlow_, Hpre_;
    Eigen::VectorXd diagHigh_, diagLow_, diagPre_;
};

enum class FractionalOp { Lsigma, B, B0 };

/// Exact dense assembly of the discrete fractional operators by the
/// quadratic-time loop over face pairs restricted to nonzero hat-function
/// supports. Test oracle; capped at maxFaces.
Eigen::MatrixXd assembleDenseFractional(const TriMesh& mesh, const std::vector<FaceGeometry>& geom,
                                        FractionalOp which, double sigma, int maxFaces = 2048);

} // namespace repulsor
