#pragma once

#include <functional>
#include <memory>

#include "repulsor/hmatrix.hpp"

namespace repulsor {

struct SolveReport {
    int iterations = 0;
    double relResidual = 0;
    double seconds = 0;
};

struct SolveFailure : std::runtime_error {
    SolveFailure(const std::string& what, Eigen::VectorXd best, SolveReport rep)
        : std::runtime_error(what), bestIterate(std::move(best)), report(rep)
    {
    }
    Eigen::VectorXd bestIterate;
    SolveReport report;
};

using LinearOp = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct GmresOptions {
    double tol = 1e-6;
    int maxIterations = 1000;
    int restart = 30;
};

/// Left-preconditioned restarted GMRES with zero initial guess. Convergence
/// is certified on the unpreconditioned residual. Throws SolveFailure with
/// the best iterate when the iteration cap is hit.
Eigen::VectorXd gmres(const LinearOp& A, const Eigen::VectorXd& b, const LinearOp& M,
                      const GmresOptions& opts, SolveReport& report);

/// Factorization of the cotan stiffness augmented with scalar positional
/// rows: [Delta C^T; C 0]. One scalar factorization serves all coordinates.
class PoissonSolver {
public:
    PoissonSolver(const TriMesh& mesh, const SparseMat& stiffness, const SparseMat& rows);

    void solve(const Eigen::VectorXd& rhsVertex, const Eigen::VectorXd& rhsRows,
               Eigen::VectorXd& vertexPart, Eigen::VectorXd& multiplier) const;

    int numVertices() const { return nV_; }
    int numRows() const { return m_; }

private:
    Eigen::SparseLU<SparseMat> lu_;
    int nV_ = 0, m_ = 0;
};

/// The fractional preconditioner: two augmented Poisson back-substitutions
/// sandwiching one forward application of L^(2-s). The forward operator is
/// discretized by vertex-pair midpoint quadrature of the same double
/// integral (vertex positions, dual-area weights) and compressed over a
/// vertex-cloud block cluster tree; the face-averaged quartic assembly loses
/// spectral equivalence under refinement and would spoil mesh-independent
/// solver behavior. Acts on vectors of size 3|V| + 3m; the multiplier slot
/// carries a calibrated scaled identity to keep the map positive definite.
class Preconditioner {
public:
    Preconditioner(const TriMesh& mesh, const FractionalStack& stack, const SparseMat& posRows,
                   double chi = 0.5);

    Eigen::VectorXd apply(const Eigen::VectorXd& r) const;
    const PoissonSolver& poisson() const { return *poisson_; }

    /// Vertex-quadrature forward fractional operator of order 2(2-s).
    Eigen::VectorXd applyForwardFractional(const Eigen::VectorXd& v) const;
    double lambdaScale() const { return lambdaScale_; }

private:
    std::shared_ptr<PoissonSolver> poisson_;
    Bvh vertexBvh_;
    BlockClusterTree vertexBct_;
    HKernelMatrix Hpre_;
    Eigen::VectorXd dualAreas_, diagPre_;
    int nV_ = 0, m_ = 0;
    double lambdaScale_ = 1.0;
};

enum class MetricKind { Hs, L2, H1, H2 };

MetricKind metricKindFromString(const std::string& name);
std::string metricKindName(MetricKind kind);

/// Uniform solve interface for the positional-row-augmented saddle system
///   [Op3 J^T; J 0] [x; lambda] = [b; 0],
/// returning the vertex block x (interleaved, length 3|V|).
class MetricSolver {
public:
    virtual ~MetricSolver() = default;
    virtual Eigen::VectorXd solve(const Eigen::VectorXd& b, SolveReport* report = nullptr) const = 0;
    virtual int dimension() const = 0;
};

/// H^s metric: matrix-free A3 through the hierarchical stack, solved by
/// GMRES with the fractional preconditioner.
class HsSolver : public MetricSolver {
public:
    HsSolver(const TriMesh& mesh, const FractionalStack& stack, const SparseMat& posRows,
             GmresOptions opts = {}, bool usePreconditioner = true, double chi = 0.5);

    /// Optional sparse scalar term added to the metric per coordinate
    /// (weight * extra), e.g. the H^2 augmentation accompanying a Willmore
    /// penalty.
    void setExtraTerm(const SparseMat& extra, double weight);

    Eigen::VectorXd solve(const Eigen::VectorXd& b, SolveReport* report = nullptr) const override;
    int dimension() const override { return 3 * nV_; }

    Eigen::VectorXd applyOperator(const Eigen::VectorXd& z) const; // size 3|V| + 3m

private:
    const TriMesh* mesh_;
    const FractionalStack* stack_;
    SparseMat posRows_;
    GmresOptions opts_;
    bool usePreconditioner_;
    std::shared_ptr<Preconditioner> precond_;
    SparseMat extra_;
    double extraWeight_ = 0;
    int nV_ = 0, m_ = 0;
};

/// Integer-order baselines (L2 mass, H1 stiffness, H2 bi-Laplacian weak
/// form); the scalar augmented system is factorized once and solved per
/// coordinate.
class SparseMetricSolver : public MetricSolver {
public:
    SparseMetricSolver(const TriMesh& mesh, MetricKind kind, const SparseMat& posRows,
                       const SparseMat& extra = {}, double extraWeight = 0);

    Eigen::VectorXd solve(const Eigen::VectorXd& b, SolveReport* report = nullptr) const override;
    int dimension() const override { return 3 * nV_; }

private:
    Eigen::SparseLU<SparseMat> lu_;
    int nV_ = 0, m_ = 0;
};

/// Requires at least one positional row per connected component (otherwise
/// the augmented Laplacian is singular); throws otherwise.
void checkPositionalRows(const TriMesh& mesh, const SparseMat& rows);

} // namespace repulsor
