#pragma once

#include "repulsor/precond.hpp"

namespace repulsor {

struct Constraint {
    enum class Kind { Barycenter, Pin, TotalArea, TotalVolume };
    Kind kind = Kind::Barycenter;
    int component = 0;               // Barycenter
    int vertex = -1;                 // Pin
    Vec3 targetPoint = Vec3::Zero(); // Barycenter / Pin
    double targetScalar = 0;         // TotalArea / TotalVolume

    int rowCount() const { return (kind == Kind::Barycenter || kind == Kind::Pin) ? 3 : 1; }
    bool positional() const { return kind == Kind::Barycenter || kind == Kind::Pin; }
};

struct ConstraintSet {
    std::vector<Constraint> items;

    int totalRows() const;
    int schurRows() const; // scalar rows handled through the Schur complement
    bool hasBarycenter(int component) const;
    std::vector<int> pinnedVertices() const;

    /// Sets every target to the current mesh state.
    void captureTargets(const TriMesh& mesh);
};

/// Stacked residuals in constraint order (barycenter/pin contribute 3 rows,
/// area/volume one each). Barycenter residuals use vertex dual areas.
Eigen::VectorXd constraintValues(const ConstraintSet& set, const TriMesh& mesh);

/// Residuals scaled for reporting: area and volume divided by their targets.
Eigen::VectorXd constraintResidualsNormalized(const ConstraintSet& set, const TriMesh& mesh);

/// Jacobian of all constraints (k x 3|V|). Barycenter rows use the
/// frozen-area form: plain identity copies over the component's vertices.
SparseMat constraintJacobian(const ConstraintSet& set, const TriMesh& mesh);

/// One scalar row per barycenter component / pinned vertex (shared by the
/// three coordinates); these are folded into the metric operator instead of
/// the Schur complement.
SparseMat positionalRowsScalar(const ConstraintSet& set, const TriMesh& mesh);

/// Jacobian restricted to the Schur-handled constraints (area/volume).
SparseMat schurJacobian(const ConstraintSet& set, const TriMesh& mesh);

/// Zeroes pinned coordinates and removes the per-component mean wherever a
/// barycenter row exists, making positional tangency exact.
void cleanPositional(const ConstraintSet& set, const TriMesh& mesh, Eigen::VectorXd& v);

/// Cached Schur data: solutions A3^{-1} dPhi^T, the k x k complement
/// (M/A) = -dPhi (A3^{-1} dPhi^T), and its factorization.
struct SchurCache {
    Eigen::MatrixXd W;  // 3|V| x k
    Eigen::MatrixXd MA; // k x k
    Eigen::PartialPivLU<Eigen::MatrixXd> MAlu;
    SparseMat J; // k x 3|V|
    int solveCount = 0;
    int totalIterations = 0;

    int rows() const { return static_cast<int>(MA.rows()); }
};

/// k metric solves, one per Schur row.
SchurCache schurBuild(const MetricSolver& solver, const ConstraintSet& set, const TriMesh& mesh);

/// Projected direction x = y + W (M/A)^{-1} J y with y = A3^{-1} g; one new
/// solve, tangent to every constraint.
Eigen::VectorXd projectDirection(const SchurCache& cache, const MetricSolver& solver,
                                 const ConstraintSet& set, const TriMesh& mesh,
                                 const Eigen::VectorXd& g, SolveReport* report = nullptr);

/// Newton correction h = W (M/A)^{-1} residual with J h = -residual; no new
/// solves.
Eigen::VectorXd correctiveStep(const SchurCache& cache, const Eigen::VectorXd& schurResiduals);

/// Residuals of the Schur-handled constraints only, in cache row order.
Eigen::VectorXd schurResiduals(const ConstraintSet& set, const TriMesh& mesh);

} // namespace repulsor
