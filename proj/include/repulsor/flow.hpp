#pragma once

#include <functional>
#include <optional>

#include "repulsor/barnes_hut.hpp"
#include "repulsor/constraints.hpp"
#include "repulsor/penalties.hpp"
#include "repulsor/remesh.hpp"

namespace repulsor {

struct FlowOptions {
    EnergyParams energy;
    BhParams bh;
    double chi = 0.5;
    BvhParams bvhParams;
    MetricKind metric = MetricKind::Hs;
    GmresOptions solve;
    bool freeBarycenter = false;
    bool disableLowOrder = false;
    bool deterministic = false;
    bool remeshEnabled = true;
    RemeshParams remesh; // targetEdgeLength = 0 adopts the initial mean edge length
    double directionStopTol = 1e-6; // times the bbox diagonal
    double constraintTol = 1e-8;    // normalized residual target after correction
    int maxCorrectiveSteps = 5;
};

struct StepRecord {
    int step = 0;
    double objective = 0; // BH energy + weighted penalties after the full step
    double bhEnergy = 0;
    std::vector<double> penaltyValues;
    Eigen::VectorXd residuals; // normalized constraint residuals after the step
    double tau = 0;
    int solverIterations = 0;
    double seconds = 0;
    double directionNorm = 0; // metric norm of the projected direction
    RemeshStats remeshStats;
    bool converged = false;
    bool remeshSkipped = false; // monotonicity guard rejected the remeshed state
};

/// Backtracking line search: largest tau = tau0 / 2^j (j <= 40) with
/// objective(tau) <= f0 + c1 tau slope. `slope` is the directional
/// derivative <dE, x> and must be negative.
double armijoSearch(const std::function<double(double)>& objectiveAt, double f0, double slope,
                    double tau0, double c1 = 1e-4, int maxHalvings = 40);

/// One constrained Sobolev descent step per call: Barnes-Hut differential,
/// hierarchical metric solve with Schur-projected constraints, Armijo step,
/// corrective projection, remeshing pass.
class FlowState {
public:
    FlowState(TriMesh mesh, ConstraintSet constraints, PenaltySet penalties, FlowOptions opts);

    StepRecord step();

    const TriMesh& mesh() const { return mesh_; }
    const ConstraintSet& constraints() const { return constraints_; }
    const PenaltySet& penalties() const { return penalties_; }
    const FlowOptions& options() const { return opts_; }
    const std::vector<StepRecord>& history() const { return history_; }
    bool converged() const { return converged_; }
    double targetEdgeLength() const { return opts_.remesh.targetEdgeLength; }

    /// BH energy plus weighted penalties at the current positions.
    double objective() const;

private:
    TriMesh mesh_;
    ConstraintSet constraints_;
    PenaltySet penalties_;
    FlowOptions opts_;
    int stepIndex_ = 0;
    std::vector<StepRecord> history_;
    bool converged_ = false;
    std::optional<Bvh> bvh_; // reused across pure position updates
    double bvhGrowthLimit_ = 1.5;

    double evaluateObjective(const TriMesh& mesh, std::vector<double>* penaltyValues = nullptr,
                             double* bhOnly = nullptr) const;
    const Bvh& currentBvh(const std::vector<FaceGeometry>& geom);
    ConstraintSet effectivePositionalSet() const; // explicit + synthetic barycenters
    /// Newton corrective rounds plus exact positional snaps; rebuilds the
    /// Schur machinery when called without a cache (post-remesh).
    void applyCorrectiveProjection(const SchurCache* cache);
};

} // namespace repulsor
