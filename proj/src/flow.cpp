#include "repulsor/flow.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace repulsor {

double armijoSearch(const std::function<double(double)>& objectiveAt, double f0, double slope,
                    double tau0, double c1, int maxHalvings)
{
    if (!(slope < 0)) {
        throw std::runtime_error("line search requires a descent direction (slope " +
                                 std::to_string(slope) + ")");
    }
    double tau = tau0;
    for (int j = 0; j <= maxHalvings; ++j) {
        double value = objectiveAt(tau);
        if (std::isfinite(value) && value <= f0 + c1 * tau * slope) {
            return tau;
        }
        tau *= 0.5;
    }
    throw std::runtime_error("line search exhausted " + std::to_string(maxHalvings) +
                             " halvings without sufficient decrease");
}

FlowState::FlowState(TriMesh mesh, ConstraintSet constraints, PenaltySet penalties,
                     FlowOptions opts)
    : mesh_(std::move(mesh)), constraints_(std::move(constraints)),
      penalties_(std::move(penalties)), opts_(std::move(opts))
{
    opts_.energy.validate();
    opts_.bh.validate();
    penalties_.validate(opts_.energy.p);
    validateMesh(mesh_);
    if (mesh_.componentOf.empty()) labelComponents(mesh_);
    if (opts_.remesh.targetEdgeLength <= 0) {
        opts_.remesh.targetEdgeLength = meanEdgeLength(mesh_);
    }
}

ConstraintSet FlowState::effectivePositionalSet() const
{
    ConstraintSet effective = constraints_;
    if (opts_.freeBarycenter) {
        for (int c = 0; c < mesh_.numComponents; ++c) {
            if (!effective.hasBarycenter(c)) {
                Constraint bary;
                bary.kind = Constraint::Kind::Barycenter;
                bary.component = c;
                effective.items.push_back(bary);
            }
        }
    }
    return effective;
}

double FlowState::evaluateObjective(const TriMesh& mesh, std::vector<double>* penaltyValues,
                                    double* bhOnly) const
{
    auto geom = allFaceGeometry(mesh);
    Bvh bvh = buildBvh(mesh, geom, opts_.bvhParams);
    double energy = bhEnergy(mesh, bvh, opts_.energy, opts_.bh, opts_.deterministic);
    if (bhOnly) *bhOnly = energy;
    double total = energy;
    if (!penalties_.empty()) {
        PenaltyEvaluation eval = evaluatePenalties(penalties_, mesh, nullptr);
        if (penaltyValues) *penaltyValues = eval.values;
        total += eval.weightedTotal;
    } else if (penaltyValues) {
        penaltyValues->clear();
    }
    return total;
}

const Bvh& FlowState::currentBvh(const std::vector<FaceGeometry>& geom)
{
    if (bvh_ && bvh_->numFaces() == mesh_.numFaces()) {
        double growth = refitBvh(*bvh_, mesh_, geom);
        if (growth <= bvhGrowthLimit_) return *bvh_;
    }
    bvh_ = buildBvh(mesh_, geom, opts_.bvhParams);
    return *bvh_;
}

void FlowState::applyCorrectiveProjection(const SchurCache* cache)
{
    const int nV = mesh_.numVertices();

    if (constraints_.schurRows() > 0) {
        // Rebuild the cache when the mesh connectivity changed underneath.
        SchurCache localCache;
        if (!cache) {
            auto geom = allFaceGeometry(mesh_);
            Bvh bvh = buildBvh(mesh_, geom, opts_.bvhParams);
            BlockClusterTree bct = buildBlockClusterTree(bvh, opts_.chi);
            FractionalStack stack(mesh_, geom, bct, opts_.energy.p, !opts_.disableLowOrder);
            SparseMat posRows = positionalRowsScalar(effectivePositionalSet(), mesh_);
            std::unique_ptr<MetricSolver> solver;
            if (opts_.metric == MetricKind::Hs) {
                solver = std::make_unique<HsSolver>(mesh_, stack, posRows, opts_.solve, true,
                                                    opts_.chi);
            } else {
                solver = std::make_unique<SparseMetricSolver>(mesh_, opts_.metric, posRows);
            }
            localCache = schurBuild(*solver, constraints_, mesh_);
            cache = &localCache;
        }
        for (int it = 0; it < opts_.maxCorrectiveSteps; ++it) {
            if (constraintResidualsNormalized(constraints_, mesh_).lpNorm<Eigen::Infinity>() <=
                opts_.constraintTol) {
                break;
            }
            Eigen::VectorXd h = correctiveStep(*cache, schurResiduals(constraints_, mesh_));
            for (int v = 0; v < nV; ++v) mesh_.positions[v] += h.segment<3>(3 * v);
        }
    }

    // Positional snap: exact pins, exact barycenter translation (both leave
    // the area and the volume of closed meshes untouched).
    Eigen::VectorXd dual = vertexDualAreas(mesh_);
    for (const auto& c : constraints_.items) {
        if (c.kind == Constraint::Kind::Pin) {
            mesh_.positions[c.vertex] = c.targetPoint;
        } else if (c.kind == Constraint::Kind::Barycenter) {
            Vec3 num = Vec3::Zero();
            double den = 0;
            for (int v = 0; v < nV; ++v) {
                if (mesh_.componentOf[v] != c.component) continue;
                num += dual[v] * mesh_.positions[v];
                den += dual[v];
            }
            Vec3 shift = c.targetPoint - num / den;
            for (int v = 0; v < nV; ++v) {
                if (mesh_.componentOf[v] == c.component) mesh_.positions[v] += shift;
            }
        }
    }
}

double FlowState::objective() const
{
    return evaluateObjective(mesh_);
}

StepRecord FlowState::step()
{
    auto t0 = std::chrono::steady_clock::now();
    StepRecord record;
    record.step = stepIndex_;

    auto geom = allFaceGeometry(mesh_);
    const Bvh& bvh = currentBvh(geom);
    const int nV = mesh_.numVertices();

    // (1) Differential of the objective.
    Eigen::VectorXd dE =
        bhDifferential(mesh_, geom, bvh, opts_.energy, opts_.bh, opts_.deterministic);
    if (!penalties_.empty()) {
        evaluatePenalties(penalties_, mesh_, &dE);
    }
    std::vector<double> baselinePenalties;
    double baselineBh = 0;
    double baseline = evaluateObjective(mesh_, &baselinePenalties, &baselineBh);
    double guardBaseline = history_.empty() ? baseline : history_.back().objective;

    // (2) Hierarchical stack and metric solver for the current mesh.
    BlockClusterTree bct = buildBlockClusterTree(bvh, opts_.chi);
    FractionalStack stack(mesh_, geom, bct, opts_.energy.p, !opts_.disableLowOrder);
    ConstraintSet positionalSet = effectivePositionalSet();
    SparseMat posRows = positionalRowsScalar(positionalSet, mesh_);

    SparseMat willmoreTerm;
    double willmoreWeight = penalties_.willmoreWeight();
    if (willmoreWeight > 0) willmoreTerm = willmoreMetricTerm(mesh_);

    std::unique_ptr<MetricSolver> solver;
    if (opts_.metric == MetricKind::Hs) {
        auto hs = std::make_unique<HsSolver>(mesh_, stack, posRows, opts_.solve, true, opts_.chi);
        if (willmoreWeight > 0) hs->setExtraTerm(willmoreTerm, willmoreWeight);
        solver = std::move(hs);
    } else {
        solver = std::make_unique<SparseMetricSolver>(mesh_, opts_.metric, posRows, willmoreTerm,
                                                      willmoreWeight);
    }

    // (3) Schur-projected direction.
    SchurCache schur = schurBuild(*solver, constraints_, mesh_);
    Eigen::VectorXd g = -dE;
    SolveReport solveReport;
    Eigen::VectorXd x =
        projectDirection(schur, *solver, positionalSet, mesh_, g, &solveReport);
    record.solverIterations = schur.totalIterations + solveReport.iterations;

    // (3b) Re-add the mean motion of each free component.
    if (opts_.freeBarycenter) {
        Eigen::VectorXd dual = vertexDualAreas(mesh_);
        for (int c = 0; c < mesh_.numComponents; ++c) {
            if (constraints_.hasBarycenter(c)) continue;
            Vec3 sum = Vec3::Zero();
            double weight = 0;
            for (int v = 0; v < nV; ++v) {
                if (mesh_.componentOf[v] != c) continue;
                sum += g.segment<3>(3 * v);
                weight += dual[v];
            }
            Vec3 translation = sum / weight;
            for (int v = 0; v < nV; ++v) {
                if (mesh_.componentOf[v] == c) x.segment<3>(3 * v) += translation;
            }
        }
    }

    double slope = dE.dot(x);
    record.directionNorm = std::sqrt(std::max(0.0, -slope));
    double stopScale = bboxDiagonal(mesh_);
    if (record.directionNorm <= opts_.directionStopTol * stopScale) {
        converged_ = true;
        record.converged = true;
        record.objective = baseline;
        record.bhEnergy = baselineBh;
        record.penaltyValues = baselinePenalties;
        record.residuals = constraintResidualsNormalized(constraints_, mesh_);
        record.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        history_.push_back(record);
        ++stepIndex_;
        return record;
    }

    // (4) Line search on the Barnes-Hut objective.
    double maxDisp = 0;
    for (int v = 0; v < nV; ++v) maxDisp = std::max(maxDisp, x.segment<3>(3 * v).norm());
    double tau0 = opts_.remesh.targetEdgeLength / maxDisp;

    auto objectiveAt = [&](double tau) {
        TriMesh trial = mesh_;
        for (int v = 0; v < nV; ++v) trial.positions[v] += tau * x.segment<3>(3 * v);
        try {
            return evaluateObjective(trial);
        } catch (const std::exception&) {
            return std::numeric_limits<double>::infinity(); // e.g. obstacle contact
        }
    };
    double tau = armijoSearch(objectiveAt, baseline, slope, tau0);

    // (5)-(6) Apply, correct, remesh; retry with a halved step if the
    // post-processed objective would break the monotone energy log.
    TriMesh savedMesh = mesh_;
    ConstraintSet savedConstraints = constraints_;
    const int retries = 3;
    for (int attempt = 0;; ++attempt) {
        mesh_ = savedMesh;
        constraints_ = savedConstraints;
        for (int v = 0; v < nV; ++v) mesh_.positions[v] += tau * x.segment<3>(3 * v);
        applyCorrectiveProjection(&schur);

        TriMesh preRemesh = mesh_;
        ConstraintSet preRemeshConstraints = constraints_;
        record.remeshStats = {};
        record.remeshSkipped = false;
        if (opts_.remeshEnabled) {
            RemeshResult rr = remeshPass(mesh_, opts_.remesh, constraints_.pinnedVertices());
            // Re-address pins through the vertex map.
            ConstraintSet remapped = constraints_;
            bool pinsOk = true;
            for (auto& c : remapped.items) {
                if (c.kind != Constraint::Kind::Pin) continue;
                int nv = rr.vertexMap[c.vertex];
                if (nv < 0) pinsOk = false;
                c.vertex = nv;
            }
            if (pinsOk) {
                mesh_ = std::move(rr.mesh);
                constraints_ = std::move(remapped);
                record.remeshStats = rr.stats;
                bvh_.reset(); // topology changed
                // Collapses and tangential smoothing drift the constraint
                // values; project back on the new connectivity.
                applyCorrectiveProjection(nullptr);
            }
        }

        double post = evaluateObjective(mesh_, &record.penaltyValues, &record.bhEnergy);
        if (post <= guardBaseline || attempt >= retries) {
            if (post > guardBaseline && opts_.remeshEnabled) {
                // Final fallback: keep the accepted positions without the
                // remeshing pass for this step.
                mesh_ = preRemesh;
                constraints_ = preRemeshConstraints;
                record.remeshStats = {};
                record.remeshSkipped = true;
                bvh_.reset();
                post = evaluateObjective(mesh_, &record.penaltyValues, &record.bhEnergy);
            }
            record.objective = post;
            break;
        }
        tau *= 0.5;
    }

    record.tau = tau;
    record.residuals = constraintResidualsNormalized(constraints_, mesh_);
    record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    history_.push_back(record);
    ++stepIndex_;
    return record;
}

} // namespace repulsor
