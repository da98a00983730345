#include "repulsor/constraints.hpp"

#include <stdexcept>

namespace repulsor {

int ConstraintSet::totalRows() const
{
    int k = 0;
    for (const auto& c : items) k += c.rowCount();
    return k;
}

int ConstraintSet::schurRows() const
{
    int k = 0;
    for (const auto& c : items) {
        if (!c.positional()) k += c.rowCount();
    }
    return k;
}

bool ConstraintSet::hasBarycenter(int component) const
{
    for (const auto& c : items) {
        if (c.kind == Constraint::Kind::Barycenter && c.component == component) return true;
    }
    return false;
}

std::vector<int> ConstraintSet::pinnedVertices() const
{
    std::vector<int> pins;
    for (const auto& c : items) {
        if (c.kind == Constraint::Kind::Pin) pins.push_back(c.vertex);
    }
    return pins;
}

void ConstraintSet::captureTargets(const TriMesh& mesh)
{
    Eigen::VectorXd dual = vertexDualAreas(mesh);
    double area, vol;
    totals(mesh, area, vol);
    for (auto& c : items) {
        switch (c.kind) {
        case Constraint::Kind::Barycenter: {
            Vec3 num = Vec3::Zero();
            double den = 0;
            for (int i = 0; i < mesh.numVertices(); ++i) {
                if (mesh.componentOf[i] != c.component) continue;
                num += dual[i] * mesh.positions[i];
                den += dual[i];
            }
            if (den <= 0) throw std::invalid_argument("barycenter constraint on empty component");
            c.targetPoint = num / den;
            break;
        }
        case Constraint::Kind::Pin:
            if (c.vertex < 0 || c.vertex >= mesh.numVertices()) {
                throw std::invalid_argument("pin constraint on invalid vertex");
            }
            c.targetPoint = mesh.positions[c.vertex];
            break;
        case Constraint::Kind::TotalArea: c.targetScalar = area; break;
        case Constraint::Kind::TotalVolume: c.targetScalar = vol; break;
        }
    }
}

Eigen::VectorXd constraintValues(const ConstraintSet& set, const TriMesh& mesh)
{
    Eigen::VectorXd dual = vertexDualAreas(mesh);
    double area, vol;
    totals(mesh, area, vol);

    Eigen::VectorXd values(set.totalRows());
    int row = 0;
    for (const auto& c : set.items) {
        switch (c.kind) {
        case Constraint::Kind::Barycenter: {
            Vec3 num = Vec3::Zero();
            double den = 0;
            for (int i = 0; i < mesh.numVertices(); ++i) {
                if (mesh.componentOf[i] != c.component) continue;
                num += dual[i] * mesh.positions[i];
                den += dual[i];
            }
            values.segment<3>(row) = num / den - c.targetPoint;
            row += 3;
            break;
        }
        case Constraint::Kind::Pin:
            values.segment<3>(row) = mesh.positions[c.vertex] - c.targetPoint;
            row += 3;
            break;
        case Constraint::Kind::TotalArea: values[row++] = area - c.targetScalar; break;
        case Constraint::Kind::TotalVolume: values[row++] = vol - c.targetScalar; break;
        }
    }
    return values;
}

Eigen::VectorXd constraintResidualsNormalized(const ConstraintSet& set, const TriMesh& mesh)
{
    Eigen::VectorXd values = constraintValues(set, mesh);
    int row = 0;
    for (const auto& c : set.items) {
        if (c.positional()) {
            row += 3;
            continue;
        }
        if (c.targetScalar != 0) values[row] /= std::abs(c.targetScalar);
        ++row;
    }
    return values;
}

namespace {

void appendAreaRow(const TriMesh& mesh, int row, std::vector<Triplet>& trips)
{
    for (int f = 0; f < mesh.numFaces(); ++f) {
        auto grads = faceAreaGradient(mesh, f);
        for (int t = 0; t < 3; ++t) {
            int v = mesh.faces[f][t];
            for (int c = 0; c < 3; ++c) trips.emplace_back(row, 3 * v + c, grads[t][c]);
        }
    }
}

void appendVolumeRow(const TriMesh& mesh, int row, std::vector<Triplet>& trips)
{
    for (int f = 0; f < mesh.numFaces(); ++f) {
        const auto& tri = mesh.faces[f];
        const Vec3& a = mesh.positions[tri[0]];
        const Vec3& b = mesh.positions[tri[1]];
        const Vec3& c = mesh.positions[tri[2]];
        Vec3 ga = b.cross(c) / 6.0;
        Vec3 gb = c.cross(a) / 6.0;
        Vec3 gc = a.cross(b) / 6.0;
        for (int d = 0; d < 3; ++d) {
            trips.emplace_back(row, 3 * tri[0] + d, ga[d]);
            trips.emplace_back(row, 3 * tri[1] + d, gb[d]);
            trips.emplace_back(row, 3 * tri[2] + d, gc[d]);
        }
    }
}

} // namespace

SparseMat constraintJacobian(const ConstraintSet& set, const TriMesh& mesh)
{
    std::vector<Triplet> trips;
    int row = 0;
    for (const auto& c : set.items) {
        switch (c.kind) {
        case Constraint::Kind::Barycenter:
            for (int i = 0; i < mesh.numVertices(); ++i) {
                if (mesh.componentOf[i] != c.component) continue;
                for (int d = 0; d < 3; ++d) trips.emplace_back(row + d, 3 * i + d, 1.0);
            }
            row += 3;
            break;
        case Constraint::Kind::Pin:
            for (int d = 0; d < 3; ++d) trips.emplace_back(row + d, 3 * c.vertex + d, 1.0);
            row += 3;
            break;
        case Constraint::Kind::TotalArea: appendAreaRow(mesh, row++, trips); break;
        case Constraint::Kind::TotalVolume: appendVolumeRow(mesh, row++, trips); break;
        }
    }
    SparseMat J(row, 3 * mesh.numVertices());
    J.setFromTriplets(trips.begin(), trips.end());
    return J;
}

SparseMat positionalRowsScalar(const ConstraintSet& set, const TriMesh& mesh)
{
    std::vector<Triplet> trips;
    int row = 0;
    for (const auto& c : set.items) {
        if (c.kind == Constraint::Kind::Barycenter) {
            for (int i = 0; i < mesh.numVertices(); ++i) {
                if (mesh.componentOf[i] == c.component) trips.emplace_back(row, i, 1.0);
            }
            ++row;
        } else if (c.kind == Constraint::Kind::Pin) {
            trips.emplace_back(row, c.vertex, 1.0);
            ++row;
        }
    }
    SparseMat rows(row, mesh.numVertices());
    rows.setFromTriplets(trips.begin(), trips.end());
    return rows;
}

SparseMat schurJacobian(const ConstraintSet& set, const TriMesh& mesh)
{
    std::vector<Triplet> trips;
    int row = 0;
    for (const auto& c : set.items) {
        if (c.kind == Constraint::Kind::TotalArea) appendAreaRow(mesh, row++, trips);
        if (c.kind == Constraint::Kind::TotalVolume) appendVolumeRow(mesh, row++, trips);
    }
    SparseMat J(row, 3 * mesh.numVertices());
    J.setFromTriplets(trips.begin(), trips.end());
    return J;
}

Eigen::VectorXd schurResiduals(const ConstraintSet& set, const TriMesh& mesh)
{
    double area, vol;
    totals(mesh, area, vol);
    Eigen::VectorXd res(set.schurRows());
    int row = 0;
    for (const auto& c : set.items) {
        if (c.kind == Constraint::Kind::TotalArea) res[row++] = area - c.targetScalar;
        if (c.kind == Constraint::Kind::TotalVolume) res[row++] = vol - c.targetScalar;
    }
    return res;
}

void cleanPositional(const ConstraintSet& set, const TriMesh& mesh, Eigen::VectorXd& v)
{
    for (const auto& c : set.items) {
        if (c.kind == Constraint::Kind::Barycenter) {
            Vec3 mean = Vec3::Zero();
            int count = 0;
            for (int i = 0; i < mesh.numVertices(); ++i) {
                if (mesh.componentOf[i] != c.component) continue;
                mean += v.segment<3>(3 * i);
                ++count;
            }
            mean /= count;
            for (int i = 0; i < mesh.numVertices(); ++i) {
                if (mesh.componentOf[i] == c.component) v.segment<3>(3 * i) -= mean;
            }
        } else if (c.kind == Constraint::Kind::Pin) {
            v.segment<3>(3 * c.vertex).setZero();
        }
    }
}

SchurCache schurBuild(const MetricSolver& solver, const ConstraintSet& set, const TriMesh& mesh)
{
    SchurCache cache;
    cache.J = schurJacobian(set, mesh);
    const int k = static_cast<int>(cache.J.rows());
    cache.W.resize(solver.dimension(), k);
    for (int r = 0; r < k; ++r) {
        Eigen::VectorXd rhs = cache.J.row(r).transpose();
        SolveReport rep;
        Eigen::VectorXd col = solver.solve(rhs, &rep);
        ++cache.solveCount;
        cache.totalIterations += rep.iterations;
        cleanPositional(set, mesh, col);
        cache.W.col(r) = col;
    }
    cache.MA = -Eigen::MatrixXd(cache.J * cache.W);
    if (k > 0) cache.MAlu.compute(cache.MA);
    return cache;
}

Eigen::VectorXd projectDirection(const SchurCache& cache, const MetricSolver& solver,
                                 const ConstraintSet& set, const TriMesh& mesh,
                                 const Eigen::VectorXd& g, SolveReport* report)
{
    Eigen::VectorXd y = solver.solve(g, report);
    cleanPositional(set, mesh, y);
    if (cache.rows() == 0) return y;
    Eigen::VectorXd Jy = cache.J * y;
    return y + cache.W * cache.MAlu.solve(Jy);
}

Eigen::VectorXd correctiveStep(const SchurCache& cache, const Eigen::VectorXd& residuals)
{
    if (cache.rows() == 0) return Eigen::VectorXd();
    return cache.W * cache.MAlu.solve(residuals);
}

} // namespace repulsor
