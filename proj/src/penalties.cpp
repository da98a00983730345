#include "repulsor/penalties.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>

namespace repulsor {

namespace {

class SphereField : public ImplicitField {
public:
    SphereField(const Vec3& c, double r) : center_(c), radius_(r) {}
    double value(const Vec3& x) const override { return (x - center_).norm() - radius_; }
    Vec3 gradient(const Vec3& x) const override { return (x - center_).normalized(); }

private:
    Vec3 center_;
    double radius_;
};

class CylinderField : public ImplicitField {
public:
    CylinderField(const Vec3& p, const Vec3& axis, double r)
        : point_(p), axis_(axis.normalized()), radius_(r)
    {
    }
    double value(const Vec3& x) const override { return radial(x).norm() - radius_; }
    Vec3 gradient(const Vec3& x) const override { return radial(x).normalized(); }

private:
    Vec3 radial(const Vec3& x) const
    {
        Vec3 d = x - point_;
        return d - axis_ * axis_.dot(d);
    }
    Vec3 point_, axis_;
    double radius_;
};

class PlaneField : public ImplicitField {
public:
    PlaneField(const Vec3& p, const Vec3& n) : point_(p), normal_(n.normalized()) {}
    double value(const Vec3& x) const override { return normal_.dot(x - point_); }
    Vec3 gradient(const Vec3&) const override { return normal_; }

private:
    Vec3 point_, normal_;
};

class SlabField : public ImplicitField {
public:
    SlabField(const Vec3& p, const Vec3& n, double halfWidth)
        : point_(p), normal_(n.normalized()), halfWidth_(halfWidth)
    {
    }
    double value(const Vec3& x) const override
    {
        return halfWidth_ - std::abs(normal_.dot(x - point_));
    }
    Vec3 gradient(const Vec3& x) const override
    {
        double d = normal_.dot(x - point_);
        return d >= 0 ? Vec3(-normal_) : Vec3(normal_);
    }

private:
    Vec3 point_, normal_;
    double halfWidth_;
};

class GridField : public ImplicitField {
public:
    GridField(std::array<long, 3> dims, Vec3 origin, Vec3 spacing, std::vector<double> samples)
        : dims_(dims), origin_(origin), spacing_(spacing), samples_(std::move(samples))
    {
    }

    double value(const Vec3& x) const override
    {
        auto [cell, frac] = locate(x);
        double v = 0;
        for (int corner = 0; corner < 8; ++corner) {
            double w = 1;
            long idx[3];
            for (int c = 0; c < 3; ++c) {
                int bit = (corner >> c) & 1;
                w *= bit ? frac[c] : 1.0 - frac[c];
                idx[c] = cell[c] + bit;
            }
            v += w * at(idx[0], idx[1], idx[2]);
        }
        return v;
    }

    Vec3 gradient(const Vec3& x) const override
    {
        auto [cell, frac] = locate(x);
        Vec3 g = Vec3::Zero();
        for (int corner = 0; corner < 8; ++corner) {
            long idx[3];
            double w[3];
            for (int c = 0; c < 3; ++c) {
                int bit = (corner >> c) & 1;
                w[c] = bit ? frac[c] : 1.0 - frac[c];
                idx[c] = cell[c] + bit;
            }
            double s = at(idx[0], idx[1], idx[2]);
            for (int c = 0; c < 3; ++c) {
                int bit = (corner >> c) & 1;
                double dw = (bit ? 1.0 : -1.0) / spacing_[c];
                g[c] += s * dw * w[(c + 1) % 3] * w[(c + 2) % 3];
            }
        }
        return g;
    }

private:
    double at(long i, long j, long k) const
    {
        return samples_[i + dims_[0] * (j + dims_[1] * k)];
    }

    std::pair<std::array<long, 3>, Vec3> locate(const Vec3& x) const
    {
        std::array<long, 3> cell;
        Vec3 frac;
        for (int c = 0; c < 3; ++c) {
            double t = (x[c] - origin_[c]) / spacing_[c];
            if (t < 0 || t > dims_[c] - 1) {
                throw std::runtime_error("point outside the sampled field domain");
            }
            double fl = std::floor(t);
            cell[c] = std::min(static_cast<long>(fl), dims_[c] - 2);
            frac[c] = t - cell[c];
        }
        return {cell, frac};
    }

    std::array<long, 3> dims_;
    Vec3 origin_, spacing_;
    std::vector<double> samples_;
};

} // namespace

std::shared_ptr<ImplicitField> makeSphereField(const Vec3& center, double radius)
{
    return std::make_shared<SphereField>(center, radius);
}
std::shared_ptr<ImplicitField> makeCylinderField(const Vec3& point, const Vec3& axis, double radius)
{
    return std::make_shared<CylinderField>(point, axis, radius);
}
std::shared_ptr<ImplicitField> makePlaneField(const Vec3& point, const Vec3& normal)
{
    return std::make_shared<PlaneField>(point, normal);
}
std::shared_ptr<ImplicitField> makeSlabField(const Vec3& point, const Vec3& normal,
                                             double halfWidth)
{
    return std::make_shared<SlabField>(point, normal, halfWidth);
}

void saveGridField(const std::string& path, const std::array<long, 3>& dims, const Vec3& origin,
                   const Vec3& spacing, const std::vector<double>& samples)
{
    if (static_cast<long>(samples.size()) != dims[0] * dims[1] * dims[2]) {
        throw std::invalid_argument("sample count does not match dims");
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    int64_t d[3] = {dims[0], dims[1], dims[2]};
    out.write(reinterpret_cast<const char*>(d), sizeof(d));
    out.write(reinterpret_cast<const char*>(origin.data()), 3 * sizeof(double));
    out.write(reinterpret_cast<const char*>(spacing.data()), 3 * sizeof(double));
    out.write(reinterpret_cast<const char*>(samples.data()), samples.size() * sizeof(double));
}

std::shared_ptr<ImplicitField> loadGridField(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open sampled field: " + path);
    int64_t d[3];
    in.read(reinterpret_cast<char*>(d), sizeof(d));
    Vec3 origin, spacing;
    in.read(reinterpret_cast<char*>(origin.data()), 3 * sizeof(double));
    in.read(reinterpret_cast<char*>(spacing.data()), 3 * sizeof(double));
    if (!in || d[0] < 2 || d[1] < 2 || d[2] < 2 || spacing.minCoeff() <= 0) {
        throw std::runtime_error("malformed sampled field header: " + path);
    }
    std::vector<double> samples(static_cast<size_t>(d[0]) * d[1] * d[2]);
    in.read(reinterpret_cast<char*>(samples.data()), samples.size() * sizeof(double));
    if (!in) throw std::runtime_error("truncated sampled field: " + path);
    return std::make_shared<GridField>(std::array<long, 3>{d[0], d[1], d[2]}, origin, spacing,
                                       std::move(samples));
}

double PenaltySet::willmoreWeight() const
{
    double w = 0;
    for (const auto& p : items) {
        if (p.kind == Penalty::Kind::Willmore) w += p.weight;
    }
    return w;
}

void PenaltySet::validate(double energyExponent) const
{
    for (const auto& p : items) {
        if (p.weight < 0) throw std::invalid_argument("penalty weights must be >= 0");
        bool obstacleKind = p.kind == Penalty::Kind::MeshObstacle ||
                            p.kind == Penalty::Kind::ImplicitObstacle ||
                            p.kind == Penalty::Kind::ImplicitAttractor;
        if (obstacleKind && p.exponent != energyExponent) {
            throw std::invalid_argument("obstacle exponent must match the energy exponent");
        }
    }
}

const char* penaltyKindName(Penalty::Kind kind)
{
    switch (kind) {
    case Penalty::Kind::AreaDeviation: return "area_deviation";
    case Penalty::Kind::VolumeDeviation: return "volume_deviation";
    case Penalty::Kind::MeshObstacle: return "mesh_obstacle";
    case Penalty::Kind::ImplicitObstacle: return "implicit_obstacle";
    case Penalty::Kind::ImplicitAttractor: return "implicit_attractor";
    case Penalty::Kind::BoundaryLength: return "boundary_length";
    case Penalty::Kind::BoundaryCurvature: return "boundary_curvature";
    case Penalty::Kind::Willmore: return "willmore";
    }
    return "?";
}

namespace {

double scalarDeviation(const Penalty& penalty, const TriMesh& mesh, Eigen::VectorXd* grad)
{
    if (penalty.target == 0) throw std::invalid_argument("deviation penalty needs a target != 0");
    double area, vol;
    totals(mesh, area, vol);
    bool isArea = penalty.kind == Penalty::Kind::AreaDeviation;
    double current = isArea ? area : vol;
    double ratio = current / penalty.target - 1.0;
    double value = ratio * ratio;
    if (grad) {
        double coeff = penalty.weight * 2.0 * ratio / penalty.target;
        if (isArea) {
            for (int f = 0; f < mesh.numFaces(); ++f) {
                auto g = faceAreaGradient(mesh, f);
                for (int t = 0; t < 3; ++t) {
                    grad->segment<3>(3 * mesh.faces[f][t]) += coeff * g[t];
                }
            }
        } else {
            for (int f = 0; f < mesh.numFaces(); ++f) {
                const auto& tri = mesh.faces[f];
                const Vec3& a = mesh.positions[tri[0]];
                const Vec3& b = mesh.positions[tri[1]];
                const Vec3& c = mesh.positions[tri[2]];
                grad->segment<3>(3 * tri[0]) += coeff * b.cross(c) / 6.0;
                grad->segment<3>(3 * tri[1]) += coeff * c.cross(a) / 6.0;
                grad->segment<3>(3 * tri[2]) += coeff * a.cross(b) / 6.0;
            }
        }
    }
    return value;
}

// Integrates a pointwise potential over the surface with vertex dual areas:
// E = sum_v dual(v) pot(x_v). The gradient carries both the potential's
// spatial derivative and the dual-area shape derivative.
template <typename PotFn, typename GradFn>
double integratePointPotential(const TriMesh& mesh, Eigen::VectorXd* grad, double weight,
                               PotFn&& pot, GradFn&& potGrad)
{
    const int nV = mesh.numVertices();
    Eigen::VectorXd dual = vertexDualAreas(mesh);
    std::vector<double> potAt(nV);
    double value = 0;
    for (int v = 0; v < nV; ++v) {
        potAt[v] = pot(mesh.positions[v], v);
        value += dual[v] * potAt[v];
    }
    if (grad) {
        for (int v = 0; v < nV; ++v) {
            grad->segment<3>(3 * v) += weight * dual[v] * potGrad(mesh.positions[v]);
        }
        for (int f = 0; f < mesh.numFaces(); ++f) {
            auto areaGrads = faceAreaGradient(mesh, f);
            double coef = 0;
            for (int t = 0; t < 3; ++t) coef += potAt[mesh.faces[f][t]] / 3.0;
            for (int t = 0; t < 3; ++t) {
                grad->segment<3>(3 * mesh.faces[f][t]) += weight * coef * areaGrads[t];
            }
        }
    }
    return value;
}

double meshObstacle(const Penalty& penalty, const TriMesh& mesh, Eigen::VectorXd* grad)
{
    if (!penalty.obstacle || !penalty.obstacleBvh) {
        throw std::invalid_argument("mesh obstacle penalty needs an obstacle mesh and BVH");
    }
    const Bvh& bvh = *penalty.obstacleBvh;
    double p = penalty.exponent;
    std::vector<FrontEntry> front;

    auto potential = [&](const Vec3& x, int) {
        bhPointFront(bvh, x, penalty.obstacleTheta, front);
        double pot = 0;
        for (const FrontEntry& e : front) {
            const BvhNode& node = bvh.nodes[e.node];
            if (!e.exact) {
                pot += std::pow((node.centroid - x).norm(), -p) * node.area;
            } else {
                for (int pos = node.begin; pos < node.end; ++pos) {
                    int T = bvh.faceIds[pos];
                    pot += std::pow((bvh.faceCenter[T] - x).norm(), -p) * bvh.faceArea[T];
                }
            }
        }
        return pot;
    };
    auto potentialGrad = [&](const Vec3& x) {
        bhPointFront(bvh, x, penalty.obstacleTheta, front);
        Vec3 g = Vec3::Zero();
        auto addTerm = [&](const Vec3& c, double a) {
            double r = (c - x).norm();
            g += p * std::pow(r, -p - 2.0) * (c - x) * a;
        };
        for (const FrontEntry& e : front) {
            const BvhNode& node = bvh.nodes[e.node];
            if (!e.exact) {
                addTerm(node.centroid, node.area);
            } else {
                for (int pos = node.begin; pos < node.end; ++pos) {
                    int T = bvh.faceIds[pos];
                    addTerm(bvh.faceCenter[T], bvh.faceArea[T]);
                }
            }
        }
        return g;
    };
    return integratePointPotential(mesh, grad, penalty.weight, potential, potentialGrad);
}

double implicitPotential(const Penalty& penalty, const TriMesh& mesh, Eigen::VectorXd* grad)
{
    if (!penalty.field) throw std::invalid_argument("implicit penalty needs a field");
    double p = penalty.exponent;
    bool attractor = penalty.kind == Penalty::Kind::ImplicitAttractor;

    auto potential = [&](const Vec3& x, int v) {
        double d = penalty.field->value(x);
        if (!attractor && d <= 0) {
            throw std::runtime_error("vertex " + std::to_string(v) +
                                     " lies on or inside the obstacle level set");
        }
        return attractor ? std::pow(std::abs(d), p) : std::pow(d, -p);
    };
    auto potentialGrad = [&](const Vec3& x) -> Vec3 {
        double d = penalty.field->value(x);
        Vec3 dg = penalty.field->gradient(x);
        if (attractor) {
            double mag = std::pow(std::abs(d), p - 1.0);
            return p * mag * (d >= 0 ? 1.0 : -1.0) * dg;
        }
        return -p * std::pow(d, -p - 1.0) * dg;
    };
    return integratePointPotential(mesh, grad, penalty.weight, potential, potentialGrad);
}

struct BoundaryLoops {
    // next[v] / prev[v] along directed boundary edges; -1 for interior.
    std::vector<int> next, prev;
    std::vector<std::pair<int, int>> edges; // directed boundary edges
};

BoundaryLoops boundaryLoops(const TriMesh& mesh)
{
    std::map<std::pair<int, int>, bool> directed;
    for (const auto& tri : mesh.faces) {
        for (int t = 0; t < 3; ++t) {
            directed[{tri[t], tri[(t + 1) % 3]}] = true;
        }
    }
    BoundaryLoops loops;
    loops.next.assign(mesh.numVertices(), -1);
    loops.prev.assign(mesh.numVertices(), -1);
    for (const auto& [edge, present] : directed) {
        (void)present;
        if (directed.count({edge.second, edge.first})) continue; // interior
        loops.edges.push_back(edge);
        loops.next[edge.first] = edge.second;
        loops.prev[edge.second] = edge.first;
    }
    if (loops.edges.empty()) {
        throw std::runtime_error("boundary penalty on a closed mesh");
    }
    return loops;
}

double boundaryLength(const Penalty& penalty, const TriMesh& mesh, Eigen::VectorXd* grad)
{
    BoundaryLoops loops = boundaryLoops(mesh);
    double total = 0;
    for (const auto& [a, b] : loops.edges) {
        total += (mesh.positions[a] - mesh.positions[b]).norm();
    }
    double diff = penalty.target - total;
    if (grad) {
        double coeff = -2.0 * diff * penalty.weight;
        for (const auto& [a, b] : loops.edges) {
            Vec3 unit = (mesh.positions[a] - mesh.positions[b]).normalized();
            grad->segment<3>(3 * a) += coeff * unit;
            grad->segment<3>(3 * b) -= coeff * unit;
        }
    }
    return diff * diff;
}

double boundaryCurvature(const Penalty& penalty, const TriMesh& mesh, Eigen::VectorXd* grad)
{
    BoundaryLoops loops = boundaryLoops(mesh);
    double value = 0;
    for (int v = 0; v < mesh.numVertices(); ++v) {
        if (loops.next[v] < 0 || loops.prev[v] < 0) continue;
        int u = loops.prev[v], w = loops.next[v];
        Vec3 a = mesh.positions[v] - mesh.positions[u];
        Vec3 b = mesh.positions[w] - mesh.positions[v];
        double an = a.norm(), bn = b.norm();
        Vec3 c = a.cross(b);
        double sNorm = c.norm(), d = a.dot(b);
        double theta = std::atan2(sNorm, d);
        double ell = 0.5 * (an + bn);
        value += theta * theta / ell;

        if (grad) {
            double denom = an * an * bn * bn;
            Vec3 dThetaA = Vec3::Zero(), dThetaB = Vec3::Zero();
            if (sNorm > 1e-12 * an * bn) {
                dThetaA = (d * b.cross(c) / sNorm - sNorm * b) / denom;
                dThetaB = (d * c.cross(a) / sNorm - sNorm * a) / denom;
            }
            Vec3 ahat = a / an, bhat = b / bn;
            double w1 = penalty.weight * 2.0 * theta / ell;
            double w2 = -penalty.weight * theta * theta / (ell * ell) * 0.5;
            grad->segment<3>(3 * u) += w1 * (-dThetaA) + w2 * (-ahat);
            grad->segment<3>(3 * v) += w1 * (dThetaA - dThetaB) + w2 * (ahat - bhat);
            grad->segment<3>(3 * w) += w1 * dThetaB + w2 * bhat;
        }
    }
    return value;
}

SparseMat interiorMask(const TriMesh& mesh)
{
    auto boundary = boundaryVertexMask(mesh);
    std::vector<Triplet> trips;
    for (int v = 0; v < mesh.numVertices(); ++v) {
        if (!boundary[v]) trips.emplace_back(v, v, 1.0);
    }
    SparseMat P(mesh.numVertices(), mesh.numVertices());
    P.setFromTriplets(trips.begin(), trips.end());
    return P;
}

double willmore(const Penalty& penalty, const TriMesh& mesh, Eigen::VectorXd* grad)
{
    SparseMat W = willmoreMetricTerm(mesh);
    const int nV = mesh.numVertices();
    Eigen::MatrixXd F(nV, 3);
    for (int v = 0; v < nV; ++v) F.row(v) = mesh.positions[v].transpose();
    Eigen::MatrixXd WF = W * F;
    double value = (F.array() * WF.array()).sum();
    if (grad) {
        for (int v = 0; v < nV; ++v) {
            grad->segment<3>(3 * v) += penalty.weight * 2.0 * WF.row(v).transpose();
        }
    }
    return value;
}

} // namespace

SparseMat willmoreMetricTerm(const TriMesh& mesh)
{
    SparseMat stiffness, mass;
    buildLaplacian(mesh, stiffness, mass);
    Eigen::VectorXd invMass = mass.diagonal().cwiseInverse();
    SparseMat P = interiorMask(mesh);
    return stiffness * P * invMass.asDiagonal() * P * stiffness;
}

double penaltyValue(const Penalty& penalty, const TriMesh& mesh, Eigen::VectorXd* grad)
{
    switch (penalty.kind) {
    case Penalty::Kind::AreaDeviation:
    case Penalty::Kind::VolumeDeviation: return scalarDeviation(penalty, mesh, grad);
    case Penalty::Kind::MeshObstacle: return meshObstacle(penalty, mesh, grad);
    case Penalty::Kind::ImplicitObstacle:
    case Penalty::Kind::ImplicitAttractor: return implicitPotential(penalty, mesh, grad);
    case Penalty::Kind::BoundaryLength: return boundaryLength(penalty, mesh, grad);
    case Penalty::Kind::BoundaryCurvature: return boundaryCurvature(penalty, mesh, grad);
    case Penalty::Kind::Willmore: return willmore(penalty, mesh, grad);
    }
    throw std::logic_error("unhandled penalty kind");
}

PenaltyEvaluation evaluatePenalties(const PenaltySet& set, const TriMesh& mesh,
                                    Eigen::VectorXd* grad)
{
    PenaltyEvaluation out;
    out.values.reserve(set.items.size());
    for (const auto& p : set.items) {
        double v = penaltyValue(p, mesh, grad);
        out.values.push_back(v);
        out.weightedTotal += p.weight * v;
    }
    return out;
}

} // namespace repulsor
