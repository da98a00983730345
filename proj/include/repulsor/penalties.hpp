#pragma once

#include <memory>

#include "repulsor/barnes_hut.hpp"

namespace repulsor {

/// Signed distance field supplying values and spatial gradients.
class ImplicitField {
public:
    virtual ~ImplicitField() = default;
    virtual double value(const Vec3& x) const = 0;
    virtual Vec3 gradient(const Vec3& x) const = 0;
};

std::shared_ptr<ImplicitField> makeSphereField(const Vec3& center, double radius);
std::shared_ptr<ImplicitField> makeCylinderField(const Vec3& point, const Vec3& axis,
                                                 double radius);
std::shared_ptr<ImplicitField> makePlaneField(const Vec3& point, const Vec3& normal);
/// Positive inside the slab |n . (x - p)| < halfWidth, zero on the walls.
std::shared_ptr<ImplicitField> makeSlabField(const Vec3& point, const Vec3& normal,
                                             double halfWidth);

/// Sampled field with trilinear interpolation. File layout (little-endian):
/// int64 nx ny nz, double origin[3], double spacing[3], then nx*ny*nz
/// float64 samples with x fastest.
std::shared_ptr<ImplicitField> loadGridField(const std::string& path);
void saveGridField(const std::string& path, const std::array<long, 3>& dims, const Vec3& origin,
                   const Vec3& spacing, const std::vector<double>& samples);

struct Penalty {
    enum class Kind {
        AreaDeviation,
        VolumeDeviation,
        MeshObstacle,
        ImplicitObstacle,
        ImplicitAttractor,
        BoundaryLength,
        BoundaryCurvature,
        Willmore,
    };
    Kind kind = Kind::AreaDeviation;
    double weight = 1.0;
    double target = 0;   // A0 / V0 / boundary length target
    double exponent = 6; // obstacle kinds; must match the energy exponent
    std::shared_ptr<ImplicitField> field;
    std::shared_ptr<TriMesh> obstacle;
    std::shared_ptr<Bvh> obstacleBvh; // built once; obstacles are static
    double obstacleTheta = 0.5;
};

struct PenaltySet {
    std::vector<Penalty> items;

    bool empty() const { return items.empty(); }
    double willmoreWeight() const;
    void validate(double energyExponent) const;
};

const char* penaltyKindName(Penalty::Kind kind);

/// Value of one penalty; accumulates weight * gradient into grad when given.
double penaltyValue(const Penalty& penalty, const TriMesh& mesh, Eigen::VectorXd* grad);

struct PenaltyEvaluation {
    std::vector<double> values; // unweighted, per item
    double weightedTotal = 0;
};

/// Values of all penalties plus the accumulated weighted gradient.
PenaltyEvaluation evaluatePenalties(const PenaltySet& set, const TriMesh& mesh,
                                    Eigen::VectorXd* grad);

/// The H^2 term A M^{-1} A added to the metric while a Willmore penalty is
/// active. Rows and columns of boundary vertices are masked so a flat patch
/// carries zero energy.
SparseMat willmoreMetricTerm(const TriMesh& mesh);

} // namespace repulsor
