#pragma once

#include "repulsor/bvh.hpp"
#include "repulsor/tpe.hpp"

namespace repulsor {

struct BhParams {
    double theta = 0.5;

    void validate() const;
};

/// Barnes-Hut tangent-point energy: admissible clusters interact through
/// their aggregates, exact leaves are expanded pairwise. theta = 0 gives the
/// all-pairs energy.
double bhEnergy(const TriMesh& mesh, const Bvh& bvh, const EnergyParams& params,
                const BhParams& bh, bool deterministic = false);

/// Barnes-Hut approximation of the energy differential. For each face the
/// front contributes both the forward term (the face in the kernel's first
/// slot) and the reverse term (the face in the second slot), with cluster
/// aggregates held fixed. At theta = 0 this reproduces the exact
/// differential.
Eigen::VectorXd bhDifferential(const TriMesh& mesh, const std::vector<FaceGeometry>& geom,
                               const Bvh& bvh, const EnergyParams& params, const BhParams& bh,
                               bool deterministic = false);

} // namespace repulsor
