#pragma once

#include "repulsor/trimesh.hpp"

namespace repulsor {

struct RemeshParams {
    double targetEdgeLength = 0; // L0; flows set it to the initial mean edge length
    double smoothingFactor = 0.5;
    int smoothingIterations = 5;

    void validate() const;
};

struct RemeshStats {
    int splits = 0;
    int collapses = 0;
    int flips = 0;
    int flipSweepCapHits = 0;
};

struct RemeshResult {
    TriMesh mesh;
    /// old vertex id -> new id; collapsed vertices map to their merged
    /// representative, so pins always stay addressable.
    std::vector<int> vertexMap;
    RemeshStats stats;
};

/// One remeshing pass: split edges longer than 3 L0/2, collapse edges
/// shorter than L0/2 (midpoint target, link condition, foldover guard), then
/// N rounds of Delaunay flipping and area-weighted circumcenter smoothing
/// projected to the vertex tangent plane. Pinned vertices are never moved,
/// collapsed or smoothed; operations that would break validity are skipped.
RemeshResult remeshPass(const TriMesh& mesh, const RemeshParams& params,
                        const std::vector<int>& pinnedVertices = {});

/// Circumcenter of a 3D triangle.
Vec3 circumcenter(const Vec3& a, const Vec3& b, const Vec3& c);

/// V - E + F over live faces; preserved by every remeshing pass.
int eulerCharacteristic(const TriMesh& mesh);

} // namespace repulsor
