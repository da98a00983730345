#pragma once

#include "repulsor/trimesh.hpp"

namespace repulsor {

struct BvhParams {
    int leafSize = 8;

    void validate() const;
};

/// Binary cluster over a contiguous range of the face permutation.
struct BvhNode {
    int begin = 0, end = 0; // range into Bvh::faceIds
    int left = -1, right = -1;
    double area = 0;        // total member area
    Vec3 centroid = Vec3::Zero();  // area-weighted barycenter
    Mat3 projector = Mat3::Zero(); // area-weighted average of face projectors
    double radius = 0;      // max member-barycenter distance from centroid
    Vec3 boxMin = Vec3::Zero(), boxMax = Vec3::Zero();

    bool isLeaf() const { return left < 0; }
    int count() const { return end - begin; }
};

/// Face-partitioning hierarchy with per-cluster aggregates. Holds a snapshot
/// of per-face geometry so queries do not touch the mesh.
struct Bvh {
    std::vector<int> faceIds; // permutation of 0..|F|-1
    std::vector<BvhNode> nodes; // node 0 is the root
    std::vector<int> leafOfFace; // leaf node index per face

    // Per-item snapshot (indexed by FaceId / point id, not permutation
    // position). For point clouds the boxes collapse to the points and the
    // radii are zero.
    std::vector<Vec3> faceCenter;
    std::vector<double> faceArea;
    std::vector<Mat3> faceProjector;
    std::vector<double> faceRadius; // max vertex distance from the barycenter
    std::vector<Vec3> itemBoxMin, itemBoxMax;

    int numFaces() const { return static_cast<int>(faceIds.size()); }
};

Bvh buildBvh(const TriMesh& mesh, const std::vector<FaceGeometry>& geom,
             const BvhParams& params = {});

/// BVH over a weighted point cloud (items are points with quadrature
/// weights; boxes and radii degenerate accordingly). Shares the cluster and
/// kernel-product machinery with the face tree.
Bvh buildPointBvh(const std::vector<Vec3>& points, const Eigen::VectorXd& weights,
                  const BvhParams& params = {});

/// Recomputes the face snapshot and all aggregates for moved vertex
/// positions, keeping the tree topology. Returns the largest ratio of new to
/// old cluster radius (callers rebuild when it grows too much).
double refitBvh(Bvh& bvh, const TriMesh& mesh, const std::vector<FaceGeometry>& geom);

struct FrontEntry {
    int node = -1;
    bool exact = false; // leaf reached without separation: enumerate members
};

/// Barnes-Hut front for face S: admissible clusters plus `exact` leaves.
/// A cluster is admissible when theta > 0 and
///   max(r(S), r(I)) <= theta * max(0, dist(barycenter(S), box(I)) - r(S)).
/// For theta = 0 every entry is exact and downstream sums are all-pairs.
void bhFront(const Bvh& bvh, FaceId S, double theta, std::vector<FrontEntry>& out);

/// Same admissibility with r(S) = 0: front for an off-surface query point.
void bhPointFront(const Bvh& bvh, const Vec3& point, double theta, std::vector<FrontEntry>& out);

double distPointBox(const Vec3& p, const Vec3& boxMin, const Vec3& boxMax);
double distBoxBox(const Vec3& minA, const Vec3& maxA, const Vec3& minB, const Vec3& maxB);

} // namespace repulsor
