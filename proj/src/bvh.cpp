#include "repulsor/bvh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace repulsor {

void BvhParams::validate() const
{
    if (leafSize < 1) throw std::invalid_argument("leaf size must be >= 1");
}

namespace {

void snapshotFaces(Bvh& bvh, const TriMesh& mesh, const std::vector<FaceGeometry>& geom)
{
    const int nF = mesh.numFaces();
    bvh.faceCenter.resize(nF);
    bvh.faceArea.resize(nF);
    bvh.faceProjector.resize(nF);
    bvh.faceRadius.resize(nF);
    bvh.itemBoxMin.resize(nF);
    bvh.itemBoxMax.resize(nF);
    for (int f = 0; f < nF; ++f) {
        bvh.faceCenter[f] = geom[f].barycenter;
        bvh.faceArea[f] = geom[f].area;
        bvh.faceProjector[f] = geom[f].projector;
        double r = 0;
        Vec3 lo = Vec3::Constant(std::numeric_limits<double>::max());
        Vec3 hi = Vec3::Constant(std::numeric_limits<double>::lowest());
        for (int t = 0; t < 3; ++t) {
            const Vec3& p = mesh.positions[mesh.faces[f][t]];
            r = std::max(r, (p - geom[f].barycenter).norm());
            lo = lo.cwiseMin(p);
            hi = hi.cwiseMax(p);
        }
        bvh.faceRadius[f] = r;
        bvh.itemBoxMin[f] = lo;
        bvh.itemBoxMax[f] = hi;
    }
}

void computeAggregates(Bvh& bvh, int nodeIdx)
{
    BvhNode& node = bvh.nodes[nodeIdx];
    if (!node.isLeaf()) {
        computeAggregates(bvh, node.left);
        computeAggregates(bvh, node.right);
    }

    node.area = 0;
    node.centroid.setZero();
    node.projector.setZero();
    node.boxMin = Vec3::Constant(std::numeric_limits<double>::max());
    node.boxMax = Vec3::Constant(std::numeric_limits<double>::lowest());

    for (int pos = node.begin; pos < node.end; ++pos) {
        int f = bvh.faceIds[pos];
        double a = bvh.faceArea[f];
        node.area += a;
        node.centroid += a * bvh.faceCenter[f];
        node.projector += a * bvh.faceProjector[f];
        node.boxMin = node.boxMin.cwiseMin(bvh.itemBoxMin[f]);
        node.boxMax = node.boxMax.cwiseMax(bvh.itemBoxMax[f]);
    }
    node.centroid /= node.area;
    node.projector /= node.area;
    node.radius = 0;
    for (int pos = node.begin; pos < node.end; ++pos) {
        int f = bvh.faceIds[pos];
        node.radius = std::max(node.radius, (bvh.faceCenter[f] - node.centroid).norm());
    }
}

int buildRecursive(Bvh& bvh, int begin, int end, int leafSize)
{
    int idx = static_cast<int>(bvh.nodes.size());
    bvh.nodes.push_back({});
    bvh.nodes[idx].begin = begin;
    bvh.nodes[idx].end = end;
    if (end - begin <= leafSize) return idx;

    // Longest axis of the barycenter bounding box, median split.
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::max());
    Vec3 hi = Vec3::Constant(std::numeric_limits<double>::lowest());
    for (int pos = begin; pos < end; ++pos) {
        const Vec3& c = bvh.faceCenter[bvh.faceIds[pos]];
        lo = lo.cwiseMin(c);
        hi = hi.cwiseMax(c);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);

    int mid = (begin + end) / 2;
    std::nth_element(bvh.faceIds.begin() + begin, bvh.faceIds.begin() + mid,
                     bvh.faceIds.begin() + end, [&](int a, int b) {
                         double ca = bvh.faceCenter[a][axis], cb = bvh.faceCenter[b][axis];
                         if (ca != cb) return ca < cb;
                         return a < b; // deterministic tie break
                     });

    int left = buildRecursive(bvh, begin, mid, leafSize);
    int right = buildRecursive(bvh, mid, end, leafSize);
    bvh.nodes[idx].left = left;
    bvh.nodes[idx].right = right;
    return idx;
}

} // namespace

namespace {

void finalizeBvh(Bvh& bvh, int count, int leafSize)
{
    buildRecursive(bvh, 0, count, leafSize);
    computeAggregates(bvh, 0);
    bvh.leafOfFace.assign(count, -1);
    for (int n = 0; n < static_cast<int>(bvh.nodes.size()); ++n) {
        if (!bvh.nodes[n].isLeaf()) continue;
        for (int pos = bvh.nodes[n].begin; pos < bvh.nodes[n].end; ++pos) {
            bvh.leafOfFace[bvh.faceIds[pos]] = n;
        }
    }
}

} // namespace

Bvh buildBvh(const TriMesh& mesh, const std::vector<FaceGeometry>& geom, const BvhParams& params)
{
    params.validate();
    if (mesh.numFaces() == 0) throw std::invalid_argument("cannot build a BVH over an empty mesh");

    Bvh bvh;
    bvh.faceIds.resize(mesh.numFaces());
    for (int f = 0; f < mesh.numFaces(); ++f) bvh.faceIds[f] = f;
    snapshotFaces(bvh, mesh, geom);
    finalizeBvh(bvh, mesh.numFaces(), params.leafSize);
    return bvh;
}

Bvh buildPointBvh(const std::vector<Vec3>& points, const Eigen::VectorXd& weights,
                  const BvhParams& params)
{
    params.validate();
    const int n = static_cast<int>(points.size());
    if (n == 0) throw std::invalid_argument("cannot build a BVH over an empty point set");
    if (weights.size() != n) throw std::invalid_argument("point/weight count mismatch");

    Bvh bvh;
    bvh.faceIds.resize(n);
    bvh.faceCenter.resize(n);
    bvh.faceArea.resize(n);
    bvh.faceProjector.assign(n, Mat3::Zero());
    bvh.faceRadius.assign(n, 0.0);
    bvh.itemBoxMin.resize(n);
    bvh.itemBoxMax.resize(n);
    for (int i = 0; i < n; ++i) {
        bvh.faceIds[i] = i;
        bvh.faceCenter[i] = points[i];
        bvh.faceArea[i] = weights[i];
        bvh.itemBoxMin[i] = points[i];
        bvh.itemBoxMax[i] = points[i];
    }
    finalizeBvh(bvh, n, params.leafSize);
    return bvh;
}

double refitBvh(Bvh& bvh, const TriMesh& mesh, const std::vector<FaceGeometry>& geom)
{
    if (mesh.numFaces() != bvh.numFaces()) {
        throw std::invalid_argument("refit requires an unchanged face set");
    }
    std::vector<double> oldRadius(bvh.nodes.size());
    for (size_t n = 0; n < bvh.nodes.size(); ++n) oldRadius[n] = bvh.nodes[n].radius;

    snapshotFaces(bvh, mesh, geom);
    computeAggregates(bvh, 0);

    double growth = 1.0;
    for (size_t n = 0; n < bvh.nodes.size(); ++n) {
        if (oldRadius[n] > 0) {
            growth = std::max(growth, bvh.nodes[n].radius / oldRadius[n]);
        }
    }
    return growth;
}

double distPointBox(const Vec3& p, const Vec3& boxMin, const Vec3& boxMax)
{
    Vec3 d = (boxMin - p).cwiseMax(p - boxMax).cwiseMax(0.0);
    return d.norm();
}

double distBoxBox(const Vec3& minA, const Vec3& maxA, const Vec3& minB, const Vec3& maxB)
{
    Vec3 d = (minB - maxA).cwiseMax(minA - maxB).cwiseMax(0.0);
    return d.norm();
}

namespace {

void frontRecursive(const Bvh& bvh, const Vec3& center, double rQuery, double theta, int nodeIdx,
                    std::vector<FrontEntry>& out)
{
    const BvhNode& node = bvh.nodes[nodeIdx];
    double dist = std::max(0.0, distPointBox(center, node.boxMin, node.boxMax) - rQuery);
    bool admissible = theta > 0 && dist > 0 && std::max(rQuery, node.radius) <= theta * dist;
    if (admissible) {
        out.push_back({nodeIdx, false});
        return;
    }
    if (node.isLeaf()) {
        out.push_back({nodeIdx, true});
        return;
    }
    frontRecursive(bvh, center, rQuery, theta, node.left, out);
    frontRecursive(bvh, center, rQuery, theta, node.right, out);
}

} // namespace

void bhFront(const Bvh& bvh, FaceId S, double theta, std::vector<FrontEntry>& out)
{
    if (theta < 0) throw std::invalid_argument("theta must be >= 0");
    out.clear();
    frontRecursive(bvh, bvh.faceCenter[S], bvh.faceRadius[S], theta, 0, out);
}

void bhPointFront(const Bvh& bvh, const Vec3& point, double theta, std::vector<FrontEntry>& out)
{
    if (theta < 0) throw std::invalid_argument("theta must be >= 0");
    out.clear();
    frontRecursive(bvh, point, 0.0, theta, 0, out);
}

} // namespace repulsor
