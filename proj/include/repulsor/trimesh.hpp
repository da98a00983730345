#pragma once

#include <array>
#include <string>
#include <vector>

#include "repulsor/types.hpp"

namespace repulsor {

/// Triangle mesh: vertex positions plus oriented vertex triples.
/// Connected components are labeled over face adjacency.
struct TriMesh {
    std::vector<Vec3> positions;
    std::vector<std::array<VertexId, 3>> faces;
    std::vector<int> componentOf; // per vertex
    int numComponents = 0;

    int numVertices() const { return static_cast<int>(positions.size()); }
    int numFaces() const { return static_cast<int>(faces.size()); }
};

/// Per-face derived quantities under the current embedding.
struct FaceGeometry {
    double area = 0;
    Vec3 normal = Vec3::Zero();
    Vec3 barycenter = Vec3::Zero();
    Mat3 projector = Mat3::Zero(); // N N^T, projector onto the normal line
};

struct EdgeInfo {
    VertexId a, b;     // a < b
    FaceId f0 = -1;    // face containing directed edge a->b (or the first one seen)
    FaceId f1 = -1;    // opposite face, -1 on boundary
    bool boundary() const { return f1 < 0; }
};

FaceGeometry faceGeometry(const TriMesh& mesh, FaceId f);
std::vector<FaceGeometry> allFaceGeometry(const TriMesh& mesh);

/// Checks all TriMesh invariants (index validity, manifold edges with
/// consistent orientation, no degenerate faces). Throws on violation.
void validateMesh(const TriMesh& mesh);

/// Labels vertex components by flood fill over face adjacency.
void labelComponents(TriMesh& mesh);

/// Undirected edge list with incident faces; throws on non-manifold input.
std::vector<EdgeInfo> buildEdges(const TriMesh& mesh);

/// Cotan stiffness (PSD, zero row sums) and lumped diagonal mass.
/// Boundary edges contribute one-sided cotans.
void buildLaplacian(const TriMesh& mesh, SparseMat& stiffness, SparseMat& lumpedMass);

/// One third of incident face areas per vertex.
Eigen::VectorXd vertexDualAreas(const TriMesh& mesh);

/// Total surface area and signed volume (triple-product sum over faces).
void totals(const TriMesh& mesh, double& area, double& signedVolume);

/// Vertices on at least one boundary edge.
std::vector<bool> boundaryVertexMask(const TriMesh& mesh);

double meanEdgeLength(const TriMesh& mesh);
double maxEdgeLength(const TriMesh& mesh);
double bboxDiagonal(const TriMesh& mesh);

/// Gradient of face f's area with respect to each of its three vertices.
std::array<Vec3, 3> faceAreaGradient(const TriMesh& mesh, FaceId f);

} // namespace repulsor
