#include "repulsor/trimesh.hpp"

#include <cmath>
#include <map>
#include <queue>
#include <stdexcept>

namespace repulsor {

FaceGeometry faceGeometry(const TriMesh& mesh, FaceId f)
{
    const auto& tri = mesh.faces.at(f);
    const Vec3& a = mesh.positions[tri[0]];
    const Vec3& b = mesh.positions[tri[1]];
    const Vec3& c = mesh.positions[tri[2]];

    Vec3 cross = (b - a).cross(c - a);
    double doubleArea = cross.norm();
    FaceGeometry g;
    g.area = 0.5 * doubleArea;
    if (g.area < kDegenerateAreaTol) {
        throw std::runtime_error("degenerate face " + std::to_string(f) +
                                 " (area " + std::to_string(g.area) + ")");
    }
    g.normal = cross / doubleArea;
    g.barycenter = (a + b + c) / 3.0;
    g.projector = g.normal * g.normal.transpose();
    return g;
}

std::vector<FaceGeometry> allFaceGeometry(const TriMesh& mesh)
{
    std::vector<FaceGeometry> out(mesh.numFaces());
    for (FaceId f = 0; f < mesh.numFaces(); ++f) {
        out[f] = faceGeometry(mesh, f);
    }
    return out;
}

void validateMesh(const TriMesh& mesh)
{
    const int nV = mesh.numVertices();
    for (FaceId f = 0; f < mesh.numFaces(); ++f) {
        const auto& tri = mesh.faces[f];
        for (int t = 0; t < 3; ++t) {
            if (tri[t] < 0 || tri[t] >= nV) {
                throw std::runtime_error("face " + std::to_string(f) + " references invalid vertex " +
                                         std::to_string(tri[t]));
            }
        }
        if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2]) {
            throw std::runtime_error("face " + std::to_string(f) + " has repeated vertices");
        }
        faceGeometry(mesh, f); // throws on degenerate area
    }

    // Manifoldness: each undirected edge in at most two faces, and a shared
    // edge must appear with opposite orientation in its two faces. A directed
    // duplicate means either >2 incident faces or inconsistent orientation.
    std::map<std::pair<int, int>, int> directedCount;
    for (const auto& tri : mesh.faces) {
        for (int t = 0; t < 3; ++t) {
            int u = tri[t], v = tri[(t + 1) % 3];
            auto key = std::make_pair(u, v);
            if (++directedCount[key] > 1) {
                throw std::runtime_error("directed edge (" + std::to_string(u) + "," + std::to_string(v) +
                                         ") appears twice; inconsistent orientation or non-manifold edge");
            }
        }
    }
}

void labelComponents(TriMesh& mesh)
{
    const int nV = mesh.numVertices();
    mesh.componentOf.assign(nV, -1);

    std::vector<std::vector<int>> adjacency(nV);
    for (const auto& tri : mesh.faces) {
        for (int t = 0; t < 3; ++t) {
            int u = tri[t], v = tri[(t + 1) % 3];
            adjacency[u].push_back(v);
            adjacency[v].push_back(u);
        }
    }

    int comp = 0;
    for (int seed = 0; seed < nV; ++seed) {
        if (mesh.componentOf[seed] >= 0) continue;
        std::queue<int> frontier;
        frontier.push(seed);
        mesh.componentOf[seed] = comp;
        while (!frontier.empty()) {
            int u = frontier.front();
            frontier.pop();
            for (int v : adjacency[u]) {
                if (mesh.componentOf[v] < 0) {
                    mesh.componentOf[v] = comp;
                    frontier.push(v);
                }
            }
        }
        ++comp;
    }
    mesh.numComponents = comp;
}

std::vector<EdgeInfo> buildEdges(const TriMesh& mesh)
{
    std::map<std::pair<int, int>, EdgeInfo> edges;
    for (FaceId f = 0; f < mesh.numFaces(); ++f) {
        const auto& tri = mesh.faces[f];
        for (int t = 0; t < 3; ++t) {
            int u = tri[t], v = tri[(t + 1) % 3];
            auto key = std::minmax(u, v);
            auto it = edges.find(key);
            if (it == edges.end()) {
                EdgeInfo e;
                e.a = key.first;
                e.b = key.second;
                e.f0 = f;
                edges[key] = e;
            } else {
                if (it->second.f1 >= 0) {
                    throw std::runtime_error("edge (" + std::to_string(key.first) + "," +
                                             std::to_string(key.second) + ") shared by more than two faces");
                }
                it->second.f1 = f;
            }
        }
    }
    std::vector<EdgeInfo> out;
    out.reserve(edges.size());
    for (const auto& [key, e] : edges) {
        (void)key;
        out.push_back(e);
    }
    return out;
}

void buildLaplacian(const TriMesh& mesh, SparseMat& stiffness, SparseMat& lumpedMass)
{
    const int nV = mesh.numVertices();
    std::vector<Triplet> trips;
    trips.reserve(mesh.numFaces() * 12);
    Eigen::VectorXd mass = Eigen::VectorXd::Zero(nV);

    for (FaceId f = 0; f < mesh.numFaces(); ++f) {
        const auto& tri = mesh.faces[f];
        FaceGeometry g = faceGeometry(mesh, f);
        for (int corner = 0; corner < 3; ++corner) {
            int i = tri[corner];
            int j = tri[(corner + 1) % 3];
            int k = tri[(corner + 2) % 3];
            Vec3 e1 = mesh.positions[j] - mesh.positions[i];
            Vec3 e2 = mesh.positions[k] - mesh.positions[i];
            double cot = e1.dot(e2) / e1.cross(e2).norm();
            double w = 0.5 * cot; // contributes to edge (j,k) opposite corner i
            trips.emplace_back(j, k, -w);
            trips.emplace_back(k, j, -w);
            trips.emplace_back(j, j, w);
            trips.emplace_back(k, k, w);
            mass[i] += g.area / 3.0;
        }
    }

    stiffness.resize(nV, nV);
    stiffness.setFromTriplets(trips.begin(), trips.end());

    std::vector<Triplet> massTrips;
    massTrips.reserve(nV);
    for (int i = 0; i < nV; ++i) massTrips.emplace_back(i, i, mass[i]);
    lumpedMass.resize(nV, nV);
    lumpedMass.setFromTriplets(massTrips.begin(), massTrips.end());
}

Eigen::VectorXd vertexDualAreas(const TriMesh& mesh)
{
    Eigen::VectorXd dual = Eigen::VectorXd::Zero(mesh.numVertices());
    for (FaceId f = 0; f < mesh.numFaces(); ++f) {
        double a = faceGeometry(mesh, f).area;
        for (int t = 0; t < 3; ++t) dual[mesh.faces[f][t]] += a / 3.0;
    }
    return dual;
}

void totals(const TriMesh& mesh, double& area, double& signedVolume)
{
    area = 0;
    signedVolume = 0;
    for (FaceId f = 0; f < mesh.numFaces(); ++f) {
        const auto& tri = mesh.faces[f];
        const Vec3& a = mesh.positions[tri[0]];
        const Vec3& b = mesh.positions[tri[1]];
        const Vec3& c = mesh.positions[tri[2]];
        area += 0.5 * (b - a).cross(c - a).norm();
        signedVolume += a.dot(b.cross(c)) / 6.0;
    }
}

std::vector<bool> boundaryVertexMask(const TriMesh& mesh)
{
    std::vector<bool> mask(mesh.numVertices(), false);
    for (const EdgeInfo& e : buildEdges(mesh)) {
        if (e.boundary()) {
            mask[e.a] = true;
            mask[e.b] = true;
        }
    }
    return mask;
}

double meanEdgeLength(const TriMesh& mesh)
{
    auto edges = buildEdges(mesh);
    if (edges.empty()) return 0;
    double sum = 0;
    for (const EdgeInfo& e : edges) {
        sum += (mesh.positions[e.a] - mesh.positions[e.b]).norm();
    }
    return sum / static_cast<double>(edges.size());
}

double maxEdgeLength(const TriMesh& mesh)
{
    double m = 0;
    for (const EdgeInfo& e : buildEdges(mesh)) {
        m = std::max(m, (mesh.positions[e.a] - mesh.positions[e.b]).norm());
    }
    return m;
}

double bboxDiagonal(const TriMesh& mesh)
{
    if (mesh.positions.empty()) return 0;
    Vec3 lo = mesh.positions[0], hi = mesh.positions[0];
    for (const Vec3& p : mesh.positions) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    return (hi - lo).norm();
}

std::array<Vec3, 3> faceAreaGradient(const TriMesh& mesh, FaceId f)
{
    const auto& tri = mesh.faces[f];
    FaceGeometry g = faceGeometry(mesh, f);
    std::array<Vec3, 3> grad;
    for (int t = 0; t < 3; ++t) {
        const Vec3& xj = mesh.positions[tri[(t + 1) % 3]];
        const Vec3& xk = mesh.positions[tri[(t + 2) % 3]];
        grad[t] = 0.5 * (xj - xk).cross(g.normal);
    }
    return grad;
}

} // namespace repulsor
