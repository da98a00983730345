#include "repulsor/remesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>

namespace repulsor {

void RemeshParams::validate() const
{
    if (targetEdgeLength <= 0) throw std::invalid_argument("target edge length must be positive");
    if (smoothingFactor <= 0 || smoothingFactor >= 1) {
        throw std::invalid_argument("smoothing factor must lie in (0, 1)");
    }
    if (smoothingIterations < 1) throw std::invalid_argument("need at least one smoothing round");
}

Vec3 circumcenter(const Vec3& a, const Vec3& b, const Vec3& c)
{
    Vec3 ab = b - a, ac = c - a;
    Vec3 n = ab.cross(ac);
    double n2 = n.squaredNorm();
    return a + (ac.squaredNorm() * n.cross(ab) + ab.squaredNorm() * ac.cross(n)) / (2.0 * n2);
}

int eulerCharacteristic(const TriMesh& mesh)
{
    std::set<std::pair<int, int>> edges;
    for (const auto& tri : mesh.faces) {
        for (int t = 0; t < 3; ++t) {
            edges.insert(std::minmax(tri[t], tri[(t + 1) % 3]));
        }
    }
    return mesh.numVertices() - static_cast<int>(edges.size()) + mesh.numFaces();
}

namespace {

struct EditMesh {
    std::vector<Vec3> pos;
    std::vector<std::array<int, 3>> tri;
    std::vector<bool> triDead;
    std::vector<bool> pinned;
    std::vector<std::vector<int>> facesOf; // face ids, lazily cleaned
    std::vector<int> mergedInto;           // collapse chain; -1 = alive

    bool vertexAlive(int v) const { return mergedInto[v] < 0; }

    double faceArea(int f) const
    {
        const auto& T = tri[f];
        return 0.5 * (pos[T[1]] - pos[T[0]]).cross(pos[T[2]] - pos[T[0]]).norm();
    }

    Vec3 faceNormal(int f) const
    {
        const auto& T = tri[f];
        return (pos[T[1]] - pos[T[0]]).cross(pos[T[2]] - pos[T[0]]).normalized();
    }

    bool faceContains(int f, int v) const
    {
        return tri[f][0] == v || tri[f][1] == v || tri[f][2] == v;
    }

    std::vector<int> liveFacesOf(int v)
    {
        std::vector<int>& list = facesOf[v];
        list.erase(std::remove_if(list.begin(), list.end(),
                                  [&](int f) { return triDead[f] || !faceContains(f, v); }),
                   list.end());
        return list;
    }

    std::vector<int> facesOfEdge(int a, int b)
    {
        std::vector<int> shared;
        for (int f : liveFacesOf(a)) {
            if (faceContains(f, b)) shared.push_back(f);
        }
        std::sort(shared.begin(), shared.end());
        return shared;
    }

    int addVertex(const Vec3& p)
    {
        pos.push_back(p);
        pinned.push_back(false);
        facesOf.emplace_back();
        mergedInto.push_back(-1);
        return static_cast<int>(pos.size()) - 1;
    }

    int addFace(int a, int b, int c)
    {
        tri.push_back({a, b, c});
        triDead.push_back(false);
        int f = static_cast<int>(tri.size()) - 1;
        facesOf[a].push_back(f);
        facesOf[b].push_back(f);
        facesOf[c].push_back(f);
        return f;
    }

    std::vector<bool> boundaryMask()
    {
        std::map<std::pair<int, int>, int> count;
        for (size_t f = 0; f < tri.size(); ++f) {
            if (triDead[f]) continue;
            for (int t = 0; t < 3; ++t) {
                ++count[std::minmax(tri[f][t], tri[f][(t + 1) % 3])];
            }
        }
        std::vector<bool> mask(pos.size(), false);
        for (const auto& [e, c] : count) {
            if (c == 1) {
                mask[e.first] = true;
                mask[e.second] = true;
            }
        }
        return mask;
    }

    std::vector<std::pair<int, int>> liveEdges()
    {
        std::set<std::pair<int, int>> edges;
        for (size_t f = 0; f < tri.size(); ++f) {
            if (triDead[f]) continue;
            for (int t = 0; t < 3; ++t) {
                edges.insert(std::minmax(tri[f][t], tri[f][(t + 1) % 3]));
            }
        }
        return {edges.begin(), edges.end()};
    }
};

bool wouldFold(const EditMesh& m, int f, const std::array<int, 3>& newTri,
               const std::array<Vec3, 3>& newPos)
{
    Vec3 oldN = m.faceNormal(f);
    Vec3 cross = (newPos[1] - newPos[0]).cross(newPos[2] - newPos[0]);
    double area = 0.5 * cross.norm();
    if (area < kDegenerateAreaTol) return true;
    (void)newTri;
    return oldN.dot(cross.normalized()) <= 0;
}

int splitPass(EditMesh& m, double L0)
{
    int splits = 0;
    double threshold = 1.5 * L0;
    for (const auto& [a, b] : m.liveEdges()) {
        if (!m.vertexAlive(a) || !m.vertexAlive(b)) continue;
        if ((m.pos[a] - m.pos[b]).norm() <= threshold) continue;
        auto shared = m.facesOfEdge(a, b);
        if (shared.empty() || shared.size() > 2) continue;

        Vec3 mid = 0.5 * (m.pos[a] + m.pos[b]);
        // The two child triangles of each incident face keep its plane; only
        // degenerate children can reject a split.
        bool ok = true;
        for (int f : shared) {
            const auto& T = m.tri[f];
            int c = T[0] + T[1] + T[2] - a - b;
            double areaA = 0.5 * (m.pos[a] - mid).cross(m.pos[c] - mid).norm();
            double areaB = 0.5 * (m.pos[b] - mid).cross(m.pos[c] - mid).norm();
            if (areaA < kDegenerateAreaTol || areaB < kDegenerateAreaTol) ok = false;
        }
        if (!ok) continue;

        int v = m.addVertex(mid);
        for (int f : shared) {
            // Preserve orientation: replace the edge endpoints in place.
            std::array<int, 3> T = m.tri[f];
            m.triDead[f] = true;
            std::array<int, 3> first = T, second = T;
            for (int t = 0; t < 3; ++t) {
                if (first[t] == b) first[t] = v;
                if (second[t] == a) second[t] = v;
            }
            m.addFace(first[0], first[1], first[2]);
            m.addFace(second[0], second[1], second[2]);
        }
        ++splits;
    }
    return splits;
}

int collapsePass(EditMesh& m, double L0)
{
    int collapses = 0;
    double threshold = 0.5 * L0;
    auto boundary = m.boundaryMask();

    for (const auto& [a0, b0] : m.liveEdges()) {
        int a = a0, b = b0;
        if (!m.vertexAlive(a) || !m.vertexAlive(b)) continue;
        if (m.pinned[a] || m.pinned[b]) continue;
        if ((m.pos[a] - m.pos[b]).norm() >= threshold) continue;

        auto shared = m.facesOfEdge(a, b);
        if (shared.empty() || shared.size() > 2) continue;
        bool edgeBoundary = shared.size() == 1;
        if (edgeBoundary) {
            if (!boundary[a] || !boundary[b]) continue;
        } else {
            if (boundary[a] || boundary[b]) continue;
        }

        // Link condition: the common neighbors must be exactly the opposite
        // vertices of the shared faces.
        std::set<int> neighA, neighB;
        for (int f : m.liveFacesOf(a)) {
            for (int t = 0; t < 3; ++t) {
                if (m.tri[f][t] != a) neighA.insert(m.tri[f][t]);
            }
        }
        for (int f : m.liveFacesOf(b)) {
            for (int t = 0; t < 3; ++t) {
                if (m.tri[f][t] != b) neighB.insert(m.tri[f][t]);
            }
        }
        std::vector<int> common;
        std::set_intersection(neighA.begin(), neighA.end(), neighB.begin(), neighB.end(),
                              std::back_inserter(common));
        if (common.size() != shared.size()) continue;

        // Simulate the merged configuration.
        Vec3 mid = 0.5 * (m.pos[a] + m.pos[b]);
        std::vector<int> affected;
        for (int f : m.liveFacesOf(a)) affected.push_back(f);
        for (int f : m.liveFacesOf(b)) affected.push_back(f);
        std::sort(affected.begin(), affected.end());
        affected.erase(std::unique(affected.begin(), affected.end()), affected.end());

        bool ok = true;
        std::set<std::array<int, 3>> survivorKeys;
        for (int f : affected) {
            if (std::find(shared.begin(), shared.end(), f) != shared.end()) continue;
            std::array<int, 3> T = m.tri[f];
            std::array<Vec3, 3> P;
            for (int t = 0; t < 3; ++t) {
                if (T[t] == b) T[t] = a;
                P[t] = (T[t] == a) ? mid : m.pos[T[t]];
            }
            if (T[0] == T[1] || T[1] == T[2] || T[0] == T[2]) {
                ok = false;
                break;
            }
            std::array<int, 3> key = T;
            std::sort(key.begin(), key.end());
            if (!survivorKeys.insert(key).second) { // duplicate face (pillow)
                ok = false;
                break;
            }
            if (wouldFold(m, f, T, P)) {
                ok = false;
                break;
            }
        }
        if (!ok) continue;

        // Commit: kill shared faces, rewrite b -> a, move a to the midpoint.
        for (int f : shared) m.triDead[f] = true;
        for (int f : m.liveFacesOf(b)) {
            for (int t = 0; t < 3; ++t) {
                if (m.tri[f][t] == b) m.tri[f][t] = a;
            }
            m.facesOf[a].push_back(f);
        }
        m.pos[a] = mid;
        m.mergedInto[b] = a;
        boundary[a] = boundary[a] || boundary[b];
        ++collapses;
    }
    return collapses;
}

double interiorAngle(const Vec3& apex, const Vec3& p, const Vec3& q)
{
    Vec3 u = p - apex, v = q - apex;
    return std::atan2(u.cross(v).norm(), u.dot(v));
}

int flipSweep(EditMesh& m)
{
    int flips = 0;
    for (const auto& [a, b] : m.liveEdges()) {
        if (!m.vertexAlive(a) || !m.vertexAlive(b)) continue;
        auto shared = m.facesOfEdge(a, b);
        if (shared.size() != 2) continue;
        int fA = shared[0], fB = shared[1];
        int k = m.tri[fA][0] + m.tri[fA][1] + m.tri[fA][2] - a - b;
        int l = m.tri[fB][0] + m.tri[fB][1] + m.tri[fB][2] - a - b;
        if (k == l) continue;

        double angles = interiorAngle(m.pos[k], m.pos[a], m.pos[b]) +
                        interiorAngle(m.pos[l], m.pos[a], m.pos[b]);
        if (angles <= M_PI + 1e-10) continue;      // intrinsic Delaunay already
        if (!m.facesOfEdge(k, l).empty()) continue; // new edge must not exist

        // Orient the replacement faces consistently with fA: fA traverses
        // the edge in some direction a->b or b->a.
        int u = a, v = b;
        bool found = false;
        for (int t = 0; t < 3 && !found; ++t) {
            if (m.tri[fA][t] == u && m.tri[fA][(t + 1) % 3] == v) found = true;
        }
        if (!found) std::swap(u, v); // fA contains v->u
        // fA = (u, v, k) cyclically, fB = (v, u, l). Flip to (u, l, k), (v, k, l).
        std::array<int, 3> newA = {u, l, k};
        std::array<int, 3> newB = {v, k, l};
        auto posOf = [&](const std::array<int, 3>& T) {
            return std::array<Vec3, 3>{m.pos[T[0]], m.pos[T[1]], m.pos[T[2]]};
        };
        Vec3 refNormal = (m.faceNormal(fA) + m.faceNormal(fB)).normalized();
        auto valid = [&](const std::array<int, 3>& T) {
            Vec3 cross = (m.pos[T[1]] - m.pos[T[0]]).cross(m.pos[T[2]] - m.pos[T[0]]);
            if (0.5 * cross.norm() < kDegenerateAreaTol) return false;
            return refNormal.dot(cross.normalized()) > 0;
        };
        (void)posOf;
        if (!valid(newA) || !valid(newB)) continue;

        m.triDead[fA] = true;
        m.triDead[fB] = true;
        m.addFace(newA[0], newA[1], newA[2]);
        m.addFace(newB[0], newB[1], newB[2]);
        ++flips;
    }
    return flips;
}

int smoothPass(EditMesh& m, double rho)
{
    int moved = 0;
    auto boundary = m.boundaryMask();
    const int nV = static_cast<int>(m.pos.size());
    for (int v = 0; v < nV; ++v) {
        if (!m.vertexAlive(v) || m.pinned[v] || boundary[v]) continue;
        auto faces = m.liveFacesOf(v);
        if (faces.empty()) continue;

        double areaSum = 0;
        Vec3 displacement = Vec3::Zero();
        Vec3 normal = Vec3::Zero();
        for (int f : faces) {
            const auto& T = m.tri[f];
            double area = m.faceArea(f);
            Vec3 c = circumcenter(m.pos[T[0]], m.pos[T[1]], m.pos[T[2]]);
            displacement += area * (c - m.pos[v]);
            normal += area * m.faceNormal(f);
            areaSum += area;
        }
        displacement *= rho / areaSum;
        Vec3 n = normal.normalized();
        displacement -= n * n.dot(displacement);

        Vec3 trial = m.pos[v] + displacement;
        bool ok = true;
        for (int f : faces) {
            std::array<int, 3> T = m.tri[f];
            std::array<Vec3, 3> P;
            for (int t = 0; t < 3; ++t) P[t] = (T[t] == v) ? trial : m.pos[T[t]];
            if (wouldFold(m, f, T, P)) {
                ok = false;
                break;
            }
        }
        if (!ok) continue;
        m.pos[v] = trial;
        ++moved;
    }
    return moved;
}

} // namespace

RemeshResult remeshPass(const TriMesh& mesh, const RemeshParams& params,
                        const std::vector<int>& pinnedVertices)
{
    params.validate();

    EditMesh m;
    m.pos = mesh.positions;
    m.tri = mesh.faces;
    m.triDead.assign(mesh.numFaces(), false);
    m.pinned.assign(mesh.numVertices(), false);
    m.mergedInto.assign(mesh.numVertices(), -1);
    m.facesOf.resize(mesh.numVertices());
    for (int f = 0; f < mesh.numFaces(); ++f) {
        for (int t = 0; t < 3; ++t) m.facesOf[mesh.faces[f][t]].push_back(f);
    }
    for (int v : pinnedVertices) m.pinned.at(v) = true;

    RemeshResult result;
    result.stats.splits = splitPass(m, params.targetEdgeLength);
    result.stats.collapses = collapsePass(m, params.targetEdgeLength);

    for (int round = 0; round < params.smoothingIterations; ++round) {
        int sweeps = 0;
        while (sweeps < 100) {
            int flips = flipSweep(m);
            result.stats.flips += flips;
            ++sweeps;
            if (flips == 0) break;
        }
        if (sweeps == 100) ++result.stats.flipSweepCapHits;
        smoothPass(m, params.smoothingFactor);
    }

    // Compact to a fresh TriMesh; collapsed vertices map to their merged
    // representative so callers can re-address pins.
    const int nOld = mesh.numVertices();
    std::vector<int> newIndex(m.pos.size(), -1);
    for (size_t v = 0; v < m.pos.size(); ++v) {
        if (m.mergedInto[v] >= 0) continue;
        bool referenced = false;
        for (int f : m.liveFacesOf(static_cast<int>(v))) {
            (void)f;
            referenced = true;
            break;
        }
        if (!referenced) continue; // isolated leftovers cannot appear, but stay safe
        newIndex[v] = 0;
    }
    int next = 0;
    for (size_t v = 0; v < m.pos.size(); ++v) {
        if (newIndex[v] == 0) newIndex[v] = next++;
        else newIndex[v] = -1;
    }

    result.mesh.positions.reserve(next);
    for (size_t v = 0; v < m.pos.size(); ++v) {
        if (newIndex[v] >= 0) result.mesh.positions.push_back(m.pos[v]);
    }
    for (size_t f = 0; f < m.tri.size(); ++f) {
        if (m.triDead[f]) continue;
        const auto& T = m.tri[f];
        result.mesh.faces.push_back({newIndex[T[0]], newIndex[T[1]], newIndex[T[2]]});
    }

    result.vertexMap.assign(nOld, -1);
    for (int v = 0; v < nOld; ++v) {
        int rep = v;
        while (m.mergedInto[rep] >= 0) rep = m.mergedInto[rep];
        result.vertexMap[v] = newIndex[rep];
    }

    labelComponents(result.mesh);
    validateMesh(result.mesh);
    return result;
}

} // namespace repulsor
