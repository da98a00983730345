#include "repulsor/shapes.hpp"

#include <cmath>
#include <map>

namespace repulsor {

TriMesh makeTetrahedron(double scale)
{
    TriMesh m;
    m.positions = {
        scale * Vec3(1, 1, 1),
        scale * Vec3(1, -1, -1),
        scale * Vec3(-1, 1, -1),
        scale * Vec3(-1, -1, 1),
    };
    m.faces = {{0, 2, 1}, {0, 1, 3}, {0, 3, 2}, {1, 2, 3}};
    labelComponents(m);
    return m;
}

TriMesh makeCube(double edge)
{
    TriMesh m;
    double s = edge;
    m.positions = {
        {0, 0, 0}, {s, 0, 0}, {s, s, 0}, {0, s, 0},
        {0, 0, s}, {s, 0, s}, {s, s, s}, {0, s, s},
    };
    // Outward-oriented quads, each split into two triangles.
    int quads[6][4] = {
        {0, 3, 2, 1}, // bottom (z=0), normal -z
        {4, 5, 6, 7}, // top
        {0, 1, 5, 4}, // y=0
        {2, 3, 7, 6}, // y=s
        {1, 2, 6, 5}, // x=s
        {3, 0, 4, 7}, // x=0
    };
    for (auto& q : quads) {
        m.faces.push_back({q[0], q[1], q[2]});
        m.faces.push_back({q[0], q[2], q[3]});
    }
    labelComponents(m);
    return m;
}

TriMesh makeIcosphere(double radius, int level)
{
    const double t = (1.0 + std::sqrt(5.0)) / 2.0;
    std::vector<Vec3> verts = {
        {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0},
        {0, -1, t}, {0, 1, t}, {0, -1, -t}, {0, 1, -t},
        {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1},
    };
    std::vector<std::array<int, 3>> faces = {
        {0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11},
        {1, 5, 9}, {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
        {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8}, {3, 8, 9},
        {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1},
    };

    for (int l = 0; l < level; ++l) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            auto key = std::minmax(a, b);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            int idx = static_cast<int>(verts.size());
            verts.push_back(0.5 * (verts[a] + verts[b]));
            midpoint[key] = idx;
            return idx;
        };
        std::vector<std::array<int, 3>> next;
        next.reserve(faces.size() * 4);
        for (const auto& f : faces) {
            int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        faces.swap(next);
    }

    TriMesh m;
    m.positions.reserve(verts.size());
    for (const Vec3& v : verts) m.positions.push_back(radius * v.normalized());
    m.faces = faces;
    labelComponents(m);
    return m;
}

TriMesh makeTorus(double R, double r, int nPhi, int nTheta)
{
    TriMesh m;
    m.positions.reserve(nPhi * nTheta);
    for (int i = 0; i < nPhi; ++i) {
        double phi = 2.0 * M_PI * i / nPhi;
        for (int j = 0; j < nTheta; ++j) {
            double theta = 2.0 * M_PI * j / nTheta;
            double w = R + r * std::cos(theta);
            m.positions.push_back({w * std::cos(phi), w * std::sin(phi), r * std::sin(theta)});
        }
    }
    auto vid = [&](int i, int j) { return (i % nPhi) * nTheta + (j % nTheta); };
    for (int i = 0; i < nPhi; ++i) {
        for (int j = 0; j < nTheta; ++j) {
            int a = vid(i, j), b = vid(i + 1, j), c = vid(i + 1, j + 1), d = vid(i, j + 1);
            m.faces.push_back({a, b, c});
            m.faces.push_back({a, c, d});
        }
    }
    labelComponents(m);
    return m;
}

TriMesh makeBumpySphere(double radius, int level, double amplitude)
{
    TriMesh m = makeIcosphere(radius, level);
    for (Vec3& p : m.positions) {
        Vec3 d = p.normalized();
        double bump = std::sin(3.0 * d.x()) * std::sin(5.0 * d.y()) +
                      0.7 * std::cos(4.0 * d.z()) +
                      0.4 * std::sin(7.0 * d.x() + 2.0 * d.z());
        p = radius * (1.0 + amplitude * bump) * d;
    }
    labelComponents(m);
    return m;
}

TriMesh makeDiskFan(double radius, int n)
{
    TriMesh m;
    m.positions.push_back(Vec3::Zero());
    for (int i = 0; i < n; ++i) {
        double a = 2.0 * M_PI * i / n;
        m.positions.push_back({radius * std::cos(a), radius * std::sin(a), 0});
    }
    for (int i = 0; i < n; ++i) {
        m.faces.push_back({0, 1 + i, 1 + (i + 1) % n});
    }
    labelComponents(m);
    return m;
}

TriMesh makeStrip(double w, double h, int nx, int ny)
{
    TriMesh m;
    for (int j = 0; j <= ny; ++j) {
        for (int i = 0; i <= nx; ++i) {
            m.positions.push_back({w * i / nx, h * j / ny, 0});
        }
    }
    auto vid = [&](int i, int j) { return j * (nx + 1) + i; };
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            m.faces.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)});
            m.faces.push_back({vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)});
        }
    }
    labelComponents(m);
    return m;
}

void transformMesh(TriMesh& mesh, const Mat3& linear, const Vec3& translation)
{
    for (Vec3& p : mesh.positions) p = linear * p + translation;
}

} // namespace repulsor
