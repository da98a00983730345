#include "doctest.h"

#include <cstdio>
#include <fstream>
#include <random>

#include "repulsor/obj_io.hpp"
#include "repulsor/shapes.hpp"
#include "repulsor/trimesh.hpp"

using namespace repulsor;

namespace {

std::string writeTemp(const std::string& name, const std::string& content)
{
    std::string path = "/tmp/" + name;
    std::ofstream out(path);
    out << content;
    return path;
}

} // namespace

TEST_CASE("load_obj tetrahedron")
{
    auto path = writeTemp("tet.obj",
                          "# tetrahedron\n"
                          "v 1 1 1\nv 1 -1 -1\nv -1 1 -1\nv -1 -1 1\n"
                          "f 1 3 2\nf 1 2 4\nf 1 4 3\nf 2 3 4\n");
    TriMesh m = loadObj(path);
    CHECK(m.numVertices() == 4);
    CHECK(m.numFaces() == 4);
    CHECK(m.numComponents == 1);
}

TEST_CASE("load_obj two disjoint tetrahedra -> 2 components")
{
    std::string one =
        "v 1 1 1\nv 1 -1 -1\nv -1 1 -1\nv -1 -1 1\n"
        "f 1 3 2\nf 1 2 4\nf 1 4 3\nf 2 3 4\n";
    std::string two =
        "v 11 1 1\nv 11 -1 -1\nv 9 1 -1\nv 9 -1 1\n"
        "f 5 7 6\nf 5 6 8\nf 5 8 7\nf 6 7 8\n";
    TriMesh m = loadObj(writeTemp("tet2.obj", one + two));
    CHECK(m.numComponents == 2);
    // Partition: every vertex labeled, edges never join components.
    for (int c : m.componentOf) CHECK(c >= 0);
    for (const auto& tri : m.faces) {
        CHECK(m.componentOf[tri[0]] == m.componentOf[tri[1]]);
        CHECK(m.componentOf[tri[1]] == m.componentOf[tri[2]]);
    }
}

TEST_CASE("load_obj rejects quad faces")
{
    auto path = writeTemp("quad.obj", "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n");
    CHECK_THROWS_WITH_AS(loadObj(path), doctest::Contains("non-triangular face"),
                         std::runtime_error);
}

TEST_CASE("load_obj rejects out-of-range and degenerate")
{
    CHECK_THROWS(loadObj(writeTemp("oor.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n")));
    CHECK_THROWS(loadObj(writeTemp("deg.obj", "v 0 0 0\nv 1 0 0\nv 2 0 0\nf 1 2 3\n")));
}

TEST_CASE("save_obj round trip")
{
    TriMesh m = makeIcosphere(1.0, 1);
    // Positions exercising the 17-digit format.
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> jitter(-1e-3, 1e-3);
    for (auto& p : m.positions) p += Vec3(jitter(rng), jitter(rng), jitter(rng));

    std::string path = "/tmp/roundtrip.obj";
    saveObj(m, path);
    TriMesh back = loadObj(path);
    REQUIRE(back.numVertices() == m.numVertices());
    REQUIRE(back.numFaces() == m.numFaces());
    for (int f = 0; f < m.numFaces(); ++f) {
        CHECK(back.faces[f] == m.faces[f]);
    }
    for (int v = 0; v < m.numVertices(); ++v) {
        CHECK((back.positions[v] - m.positions[v]).norm() <=
              1e-12 * (1.0 + m.positions[v].norm()));
    }
}

TEST_CASE("save_obj unwritable path")
{
    TriMesh m = makeTetrahedron();
    CHECK_THROWS(saveObj(m, "/nonexistent-dir/x.obj"));
}

TEST_CASE("face_geometry basics")
{
    TriMesh m;
    m.positions = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}};
    m.faces = {{0, 1, 2}};
    FaceGeometry g = faceGeometry(m, 0);
    CHECK(g.area == doctest::Approx(0.5).epsilon(1e-14));
    CHECK((g.normal - Vec3(0, 0, 1)).norm() < 1e-14);
    CHECK((g.barycenter - Vec3(1.0 / 3, 1.0 / 3, 0)).norm() < 1e-14);
    CHECK(g.projector.trace() == doctest::Approx(1.0).epsilon(1e-12));
    // Projector idempotent.
    CHECK((g.projector * g.projector - g.projector).norm() < 1e-12);

    // Scaling by 2: area x4, normal unchanged.
    for (auto& p : m.positions) p *= 2.0;
    FaceGeometry g2 = faceGeometry(m, 0);
    CHECK(g2.area == doctest::Approx(4 * 0.5).epsilon(1e-14));
    CHECK((g2.normal - g.normal).norm() < 1e-14);
}

TEST_CASE("laplacian: equilateral triangle and row sums")
{
    TriMesh tri;
    tri.positions = {{0, 0, 0}, {1, 0, 0}, {0.5, std::sqrt(3.0) / 2.0, 0}};
    tri.faces = {{0, 1, 2}};
    SparseMat A, M;
    buildLaplacian(tri, A, M);
    double expected = -1.0 / (2.0 * std::sqrt(3.0));
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            if (i == j) continue;
            CHECK(A.coeff(i, j) == doctest::Approx(expected).epsilon(1e-12));
        }
    }

    TriMesh sphere = makeIcosphere(1.0, 2);
    buildLaplacian(sphere, A, M);
    Eigen::VectorXd ones = Eigen::VectorXd::Ones(sphere.numVertices());
    CHECK((A * ones).lpNorm<Eigen::Infinity>() < 1e-12);

    // PSD: 100 random quadratic forms.
    std::mt19937 rng(3);
    std::normal_distribution<double> gauss;
    for (int trial = 0; trial < 100; ++trial) {
        Eigen::VectorXd v(sphere.numVertices());
        for (int i = 0; i < v.size(); ++i) v[i] = gauss(rng);
        CHECK(v.dot(A * v) >= -1e-10);
    }
}

TEST_CASE("laplacian: unit-area triangle mass lumping")
{
    // Unit-area right triangle with legs sqrt(2).
    double s = std::sqrt(2.0);
    TriMesh tri;
    tri.positions = {{0, 0, 0}, {s, 0, 0}, {0, s, 0}};
    tri.faces = {{0, 1, 2}};
    SparseMat A, M;
    buildLaplacian(tri, A, M);
    for (int i = 0; i < 3; ++i) {
        CHECK(M.coeff(i, i) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    }
}

TEST_CASE("totals on the unit cube")
{
    TriMesh cube = makeCube(1.0);
    double area, vol;
    totals(cube, area, vol);
    CHECK(area == doctest::Approx(6.0).epsilon(1e-12));
    CHECK(vol == doctest::Approx(1.0).epsilon(1e-12));

    // Flipping all faces negates the volume.
    for (auto& f : cube.faces) std::swap(f[1], f[2]);
    totals(cube, area, vol);
    CHECK(vol == doctest::Approx(-1.0).epsilon(1e-12));

    // Flat patch through the origin: zero volume contribution.
    TriMesh strip = makeStrip(1.0, 1.0, 2, 2);
    for (auto& p : strip.positions) p -= Vec3(0.5, 0.5, 0); // plane through origin
    totals(strip, area, vol);
    CHECK(std::abs(vol) < 1e-14);
}

TEST_CASE("rigid-motion equivariance of areas and totals")
{
    TriMesh m = makeBumpySphere(1.0, 2, 0.1);
    double area0, vol0;
    totals(m, area0, vol0);
    auto geom0 = allFaceGeometry(m);

    Eigen::AngleAxisd rot(0.83, Vec3(1, 2, 3).normalized());
    transformMesh(m, rot.toRotationMatrix(), Vec3(0.3, -0.7, 2.1));
    double area1, vol1;
    totals(m, area1, vol1);
    CHECK(area1 == doctest::Approx(area0).epsilon(1e-10));

    auto geom1 = allFaceGeometry(m);
    for (int f = 0; f < m.numFaces(); ++f) {
        CHECK(geom1[f].area == doctest::Approx(geom0[f].area).epsilon(1e-10));
    }
}

TEST_CASE("validator rejects inconsistent orientation")
{
    TriMesh m;
    m.positions = {{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}};
    m.faces = {{0, 1, 2}, {1, 3, 2}};
    CHECK_NOTHROW(validateMesh(m));
    m.faces[1] = {2, 3, 1}; // same undirected edge traversed twice in same direction
    CHECK_THROWS(validateMesh(m));
}

TEST_CASE("vertex dual areas sum to total area")
{
    TriMesh m = makeTorus(1.0, 1.0 / 3.0, 24, 8);
    double area, vol;
    totals(m, area, vol);
    CHECK(vertexDualAreas(m).sum() == doctest::Approx(area).epsilon(1e-12));
    CHECK(vol > 0); // outward orientation
}
