#include "doctest.h"

#include "repulsor/penalties.hpp"
#include "repulsor/shapes.hpp"
#include "test_oracles.hpp"

using namespace repulsor;
using namespace repulsor::testing;

namespace {

// Central finite differences of a penalty value; oracle for every gradient.
Eigen::VectorXd fdPenaltyGradient(const Penalty& penalty, TriMesh mesh, double step)
{
    const int n3 = 3 * mesh.numVertices();
    Eigen::VectorXd fd(n3);
    for (int d = 0; d < n3; ++d) {
        double saved = mesh.positions[d / 3][d % 3];
        mesh.positions[d / 3][d % 3] = saved + step;
        double ep = penaltyValue(penalty, mesh, nullptr);
        mesh.positions[d / 3][d % 3] = saved - step;
        double em = penaltyValue(penalty, mesh, nullptr);
        mesh.positions[d / 3][d % 3] = saved;
        fd[d] = (ep - em) / (2.0 * step);
    }
    return fd;
}

void checkGradient(const Penalty& penalty, const TriMesh& mesh, double tol = 1e-4)
{
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(3 * mesh.numVertices());
    penaltyValue(penalty, mesh, &grad);
    grad /= penalty.weight;
    Eigen::VectorXd fd = fdPenaltyGradient(penalty, mesh, 1e-6 * bboxDiagonal(mesh));
    REQUIRE(fd.norm() > 0);
    CHECK((grad - fd).norm() / fd.norm() <= tol);
}

} // namespace

TEST_CASE("area and volume deviation penalties")
{
    TriMesh cube = makeCube(1.0);

    Penalty area;
    area.kind = Penalty::Kind::AreaDeviation;
    area.target = 6.0;
    CHECK(penaltyValue(area, cube, nullptr) == doctest::Approx(0.0));

    Eigen::VectorXd grad = Eigen::VectorXd::Zero(3 * cube.numVertices());
    penaltyValue(area, cube, &grad);
    CHECK(grad.norm() < 1e-12);

    // Cube with A0 = 3 has value (6/3 - 1)^2 = 1.
    area.target = 3.0;
    CHECK(penaltyValue(area, cube, nullptr) == doctest::Approx(1.0).epsilon(1e-12));

    TriMesh bumpy = makeBumpySphere(1.0, 1, 0.1);
    area.weight = 2.5;
    checkGradient(area, bumpy, 1e-5);

    Penalty vol;
    vol.kind = Penalty::Kind::VolumeDeviation;
    vol.target = 2.0;
    vol.weight = 0.7;
    checkGradient(vol, bumpy, 1e-5);

    Penalty bad;
    bad.kind = Penalty::Kind::AreaDeviation;
    bad.target = 0;
    CHECK_THROWS(penaltyValue(bad, cube, nullptr));
}

TEST_CASE("obstacle potentials: hand values and reciprocity")
{
    // Single unit-area obstacle face at distance 2 from a sample point.
    TriMesh obstacle;
    double s = std::sqrt(2.0); // legs giving area 1
    obstacle.positions = {{0, 0, 0}, {s, 0, 0}, {0, s, 0}};
    obstacle.faces = {{0, 1, 2}};
    labelComponents(obstacle);
    auto obstacleGeom = allFaceGeometry(obstacle);
    Vec3 bary = obstacleGeom[0].barycenter;

    // A tiny probe triangle whose single vertex potential we inspect.
    Penalty pen;
    pen.kind = Penalty::Kind::MeshObstacle;
    pen.exponent = 6;
    pen.obstacle = std::make_shared<TriMesh>(obstacle);
    BvhParams bp;
    bp.leafSize = 1;
    pen.obstacleBvh = std::make_shared<Bvh>(buildBvh(obstacle, obstacleGeom, bp));
    pen.obstacleTheta = 0;

    // Probe mesh: a small triangle with barycentric dual areas; compare the
    // integrated value against the analytic sum over its vertices.
    TriMesh probe;
    Vec3 offset = bary + Vec3(0, 0, 2.0);
    probe.positions = {offset, offset + Vec3(0.01, 0, 0), offset + Vec3(0, 0.01, 0)};
    probe.faces = {{0, 1, 2}};
    labelComponents(probe);

    double value = penaltyValue(pen, probe, nullptr);
    Eigen::VectorXd dual = vertexDualAreas(probe);
    double expected = 0;
    for (int v = 0; v < 3; ++v) {
        expected += dual[v] * std::pow((bary - probe.positions[v]).norm(), -6.0);
    }
    CHECK(value == doctest::Approx(expected).epsilon(1e-12));
    CHECK(std::pow((bary - probe.positions[0]).norm(), -6.0) ==
          doctest::Approx(std::pow(2.0, -6.0)).epsilon(1e-9));

    // Implicit sphere obstacle: distance 2 from the unit level set.
    auto field = makeSphereField(Vec3::Zero(), 1.0);
    CHECK(field->value(Vec3(3, 0, 0)) == doctest::Approx(2.0));
    Penalty imp;
    imp.kind = Penalty::Kind::ImplicitObstacle;
    imp.field = field;
    imp.exponent = 6;

    Penalty att = imp;
    att.kind = Penalty::Kind::ImplicitAttractor;

    // Reciprocity pointwise: obstacle * attractor potential = 1.
    for (const Vec3& x : {Vec3(3, 0, 0), Vec3(0, 2.5, 0.5)}) {
        double d = field->value(x);
        CHECK(std::pow(d, -6.0) * std::pow(d, 6.0) == doctest::Approx(1.0).epsilon(1e-12));
    }

    // Gradient checks on a small sphere mesh sitting outside the obstacle.
    TriMesh shell = makeIcosphere(0.4, 1);
    transformMesh(shell, Mat3::Identity(), Vec3(2.5, 0, 0));
    imp.weight = 1.3;
    checkGradient(imp, shell);
    att.weight = 0.4;
    checkGradient(att, shell);
    pen.weight = 2.0;
    checkGradient(pen, shell);

    // Vertex inside the obstacle level set is an error naming the vertex.
    TriMesh inside = makeIcosphere(0.2, 0);
    CHECK_THROWS_WITH_AS(penaltyValue(imp, inside, nullptr), doctest::Contains("vertex"),
                         std::runtime_error);
}

TEST_CASE("implicit primitive fields")
{
    auto cyl = makeCylinderField(Vec3(0, 0, 0), Vec3(0, 0, 1), 1.0);
    CHECK(cyl->value(Vec3(2, 0, 5)) == doctest::Approx(1.0));
    CHECK((cyl->gradient(Vec3(2, 0, 5)) - Vec3(1, 0, 0)).norm() < 1e-12);

    auto plane = makePlaneField(Vec3(0, 0, 1), Vec3(0, 0, 2));
    CHECK(plane->value(Vec3(4, 5, 3)) == doctest::Approx(2.0));

    auto slab = makeSlabField(Vec3::Zero(), Vec3(0, 0, 1), 1.0);
    CHECK(slab->value(Vec3(0, 0, 0)) == doctest::Approx(1.0));
    CHECK(slab->value(Vec3(7, 7, 0.5)) == doctest::Approx(0.5));
    CHECK(slab->value(Vec3(0, 0, -2)) == doctest::Approx(-1.0));

    // Sampled grid round trip and interpolation of a trilinear function.
    std::array<long, 3> dims = {5, 4, 6};
    Vec3 origin(-1, -1, -1), spacing(0.5, 0.7, 0.4);
    std::vector<double> samples(dims[0] * dims[1] * dims[2]);
    auto f = [](const Vec3& x) { return 2.0 + 0.5 * x[0] - 1.25 * x[1] + 3.0 * x[2] +
                                        0.75 * x[0] * x[1] * x[2]; };
    for (long k = 0; k < dims[2]; ++k) {
        for (long j = 0; j < dims[1]; ++j) {
            for (long i = 0; i < dims[0]; ++i) {
                Vec3 x = origin + Vec3(i * spacing[0], j * spacing[1], k * spacing[2]);
                samples[i + dims[0] * (j + dims[1] * k)] = f(x);
            }
        }
    }
    std::string path = "/tmp/field.bin";
    saveGridField(path, dims, origin, spacing, samples);
    auto grid = loadGridField(path);
    Vec3 q(-0.3, 0.4, 0.25);
    CHECK(grid->value(q) == doctest::Approx(f(q)).epsilon(1e-12)); // trilinear reproduces it
    // Analytic interpolant gradient matches finite differences.
    double h = 1e-7;
    for (int c = 0; c < 3; ++c) {
        Vec3 qp = q, qm = q;
        qp[c] += h;
        qm[c] -= h;
        double fd = (grid->value(qp) - grid->value(qm)) / (2 * h);
        CHECK(grid->gradient(q)[c] == doctest::Approx(fd).epsilon(1e-6));
    }
    CHECK_THROWS(grid->value(Vec3(50, 0, 0)));
}

TEST_CASE("boundary penalties")
{
    int n = 12;
    double radius = 1.0;
    TriMesh disk = makeDiskFan(radius, n);

    Penalty curv;
    curv.kind = Penalty::Kind::BoundaryCurvature;
    double side = 2.0 * radius * std::sin(M_PI / n);
    double expected = n * std::pow(2.0 * M_PI / n, 2.0) / side;
    CHECK(penaltyValue(curv, disk, nullptr) == doctest::Approx(expected).epsilon(1e-12));

    Penalty len;
    len.kind = Penalty::Kind::BoundaryLength;
    len.target = n * side;
    CHECK(penaltyValue(len, disk, nullptr) == doctest::Approx(0.0));
    len.target = 2.0;

    // Perturb out of plane so gradients are generic.
    TriMesh bent = disk;
    for (int v = 0; v < bent.numVertices(); ++v) {
        bent.positions[v][2] = 0.1 * std::sin(2.5 * v);
    }
    len.weight = 1.7;
    checkGradient(len, bent);
    curv.weight = 0.9;
    checkGradient(curv, bent);

    TriMesh closed = makeIcosphere(1.0, 1);
    CHECK_THROWS_WITH_AS(penaltyValue(len, closed, nullptr), doctest::Contains("closed"),
                         std::runtime_error);
}

TEST_CASE("willmore penalty")
{
    Penalty will;
    will.kind = Penalty::Kind::Willmore;

    // Flat patch: harmonic coordinates vanish up to roundoff.
    TriMesh strip = makeStrip(2.0, 1.0, 5, 3);
    CHECK(penaltyValue(will, strip, nullptr) < 1e-10);

    // Unit sphere: integral of (2H)^2 is 16 pi; report the convergence.
    double reference = 16.0 * M_PI;
    double prevErr = std::numeric_limits<double>::max();
    for (int level : {2, 3}) {
        TriMesh sphere = makeIcosphere(1.0, level);
        double e = penaltyValue(will, sphere, nullptr);
        double err = std::abs(e - reference) / reference;
        MESSAGE("willmore level ", level, ": ", e, " (rel err ", err, ")");
        CHECK(err < prevErr);
        prevErr = err;
    }
    CHECK(prevErr < 0.02);

    // Gradient under the frozen-operator convention: compare against the
    // quadratic-form finite difference with the matrices held fixed.
    TriMesh bumpy = makeBumpySphere(1.0, 1, 0.1);
    SparseMat W = willmoreMetricTerm(bumpy);
    const int nV = bumpy.numVertices();
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(3 * nV);
    penaltyValue(will, bumpy, &grad);
    auto quad = [&](const TriMesh& m) {
        Eigen::MatrixXd F(nV, 3);
        for (int v = 0; v < nV; ++v) F.row(v) = m.positions[v].transpose();
        return (F.array() * (W * F).array()).sum();
    };
    double step = 1e-6;
    for (int d = 0; d < 3 * nV; d += 17) { // sampled coordinates
        TriMesh mp = bumpy, mm = bumpy;
        mp.positions[d / 3][d % 3] += step;
        mm.positions[d / 3][d % 3] -= step;
        double fd = (quad(mp) - quad(mm)) / (2 * step);
        CHECK(grad[d] == doctest::Approx(fd).epsilon(1e-4));
    }
}

TEST_CASE("penalty set: additivity and validation")
{
    TriMesh bumpy = makeBumpySphere(1.0, 1, 0.1);
    PenaltySet set;
    Penalty area;
    area.kind = Penalty::Kind::AreaDeviation;
    area.target = 10.0;
    area.weight = 2.0;
    Penalty will;
    will.kind = Penalty::Kind::Willmore;
    will.weight = 0.25;
    set.items = {area, will};

    Eigen::VectorXd grad = Eigen::VectorXd::Zero(3 * bumpy.numVertices());
    PenaltyEvaluation eval = evaluatePenalties(set, bumpy, &grad);
    double sum = area.weight * penaltyValue(area, bumpy, nullptr) +
                 will.weight * penaltyValue(will, bumpy, nullptr);
    CHECK(eval.weightedTotal == doctest::Approx(sum).epsilon(1e-12));
    CHECK(set.willmoreWeight() == doctest::Approx(0.25));

    set.items[0].weight = -1;
    CHECK_THROWS(set.validate(6.0));
    set.items[0].weight = 1;
    Penalty obs;
    obs.kind = Penalty::Kind::ImplicitObstacle;
    obs.exponent = 4; // mismatched exponent
    set.items.push_back(obs);
    CHECK_THROWS(set.validate(6.0));
}
