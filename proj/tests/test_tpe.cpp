#include "doctest.h"

#include <random>

#include "repulsor/shapes.hpp"
#include "repulsor/tpe.hpp"

using namespace repulsor;

namespace {

// Central finite differences of the exact energy; the independent oracle for
// the analytic differential.
Eigen::VectorXd fdDifferential(TriMesh mesh, const EnergyParams& params, double step)
{
    const int n3 = 3 * mesh.numVertices();
    Eigen::VectorXd fd(n3);
    for (int d = 0; d < n3; ++d) {
        double saved = mesh.positions[d / 3][d % 3];
        mesh.positions[d / 3][d % 3] = saved + step;
        double ep = tpeEnergyExact(mesh, allFaceGeometry(mesh), params, true);
        mesh.positions[d / 3][d % 3] = saved - step;
        double em = tpeEnergyExact(mesh, allFaceGeometry(mesh), params, true);
        mesh.positions[d / 3][d % 3] = saved;
        fd[d] = (ep - em) / (2.0 * step);
    }
    return fd;
}

TriMesh perturbedIcosphere(int level, double amplitude, unsigned seed)
{
    TriMesh m = makeIcosphere(1.0, level);
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> u(-amplitude, amplitude);
    for (auto& p : m.positions) p *= 1.0 + u(rng);
    return m;
}

} // namespace

TEST_CASE("kernel hand values")
{
    double p = 6;
    // Unit-sphere pair: radius 1, kernel (2r)^-p = 2^-6.
    Vec3 X(1, 0, 0), Y(0, 1, 0);
    Mat3 P = X * X.transpose();
    CHECK(tpKernel(X, P, Y, p) == doctest::Approx(0.015625).epsilon(1e-14));

    // Coplanar offset: infinite radius, zero kernel.
    Mat3 Pz = Vec3(0, 0, 1) * Vec3(0, 0, 1).transpose();
    CHECK(tpKernel(Vec3(0, 0, 0), Pz, Vec3(1, 0, 0), p) == 0.0);

    // Hand evaluation at p = 2.
    CHECK(tpKernel(Vec3(0, 0, 0), Pz, Vec3(1, 0, 1), 2) == doctest::Approx(0.25).epsilon(1e-14));

    // Coincident points rejected.
    CHECK_THROWS(tpKernel(X, P, X, p));
}

TEST_CASE("planar mesh has zero energy")
{
    TriMesh strip = makeStrip(2.0, 1.0, 4, 2);
    EnergyParams params;
    CHECK(tpeEnergyExact(strip, allFaceGeometry(strip), params) == 0.0);
}

TEST_CASE("icosphere energies approach the analytic sphere value")
{
    EnergyParams params;
    double reference = sphereTangentPointEnergy(1.0, params.p);
    CHECK(reference == doctest::Approx(M_PI * M_PI / 4.0).epsilon(1e-14));

    double prevErr = std::numeric_limits<double>::max();
    for (int level : {1, 2, 3}) {
        TriMesh m = makeIcosphere(1.0, level);
        double e = tpeEnergyExact(m, allFaceGeometry(m), params);
        double err = std::abs(e - reference) / reference;
        CHECK(err < prevErr);
        prevErr = err;
    }
    CHECK(prevErr < 0.02);
}

TEST_CASE("torus energy converges to the quadrature oracle")
{
    double R = 1.0, r = 1.0 / 3.0, p = 6;
    // Oracle self-consistency: Richardson values from two grid pairs agree
    // to better than 4 digits.
    double refA = torusTangentPointEnergyReference(R, r, p, 16);
    double refB = torusTangentPointEnergyReference(R, r, p, 32);
    CHECK(std::abs(refA - refB) / refB < 1e-4);

    EnergyParams params;
    std::vector<double> errs, hs;
    for (int n : {8, 16, 32}) {
        TriMesh m = makeTorus(R, r, 3 * n, n);
        double e = tpeEnergyExact(m, allFaceGeometry(m), params);
        errs.push_back(std::abs(e - refB) / refB);
        hs.push_back(maxEdgeLength(m));
    }
    CHECK(errs[1] < errs[0]);
    CHECK(errs[2] < errs[1]);
    // Fitted convergence rate lands between O(h) and O(h^2).
    double rate = std::log(errs[0] / errs[2]) / std::log(hs[0] / hs[2]);
    CHECK(rate > 1.0);
    CHECK(rate < 2.0);
    CHECK(errs[2] < 0.1);
}

TEST_CASE("differential: translation invariance and rotation equivariance")
{
    TriMesh m = perturbedIcosphere(1, 0.08, 11);
    EnergyParams params;
    auto geom = allFaceGeometry(m);
    Eigen::VectorXd g = tpeDifferentialExact(m, geom, params, true);

    // Per-coordinate sums vanish.
    Vec3 sums = Vec3::Zero();
    for (int v = 0; v < m.numVertices(); ++v) sums += g.segment<3>(3 * v);
    CHECK(sums.norm() <= 1e-10 * g.norm());

    // Rotating the mesh rotates the differential blockwise.
    Eigen::AngleAxisd rot(1.1, Vec3(0.3, -1, 0.5).normalized());
    Mat3 R = rot.toRotationMatrix();
    TriMesh mr = m;
    transformMesh(mr, R, Vec3::Zero());
    Eigen::VectorXd gr = tpeDifferentialExact(mr, allFaceGeometry(mr), params, true);
    double worst = 0;
    for (int v = 0; v < m.numVertices(); ++v) {
        worst = std::max(worst, (gr.segment<3>(3 * v) - R * g.segment<3>(3 * v)).norm());
    }
    CHECK(worst <= 1e-10 * g.norm());

    // Energy unchanged by uniform translation.
    double e0 = tpeEnergyExact(m, geom, params, true);
    TriMesh mt = m;
    transformMesh(mt, Mat3::Identity(), Vec3(3.2, -1.5, 0.7));
    double e1 = tpeEnergyExact(mt, allFaceGeometry(mt), params, true);
    CHECK(e1 == doctest::Approx(e0).epsilon(1e-12));
    Eigen::VectorXd gt = tpeDifferentialExact(mt, allFaceGeometry(mt), params, true);
    CHECK((gt - g).norm() <= 1e-10 * g.norm());
}

TEST_CASE("differential matches finite differences")
{
    // 42 vertices; enough to exercise every term of the chain rule.
    TriMesh m = perturbedIcosphere(1, 0.1, 5);
    EnergyParams params;
    Eigen::VectorXd g = tpeDifferentialExact(m, allFaceGeometry(m), params, true);
    Eigen::VectorXd fd = fdDifferential(m, params, 1e-6 * bboxDiagonal(m));
    CHECK((g - fd).norm() / fd.norm() <= 1e-5);
}

TEST_CASE("scaling law")
{
    TriMesh m = perturbedIcosphere(1, 0.05, 2);
    EnergyParams params;
    double e0 = tpeEnergyExact(m, allFaceGeometry(m), params, true);
    double lambda = 2.0;
    TriMesh ms = m;
    transformMesh(ms, lambda * Mat3::Identity(), Vec3::Zero());
    double e1 = tpeEnergyExact(ms, allFaceGeometry(ms), params, true);
    CHECK(e1 == doctest::Approx(std::pow(lambda, 4.0 - params.p) * e0).epsilon(1e-12));
}

TEST_CASE("subcritical exponent keeps overlapping meshes finite")
{
    TriMesh a = makeIcosphere(1.0, 1);
    TriMesh b = makeIcosphere(1.0, 1);
    transformMesh(b, Mat3::Identity(), Vec3(0.5, 0, 0)); // overlapping spheres
    TriMesh both = a;
    int off = a.numVertices();
    for (const auto& p : b.positions) both.positions.push_back(p);
    for (const auto& f : b.faces) both.faces.push_back({f[0] + off, f[1] + off, f[2] + off});
    labelComponents(both);

    EnergyParams params;
    params.p = 3;
    params.subcritical = true;
    double e = tpeEnergyExact(both, allFaceGeometry(both), params);
    CHECK(std::isfinite(e));
    CHECK(e > 0);

    // p <= 4 without the flag is rejected.
    EnergyParams bad;
    bad.p = 3;
    CHECK_THROWS(bad.validate());
}
