#include "doctest.h"

#include "repulsor/shapes.hpp"
#include "test_oracles.hpp"

using namespace repulsor;
using namespace repulsor::testing;

namespace {

struct FlowSetup {
    TriMesh mesh;
    std::vector<FaceGeometry> geom;
    Bvh bvh;
    BlockClusterTree bct;
    std::unique_ptr<FractionalStack> stack;
    ConstraintSet set;
    SparseMat posRows;
    std::unique_ptr<HsSolver> solver;

    FlowSetup(TriMesh m, ConstraintSet s, double chi = 0.0, double tol = 1e-10)
        : mesh(std::move(m)), set(std::move(s))
    {
        geom = allFaceGeometry(mesh);
        bvh = buildBvh(mesh, geom);
        bct = buildBlockClusterTree(bvh, chi);
        stack = std::make_unique<FractionalStack>(mesh, geom, bct, 6.0);
        posRows = positionalRowsScalar(set, mesh);
        GmresOptions opts;
        opts.tol = tol;
        solver = std::make_unique<HsSolver>(mesh, *stack, posRows, opts);
    }
};

ConstraintSet baryAreaSet(const TriMesh& mesh)
{
    ConstraintSet set;
    set.items.push_back({Constraint::Kind::Barycenter});
    Constraint area;
    area.kind = Constraint::Kind::TotalArea;
    set.items.push_back(area);
    ConstraintSet out = set;
    out.captureTargets(mesh);
    return out;
}

} // namespace

TEST_CASE("constraint values on the unit cube")
{
    TriMesh cube = makeCube(1.0);

    ConstraintSet set;
    Constraint area;
    area.kind = Constraint::Kind::TotalArea;
    area.targetScalar = 6.0;
    Constraint vol;
    vol.kind = Constraint::Kind::TotalVolume;
    vol.targetScalar = 1.0;
    set.items = {area, vol};
    Eigen::VectorXd values = constraintValues(set, cube);
    CHECK(values.lpNorm<Eigen::Infinity>() < 1e-12);

    // Translated cube: barycenter residual equals the translation.
    ConstraintSet bset;
    Constraint bary;
    bary.kind = Constraint::Kind::Barycenter;
    bset.items = {bary};
    bset.captureTargets(cube);
    Vec3 t(0.3, -0.2, 1.7);
    transformMesh(cube, Mat3::Identity(), t);
    Eigen::VectorXd r = constraintValues(bset, cube);
    CHECK((r - t).norm() < 1e-12);

    // Pin at its target has zero residual.
    ConstraintSet pset;
    Constraint pin;
    pin.kind = Constraint::Kind::Pin;
    pin.vertex = 2;
    pset.items = {pin};
    pset.captureTargets(cube);
    CHECK(constraintValues(pset, cube).norm() == 0.0);
}

TEST_CASE("constraint jacobians pass oracle checks")
{
    TriMesh m = makeBumpySphere(1.0, 1, 0.15); // 42 vertices

    SUBCASE("area row matches finite differences")
    {
        ConstraintSet set;
        Constraint area;
        area.kind = Constraint::Kind::TotalArea;
        set.items = {area};
        set.captureTargets(m);
        SparseMat J = constraintJacobian(set, m);
        double step = 1e-6 * bboxDiagonal(m);
        for (int d = 0; d < 3 * m.numVertices(); ++d) {
            TriMesh mp = m, mm = m;
            mp.positions[d / 3][d % 3] += step;
            mm.positions[d / 3][d % 3] -= step;
            double ap, am, dummy;
            totals(mp, ap, dummy);
            totals(mm, am, dummy);
            double fd = (ap - am) / (2 * step);
            CHECK(J.coeff(0, d) == doctest::Approx(fd).epsilon(1e-5));
        }
    }

    SUBCASE("volume row points along outward vertex normals on a sphere")
    {
        TriMesh sphere = makeIcosphere(1.0, 2);
        ConstraintSet set;
        Constraint vol;
        vol.kind = Constraint::Kind::TotalVolume;
        set.items = {vol};
        set.captureTargets(sphere);
        SparseMat J = constraintJacobian(set, sphere);
        for (int v = 0; v < sphere.numVertices(); ++v) {
            Vec3 row(J.coeff(0, 3 * v), J.coeff(0, 3 * v + 1), J.coeff(0, 3 * v + 2));
            // Outward direction is the position itself on a centered sphere.
            CHECK(row.normalized().dot(sphere.positions[v].normalized()) > 0.99);
        }
    }

    SUBCASE("barycenter rows applied to a uniform translation")
    {
        ConstraintSet set;
        set.items.push_back({Constraint::Kind::Barycenter});
        SparseMat J = constraintJacobian(set, m);
        Vec3 t(1.0, -2.0, 0.5);
        Eigen::VectorXd tv(3 * m.numVertices());
        for (int v = 0; v < m.numVertices(); ++v) tv.segment<3>(3 * v) = t;
        Eigen::VectorXd out = J * tv;
        CHECK((out / m.numVertices() - t).norm() < 1e-12);
    }
}

TEST_CASE("schur cache: counts, dense agreement")
{
    TriMesh m = makeIcosphere(1.0, 1);
    ConstraintSet set = baryAreaSet(m);
    FlowSetup fs(m, set);

    SUBCASE("k = 0 produces an empty cache with no solves")
    {
        ConstraintSet baryOnly;
        baryOnly.items.push_back({Constraint::Kind::Barycenter});
        SchurCache cache = schurBuild(*fs.solver, baryOnly, fs.mesh);
        CHECK(cache.rows() == 0);
        CHECK(cache.solveCount == 0);
    }

    SUBCASE("exactly k solves and (M/A) matches the dense computation")
    {
        SchurCache cache = schurBuild(*fs.solver, fs.set, fs.mesh);
        CHECK(cache.rows() == 1);
        CHECK(cache.solveCount == 1);

        // Dense (M/A) via the full saddle with positional rows.
        const int nV = fs.mesh.numVertices();
        Eigen::MatrixXd A3 = interleave3(denseA(fs.mesh, fs.geom, 6.0));
        Eigen::MatrixXd rowsDense(fs.posRows);
        const int mRows = static_cast<int>(fs.posRows.rows());
        Eigen::MatrixXd Jpos = Eigen::MatrixXd::Zero(3 * mRows, 3 * nV);
        for (int q = 0; q < mRows; ++q) {
            for (int i = 0; i < nV; ++i) {
                for (int c = 0; c < 3; ++c) Jpos(3 * q + c, 3 * i + c) = rowsDense(q, i);
            }
        }
        Eigen::MatrixXd Js(schurJacobian(fs.set, fs.mesh));
        Eigen::VectorXd wDense =
            denseSaddleSolve(A3, Jpos, Js.row(0).transpose(), Eigen::VectorXd::Zero(3 * mRows));
        double maDense = -Js.row(0).dot(wDense);
        CHECK(cache.MA(0, 0) == doctest::Approx(maDense).epsilon(1e-8));
    }
}

TEST_CASE("project_direction is tangent and matches the dense saddle")
{
    TriMesh m = makeBumpySphere(1.0, 1, 0.1);
    ConstraintSet set = baryAreaSet(m);
    FlowSetup fs(m, set);
    const int nV = fs.mesh.numVertices();

    SchurCache cache = schurBuild(*fs.solver, fs.set, fs.mesh);
    Eigen::VectorXd g = randomVector(3 * nV, 21);
    Eigen::VectorXd x = projectDirection(cache, *fs.solver, fs.set, fs.mesh, g);

    // Tangency against the full constraint Jacobian.
    SparseMat J = constraintJacobian(fs.set, fs.mesh);
    CHECK((J * x).norm() <= 1e-8 * Eigen::MatrixXd(J).norm() * x.norm());

    // Dense oracle: full saddle with positional + Schur rows.
    Eigen::MatrixXd A3 = interleave3(denseA(fs.mesh, fs.geom, 6.0));
    Eigen::MatrixXd Jdense(J);
    Eigen::VectorXd xDense =
        denseSaddleSolve(A3, Jdense, g, Eigen::VectorXd::Zero(J.rows()));
    CHECK((x - xDense).norm() <= 1e-7 * xDense.norm());

    SUBCASE("no Schur constraints degenerates to the plain solve")
    {
        ConstraintSet baryOnly;
        baryOnly.items.push_back({Constraint::Kind::Barycenter});
        SchurCache empty = schurBuild(*fs.solver, baryOnly, fs.mesh);
        Eigen::VectorXd x0 = projectDirection(empty, *fs.solver, baryOnly, fs.mesh, g);
        Eigen::VectorXd y = fs.solver->solve(g);
        cleanPositional(baryOnly, fs.mesh, y);
        CHECK((x0 - y).norm() <= 1e-12 * y.norm());
    }
}

TEST_CASE("corrective step: Newton contraction on an inflated cube")
{
    TriMesh cube = makeCube(1.0);
    ConstraintSet set;
    set.items.push_back({Constraint::Kind::Barycenter});
    Constraint vol;
    vol.kind = Constraint::Kind::TotalVolume;
    vol.targetScalar = 1.0;
    set.items.push_back(vol);

    // Inflate by 1% about the barycenter.
    Vec3 center(0.5, 0.5, 0.5);
    TriMesh inflated = cube;
    for (auto& p : inflated.positions) p = center + 1.01 * (p - center);
    set.items[0].targetPoint = center;

    FlowSetup fs(inflated, set);
    SchurCache cache = schurBuild(*fs.solver, fs.set, fs.mesh);

    Eigen::VectorXd residual = schurResiduals(fs.set, fs.mesh);
    double before = residual.lpNorm<Eigen::Infinity>();
    CHECK(before > 1e-3);

    SUBCASE("zero residual gives a zero step")
    {
        Eigen::VectorXd h = correctiveStep(cache, Eigen::VectorXd::Zero(1));
        CHECK(h.norm() == 0.0);
    }

    SUBCASE("the defining equation holds and one step contracts 10x")
    {
        Eigen::VectorXd h = correctiveStep(cache, residual);
        Eigen::VectorXd Jh = cache.J * h;
        CHECK((Jh + residual).norm() <= 1e-6 * residual.norm());

        TriMesh corrected = fs.mesh;
        for (int v = 0; v < corrected.numVertices(); ++v) {
            corrected.positions[v] += h.segment<3>(3 * v);
        }
        double after = schurResiduals(fs.set, corrected).lpNorm<Eigen::Infinity>();
        CHECK(after <= before / 10.0);
    }
}

TEST_CASE("positional rows and Schur handling agree on a pin")
{
    // The same pin enforced (a) through the operator rows and (b) through an
    // explicit dense saddle including the pin as generic rows.
    TriMesh m = makeIcosphere(1.0, 1);
    ConstraintSet pinSet;
    Constraint pin;
    pin.kind = Constraint::Kind::Pin;
    pin.vertex = 7;
    pinSet.items = {pin};
    pinSet.captureTargets(m);

    FlowSetup fs(m, pinSet);
    SchurCache cache = schurBuild(*fs.solver, pinSet, m); // k = 0, pin is positional
    Eigen::VectorXd g = randomVector(3 * m.numVertices(), 55);
    Eigen::VectorXd x = projectDirection(cache, *fs.solver, pinSet, m, g);

    Eigen::MatrixXd A3 = interleave3(denseA(m, allFaceGeometry(m), 6.0));
    Eigen::MatrixXd J(constraintJacobian(pinSet, m));
    Eigen::VectorXd xDense = denseSaddleSolve(A3, J, g, Eigen::VectorXd::Zero(3));
    CHECK((x - xDense).norm() <= 1e-6 * xDense.norm());
    CHECK(x.segment<3>(3 * pin.vertex).norm() == 0.0);
}
