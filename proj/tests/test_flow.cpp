#include "doctest.h"

#include "repulsor/flow.hpp"
#include "repulsor/shapes.hpp"

using namespace repulsor;

namespace {

FlowOptions fastOptions()
{
    FlowOptions opts;
    opts.solve.tol = 1e-6;
    opts.deterministic = false;
    return opts;
}

ConstraintSet baryArea(const TriMesh& mesh)
{
    ConstraintSet set;
    set.items.push_back({Constraint::Kind::Barycenter});
    Constraint area;
    area.kind = Constraint::Kind::TotalArea;
    set.items.push_back(area);
    set.captureTargets(mesh);
    return set;
}

} // namespace

TEST_CASE("armijo search honors its contract")
{
    // 1-D quadratic stand-in: f(tau) = (tau - 1)^2, f0 = f(0) = 1, slope -2.
    auto objective = [](double tau) { return (tau - 1.0) * (tau - 1.0); };
    double tau = armijoSearch(objective, 1.0, -2.0, 4.0);
    CHECK(objective(tau) <= 1.0 + 1e-4 * tau * (-2.0));

    // Non-descent slope is rejected.
    CHECK_THROWS(armijoSearch(objective, 1.0, 0.5, 1.0));

    // A function that never satisfies the decrease exhausts the halvings.
    auto rising = [](double) { return 10.0; };
    CHECK_THROWS(armijoSearch(rising, 1.0, -1.0, 1.0));
}

TEST_CASE("constrained flow steps decrease the objective and hold constraints")
{
    TriMesh m = makeBumpySphere(1.0, 1, 0.25);
    ConstraintSet set = baryArea(m);
    FlowState flow(std::move(m), set, {}, fastOptions());

    double prev = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 8; ++i) {
        StepRecord rec = flow.step();
        if (rec.converged) break;
        CHECK(rec.objective <= prev * (1 + 1e-12));
        prev = rec.objective;
        CHECK(rec.residuals.lpNorm<Eigen::Infinity>() <= 1e-8);
        CHECK(rec.tau > 0);
    }
    CHECK(flow.history().size() >= 8);
}

TEST_CASE("a round sphere is near-critical under an area constraint")
{
    // The projected direction on the round sphere is tiny compared to the
    // bumpy configuration of the same resolution.
    auto directionNorm = [](TriMesh mesh) {
        ConstraintSet set = baryArea(mesh);
        FlowOptions opts = fastOptions();
        opts.remeshEnabled = false;
        FlowState flow(std::move(mesh), set, {}, opts);
        StepRecord rec = flow.step();
        return rec.directionNorm;
    };
    double bumpy = directionNorm(makeBumpySphere(1.0, 2, 0.25));
    double round = directionNorm(makeIcosphere(1.0, 2));
    CHECK(round <= 1e-3 * bumpy);
}

TEST_CASE("barycenter stays put without free motion, moves with it")
{
    TriMesh m = makeBumpySphere(1.0, 1, 0.2);
    ConstraintSet set = baryArea(m);
    Vec3 target = set.items[0].targetPoint;

    SUBCASE("pinned barycenter drift stays below 1e-8 per step")
    {
        FlowState flow(std::move(m), set, {}, fastOptions());
        for (int i = 0; i < 3; ++i) flow.step();
        ConstraintSet current = flow.constraints();
        Eigen::VectorXd residual = constraintValues(current, flow.mesh());
        CHECK(residual.segment<3>(0).norm() <= 1e-8);
        (void)target;
    }

    SUBCASE("free barycenter with an off-center obstacle lets the mesh drift")
    {
        ConstraintSet areaOnly;
        Constraint area;
        area.kind = Constraint::Kind::TotalArea;
        areaOnly.items.push_back(area);
        areaOnly.captureTargets(m);

        PenaltySet penalties;
        Penalty obs;
        obs.kind = Penalty::Kind::ImplicitObstacle;
        obs.field = makeSphereField(Vec3(2.5, 0, 0), 0.3);
        obs.exponent = 6;
        obs.weight = 0.5;
        penalties.items.push_back(obs);

        FlowOptions opts = fastOptions();
        opts.freeBarycenter = true;
        opts.remeshEnabled = false;
        Vec3 before = Vec3::Zero();
        for (const auto& p : m.positions) before += p;
        before /= m.numVertices();

        FlowState flow(std::move(m), areaOnly, penalties, opts);
        for (int i = 0; i < 3; ++i) flow.step();
        Vec3 after = Vec3::Zero();
        for (const auto& p : flow.mesh().positions) after += p;
        after /= flow.mesh().numVertices();
        // Repelled away from the obstacle on +x.
        CHECK(after.x() < before.x() - 1e-6);
    }
}

TEST_CASE("flow metrics: Hs progresses at least as well as H1 on a fine bumpy sphere")
{
    // Scaled-down study; the full three-resolution comparison runs in the
    // acceptance suite.
    auto decrease = [](MetricKind metric) {
        TriMesh m = makeBumpySphere(1.0, 2, 0.25);
        ConstraintSet set = baryArea(m);
        FlowOptions opts = fastOptions();
        opts.metric = metric;
        FlowState flow(std::move(m), set, {}, opts);
        double start = flow.history().empty() ? flow.objective() : 0;
        for (int i = 0; i < 5 && !flow.converged(); ++i) flow.step();
        double end = flow.history().back().objective;
        return (start - end) / start;
    };
    double hs = decrease(MetricKind::Hs);
    double h1 = decrease(MetricKind::H1);
    CHECK(hs > 0);
    CHECK(h1 > 0);
    CHECK(hs >= 0.8 * h1);
}

TEST_CASE("pin constraints survive remeshing steps")
{
    TriMesh m = makeBumpySphere(1.0, 2, 0.2);
    ConstraintSet set;
    Constraint pin;
    pin.kind = Constraint::Kind::Pin;
    pin.vertex = 11;
    set.items.push_back(pin);
    set.captureTargets(m);
    Vec3 target = m.positions[11];

    FlowState flow(std::move(m), set, {}, fastOptions());
    for (int i = 0; i < 4 && !flow.converged(); ++i) flow.step();
    const ConstraintSet& current = flow.constraints();
    REQUIRE(current.items.size() == 1);
    int v = current.items[0].vertex;
    REQUIRE(v >= 0);
    CHECK((flow.mesh().positions[v] - target).norm() <= 1e-12);
}
