#include "repulsor/precond.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace repulsor {

Eigen::VectorXd gmres(const LinearOp& A, const Eigen::VectorXd& b, const LinearOp& M,
                      const GmresOptions& opts, SolveReport& report)
{
    auto t0 = std::chrono::steady_clock::now();
    const int n = static_cast<int>(b.size());
    const int restart = std::min(opts.restart, n);
    double bnorm = b.norm();
    report = {};

    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    if (bnorm == 0) return x;

    Eigen::VectorXd r = b;
    double innerTol = opts.tol * M(b).norm();

    Eigen::MatrixXd V(n, restart + 1);
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(restart + 1, restart);
    Eigen::VectorXd cs(restart), sn(restart), g(restart + 1);

    while (true) {
        Eigen::VectorXd z = M(r);
        double beta = z.norm();
        if (beta == 0) break;
        V.col(0) = z / beta;
        g.setZero();
        g[0] = beta;

        int j = 0;
        for (; j < restart; ++j) {
            Eigen::VectorXd w = M(A(V.col(j)));
            // Modified Gram-Schmidt.
            for (int i = 0; i <= j; ++i) {
                H(i, j) = V.col(i).dot(w);
                w -= H(i, j) * V.col(i);
            }
            H(j + 1, j) = w.norm();
            bool breakdown = H(j + 1, j) < 1e-300;
            if (!breakdown) V.col(j + 1) = w / H(j + 1, j);

            for (int i = 0; i < j; ++i) {
                double t = cs[i] * H(i, j) + sn[i] * H(i + 1, j);
                H(i + 1, j) = -sn[i] * H(i, j) + cs[i] * H(i + 1, j);
                H(i, j) = t;
            }
            double denom = std::hypot(H(j, j), H(j + 1, j));
            cs[j] = H(j, j) / denom;
            sn[j] = H(j + 1, j) / denom;
            H(j, j) = denom;
            H(j + 1, j) = 0;
            g[j + 1] = -sn[j] * g[j];
            g[j] = cs[j] * g[j];

            ++report.iterations;
            if (breakdown || std::abs(g[j + 1]) <= innerTol ||
                report.iterations >= opts.maxIterations) {
                ++j;
                break;
            }
        }

        // Back-substitute and update the iterate.
        Eigen::VectorXd y(j);
        for (int i = j - 1; i >= 0; --i) {
            double s = g[i];
            for (int k = i + 1; k < j; ++k) s -= H(i, k) * y[k];
            y[i] = s / H(i, i);
        }
        x += V.leftCols(j) * y;

        r = b - A(x);
        report.relResidual = r.norm() / bnorm;
        if (report.relResidual <= opts.tol) break;
        if (report.iterations >= opts.maxIterations) {
            report.seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            throw SolveFailure("GMRES hit the iteration cap at relative residual " +
                                   std::to_string(report.relResidual),
                               x, report);
        }
        // The inner estimate was optimistic; tighten it and restart.
        innerTol *= 0.1;
    }

    r = b - A(x);
    report.relResidual = bnorm > 0 ? r.norm() / bnorm : 0;
    report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return x;
}

void checkPositionalRows(const TriMesh& mesh, const SparseMat& rows)
{
    if (rows.rows() == 0) {
        throw std::runtime_error(
            "the cotan system is singular without positional rows; add a barycenter or pin "
            "constraint to every component");
    }
    std::vector<bool> touched(mesh.numComponents, false);
    for (int k = 0; k < rows.outerSize(); ++k) {
        for (SparseMat::InnerIterator it(rows, k); it; ++it) {
            if (it.value() != 0) touched[mesh.componentOf[it.col()]] = true;
        }
    }
    for (int c = 0; c < mesh.numComponents; ++c) {
        if (!touched[c]) {
            throw std::runtime_error("component " + std::to_string(c) +
                                     " has no barycenter or pin row; the augmented Laplacian "
                                     "would be singular");
        }
    }
}

PoissonSolver::PoissonSolver(const TriMesh& mesh, const SparseMat& stiffness, const SparseMat& rows)
    : nV_(static_cast<int>(stiffness.rows())), m_(static_cast<int>(rows.rows()))
{
    checkPositionalRows(mesh, rows);

    std::vector<Triplet> trips;
    trips.reserve(stiffness.nonZeros() + 2 * rows.nonZeros());
    for (int k = 0; k < stiffness.outerSize(); ++k) {
        for (SparseMat::InnerIterator it(stiffness, k); it; ++it) {
            trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
        }
    }
    for (int k = 0; k < rows.outerSize(); ++k) {
        for (SparseMat::InnerIterator it(rows, k); it; ++it) {
            trips.emplace_back(nV_ + static_cast<int>(it.row()), static_cast<int>(it.col()),
                               it.value());
            trips.emplace_back(static_cast<int>(it.col()), nV_ + static_cast<int>(it.row()),
                               it.value());
        }
    }
    SparseMat aug(nV_ + m_, nV_ + m_);
    aug.setFromTriplets(trips.begin(), trips.end());
    lu_.compute(aug);
    if (lu_.info() != Eigen::Success) {
        throw std::runtime_error("augmented Laplacian factorization failed (singular system)");
    }
}

void PoissonSolver::solve(const Eigen::VectorXd& rhsVertex, const Eigen::VectorXd& rhsRows,
                          Eigen::VectorXd& vertexPart, Eigen::VectorXd& multiplier) const
{
    Eigen::VectorXd rhs(nV_ + m_);
    rhs.head(nV_) = rhsVertex;
    rhs.tail(m_) = rhsRows;
    Eigen::VectorXd sol = lu_.solve(rhs);
    vertexPart = sol.head(nV_);
    multiplier = sol.tail(m_);
}

Preconditioner::Preconditioner(const TriMesh& mesh, const FractionalStack& stack,
                               const SparseMat& posRows, double chi)
    : nV_(stack.numVertices()), m_(static_cast<int>(posRows.rows()))
{
    SparseMat stiffness, mass;
    buildLaplacian(mesh, stiffness, mass);
    poisson_ = std::make_shared<PoissonSolver>(mesh, stiffness, posRows);

    dualAreas_ = vertexDualAreas(mesh);
    vertexBvh_ = buildPointBvh(mesh.positions, dualAreas_);
    vertexBct_ = buildBlockClusterTree(vertexBvh_, chi);
    KernelSpec pre{KernelKind::Laplace, 2.0 - stack.orderS()};
    Hpre_ = buildKernelMatrix(vertexBct_, pre);
    diagPre_ = Hpre_.apply(dualAreas_).cwiseQuotient(dualAreas_);

    // Calibrate the multiplier-slot scale to the bulk of the preconditioned
    // vertex spectrum so the constraint rows do not become spectral
    // outliers. One Rayleigh quotient of the sandwich composed with A.
    Eigen::VectorXd u(nV_);
    unsigned state = 12345u;
    for (int i = 0; i < nV_; ++i) {
        state = state * 1664525u + 1013904223u;
        u[i] = (state >> 8) * (1.0 / (1u << 24)) - 0.5;
    }
    u.array() -= u.mean();
    Eigen::VectorXd Au = stack.applyA(u);
    Eigen::VectorXd w, mu, z, nu;
    poisson_->solve(Au, Eigen::VectorXd::Zero(m_), w, mu);
    poisson_->solve(applyForwardFractional(w), mu, z, nu);
    double quotient = u.dot(z) / u.dot(u);
    lambdaScale_ = (quotient > 0 && std::isfinite(quotient)) ? quotient : 1.0;
}

Eigen::VectorXd Preconditioner::applyForwardFractional(const Eigen::VectorXd& v) const
{
    // 2 diag(a) [diag(diag(a)^-1 H a) - H] diag(a) v over vertex pairs.
    Eigen::VectorXd w = dualAreas_.cwiseProduct(v);
    Eigen::VectorXd y = diagPre_.cwiseProduct(w) - Hpre_.apply(w);
    return 2.0 * dualAreas_.cwiseProduct(y);
}

Eigen::VectorXd Preconditioner::apply(const Eigen::VectorXd& r) const
{
    if (r.size() != 3 * (nV_ + m_)) {
        throw std::invalid_argument("preconditioner: residual size mismatch");
    }
    Eigen::VectorXd out(r.size());
    Eigen::VectorXd rv(nV_), rc(m_), w, mu, z, nu;
    for (int c = 0; c < 3; ++c) {
        for (int i = 0; i < nV_; ++i) rv[i] = r[3 * i + c];
        for (int q = 0; q < m_; ++q) rc[q] = r[3 * nV_ + 3 * q + c];
        poisson_->solve(rv, rc, w, mu);
        Eigen::VectorXd wt = applyForwardFractional(w);
        poisson_->solve(wt, lambdaScale_ * mu, z, nu);
        for (int i = 0; i < nV_; ++i) out[3 * i + c] = z[i];
        // Scaled identity on the multiplier slot keeps the map symmetric
        // positive definite (the plain sandwich is singular there).
        for (int q = 0; q < m_; ++q) out[3 * nV_ + 3 * q + c] = nu[q] + lambdaScale_ * rc[q];
    }
    return out;
}

MetricKind metricKindFromString(const std::string& name)
{
    if (name == "hs") return MetricKind::Hs;
    if (name == "l2") return MetricKind::L2;
    if (name == "h1") return MetricKind::H1;
    if (name == "h2") return MetricKind::H2;
    throw std::invalid_argument("unknown metric '" + name + "' (expected hs|l2|h1|h2)");
}

std::string metricKindName(MetricKind kind)
{
    switch (kind) {
    case MetricKind::Hs: return "hs";
    case MetricKind::L2: return "l2";
    case MetricKind::H1: return "h1";
    case MetricKind::H2: return "h2";
    }
    return "?";
}

HsSolver::HsSolver(const TriMesh& mesh, const FractionalStack& stack, const SparseMat& posRows,
                   GmresOptions opts, bool usePreconditioner, double chi)
    : mesh_(&mesh), stack_(&stack), posRows_(posRows), opts_(opts),
      usePreconditioner_(usePreconditioner), nV_(stack.numVertices()),
      m_(static_cast<int>(posRows.rows()))
{
    checkPositionalRows(mesh, posRows);
    if (usePreconditioner_) {
        precond_ = std::make_shared<Preconditioner>(mesh, stack, posRows, chi);
    }
}

void HsSolver::setExtraTerm(const SparseMat& extra, double weight)
{
    extra_ = extra;
    extraWeight_ = weight;
}

Eigen::VectorXd HsSolver::applyOperator(const Eigen::VectorXd& z) const
{
    Eigen::MatrixXd X(nV_, 3);
    for (int i = 0; i < nV_; ++i) {
        for (int c = 0; c < 3; ++c) X(i, c) = z[3 * i + c];
    }
    Eigen::MatrixXd Y = stack_->applyA3(X);
    if (extraWeight_ != 0) {
        Y += extraWeight_ * (extra_ * X);
    }

    Eigen::VectorXd out(z.size());
    // Vertex block: A3 x + J^T lambda.
    Eigen::MatrixXd lambda(m_, 3);
    for (int q = 0; q < m_; ++q) {
        for (int c = 0; c < 3; ++c) lambda(q, c) = z[3 * nV_ + 3 * q + c];
    }
    Eigen::MatrixXd JtLambda = posRows_.transpose() * lambda;
    Eigen::MatrixXd Jx = posRows_ * X;
    for (int i = 0; i < nV_; ++i) {
        for (int c = 0; c < 3; ++c) out[3 * i + c] = Y(i, c) + JtLambda(i, c);
    }
    for (int q = 0; q < m_; ++q) {
        for (int c = 0; c < 3; ++c) out[3 * nV_ + 3 * q + c] = Jx(q, c);
    }
    return out;
}

Eigen::VectorXd HsSolver::solve(const Eigen::VectorXd& b, SolveReport* report) const
{
    if (b.size() != 3 * nV_) throw std::invalid_argument("solve: rhs must have size 3|V|");
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(3 * (nV_ + m_));
    rhs.head(3 * nV_) = b;

    LinearOp A = [this](const Eigen::VectorXd& v) { return applyOperator(v); };
    LinearOp M;
    if (usePreconditioner_) {
        M = [this](const Eigen::VectorXd& v) { return precond_->apply(v); };
    } else {
        M = [](const Eigen::VectorXd& v) { return v; };
    }

    SolveReport local;
    Eigen::VectorXd sol = gmres(A, rhs, M, opts_, local);
    if (report) *report = local;
    return sol.head(3 * nV_);
}

SparseMetricSolver::SparseMetricSolver(const TriMesh& mesh, MetricKind kind,
                                       const SparseMat& posRows, const SparseMat& extra,
                                       double extraWeight)
    : nV_(mesh.numVertices()), m_(static_cast<int>(posRows.rows()))
{
    checkPositionalRows(mesh, posRows);
    SparseMat stiffness, mass;
    buildLaplacian(mesh, stiffness, mass);

    SparseMat op;
    switch (kind) {
    case MetricKind::L2: op = mass; break;
    case MetricKind::H1: op = stiffness; break;
    case MetricKind::H2: {
        Eigen::VectorXd invMass = mass.diagonal().cwiseInverse();
        op = stiffness * invMass.asDiagonal() * stiffness;
        break;
    }
    case MetricKind::Hs:
        throw std::invalid_argument("use HsSolver for the fractional metric");
    }
    if (extraWeight != 0 && extra.rows() == nV_) {
        op = op + SparseMat(extraWeight * extra);
    }

    std::vector<Triplet> trips;
    for (int k = 0; k < op.outerSize(); ++k) {
        for (SparseMat::InnerIterator it(op, k); it; ++it) {
            trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
        }
    }
    for (int k = 0; k < posRows.outerSize(); ++k) {
        for (SparseMat::InnerIterator it(posRows, k); it; ++it) {
            trips.emplace_back(nV_ + static_cast<int>(it.row()), static_cast<int>(it.col()),
                               it.value());
            trips.emplace_back(static_cast<int>(it.col()), nV_ + static_cast<int>(it.row()),
                               it.value());
        }
    }
    SparseMat aug(nV_ + m_, nV_ + m_);
    aug.setFromTriplets(trips.begin(), trips.end());
    lu_.compute(aug);
    if (lu_.info() != Eigen::Success) {
        throw std::runtime_error("metric factorization failed (singular system)");
    }
}

Eigen::VectorXd SparseMetricSolver::solve(const Eigen::VectorXd& b, SolveReport* report) const
{
    if (b.size() != 3 * nV_) throw std::invalid_argument("solve: rhs must have size 3|V|");
    Eigen::VectorXd out(3 * nV_);
    for (int c = 0; c < 3; ++c) {
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nV_ + m_);
        for (int i = 0; i < nV_; ++i) rhs[i] = b[3 * i + c];
        Eigen::VectorXd sol = lu_.solve(rhs);
        for (int i = 0; i < nV_; ++i) out[3 * i + c] = sol[i];
    }
    if (report) {
        report->iterations = 1;
        report->relResidual = 0;
        report->seconds = 0;
    }
    return out;
}

} // namespace repulsor
