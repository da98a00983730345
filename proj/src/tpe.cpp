#include "repulsor/tpe.hpp"

#include <cmath>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace repulsor {

void EnergyParams::validate() const
{
    if (p <= 0) throw std::invalid_argument("energy exponent p must be positive");
    if (!subcritical && p <= 4.0) {
        throw std::invalid_argument("p <= 4 requires the subcritical flag");
    }
}

double tpKernel(const Vec3& X, const Mat3& P, const Vec3& Y, double p)
{
    Vec3 d = X - Y;
    double dist = d.norm();
    if (dist < 1e-14) {
        throw std::runtime_error("tangent-point kernel evaluated at coincident points");
    }
    double num = (P * d).norm();
    return std::pow(num, p) / std::pow(dist, 2.0 * p);
}

TpKernelDerivatives tpKernelDerivatives(const Vec3& X, const Mat3& P, const Vec3& Y, double p)
{
    Vec3 d = X - Y;
    double dist2 = d.squaredNorm();
    double dist = std::sqrt(dist2);
    if (dist < 1e-14) {
        throw std::runtime_error("tangent-point kernel evaluated at coincident points");
    }
    Vec3 u = P * d;
    double un = u.norm();
    double invDist2p = std::pow(dist, -2.0 * p);

    TpKernelDerivatives out;
    out.value = std::pow(un, p) * invDist2p;

    // alpha = p |u|^(p-2) / |d|^(2p); the u-direction terms vanish as |u|->0
    // for p > 1, so a zero guard there is the exact limit.
    double alpha = (un > 0) ? p * std::pow(un, p - 2.0) * invDist2p : 0.0;
    Vec3 Pu = P * u; // P symmetric
    out.dX = alpha * Pu - (2.0 * p * out.value / dist2) * d;
    out.dY = -out.dX;
    out.dP = alpha * u * d.transpose();
    return out;
}

void accumulateSlot1Gradient(const TriMesh& mesh, const std::vector<FaceGeometry>& geom, FaceId S,
                             const TpKernelDerivatives& kd, double weight,
                             Eigen::VectorXd& grad)
{
    const auto& tri = mesh.faces[S];
    const FaceGeometry& g = geom[S];
    double area = g.area;
    const Vec3& N = g.normal;

    // Chain through the projector: dK/dN = (dP + dP^T) N, then through the
    // unnormalized cross product e with N = e/|e|, |e| = 2a.
    Vec3 dK_dN = (kd.dP + kd.dP.transpose()) * N;
    Vec3 dK_de = (dK_dN - N * (N.dot(dK_dN))) / (2.0 * area);

    for (int t = 0; t < 3; ++t) {
        int i = tri[t];
        const Vec3& xj = mesh.positions[tri[(t + 1) % 3]];
        const Vec3& xk = mesh.positions[tri[(t + 2) % 3]];
        Vec3 eOpp = xj - xk;
        Vec3 areaGrad = 0.5 * eOpp.cross(N);
        Vec3 v = weight * (area * (kd.dX / 3.0 + eOpp.cross(dK_de)) + kd.value * areaGrad);
        grad.segment<3>(3 * i) += v;
    }
}

void accumulateSlot2Gradient(const TriMesh& mesh, const std::vector<FaceGeometry>& geom, FaceId S,
                             const TpKernelDerivatives& kd, double weight,
                             Eigen::VectorXd& grad)
{
    const auto& tri = mesh.faces[S];
    const FaceGeometry& g = geom[S];
    double area = g.area;
    const Vec3& N = g.normal;

    for (int t = 0; t < 3; ++t) {
        int i = tri[t];
        const Vec3& xj = mesh.positions[tri[(t + 1) % 3]];
        const Vec3& xk = mesh.positions[tri[(t + 2) % 3]];
        Vec3 areaGrad = 0.5 * (xj - xk).cross(N);
        Vec3 v = weight * (area * kd.dY / 3.0 + kd.value * areaGrad);
        grad.segment<3>(3 * i) += v;
    }
}

double tpeEnergyExact(const TriMesh& mesh, const std::vector<FaceGeometry>& geom,
                      const EnergyParams& params, bool deterministic)
{
    params.validate();
    const int nF = mesh.numFaces();
    double total = 0;
    bool coincident = false; // exceptions must not escape the parallel region

#ifdef _OPENMP
#pragma omp parallel for schedule(static) reduction(+ : total) reduction(|| : coincident) \
    if (!deterministic)
#endif
    for (int S = 0; S < nF; ++S) {
        double row = 0;
        const Vec3& X = geom[S].barycenter;
        const Mat3& P = geom[S].projector;
        double aS = geom[S].area;
        for (int T = 0; T < nF; ++T) {
            if (T == S) continue;
            Vec3 d = X - geom[T].barycenter;
            double dist = d.norm();
            if (dist < 1e-14) {
                coincident = true;
                continue;
            }
            row += std::pow((P * d).norm(), params.p) / std::pow(dist, 2.0 * params.p) * aS *
                   geom[T].area;
        }
        total += row;
    }
    if (coincident) {
        throw std::runtime_error("coincident face barycenters; mesh is invalid for a repulsive flow");
    }
    return total;
}

Eigen::VectorXd tpeDifferentialExact(const TriMesh& mesh, const std::vector<FaceGeometry>& geom,
                                     const EnergyParams& params, bool deterministic)
{
    params.validate();
    const int nF = mesh.numFaces();
    const int n3 = 3 * mesh.numVertices();
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(n3);

    bool coincident = false;
    auto rowContribution = [&](int S, Eigen::VectorXd& acc) {
        const Vec3& X = geom[S].barycenter;
        const Mat3& P = geom[S].projector;
        for (int T = 0; T < nF; ++T) {
            if (T == S) continue;
            if ((X - geom[T].barycenter).norm() < 1e-14) {
                coincident = true;
                continue;
            }
            TpKernelDerivatives kd = tpKernelDerivatives(X, P, geom[T].barycenter, params.p);
            accumulateSlot1Gradient(mesh, geom, S, kd, geom[T].area, acc);
            accumulateSlot2Gradient(mesh, geom, T, kd, geom[S].area, acc);
        }
    };

#ifdef _OPENMP
    if (!deterministic) {
        int nThreads = omp_get_max_threads();
        std::vector<Eigen::VectorXd> partial(nThreads, Eigen::VectorXd::Zero(n3));
#pragma omp parallel for schedule(static)
        for (int S = 0; S < nF; ++S) {
            rowContribution(S, partial[omp_get_thread_num()]);
        }
        for (const auto& p : partial) grad += p;
        if (coincident) {
            throw std::runtime_error("coincident face barycenters; mesh is invalid for a repulsive flow");
        }
        return grad;
    }
#endif
    for (int S = 0; S < nF; ++S) rowContribution(S, grad);
    if (coincident) {
        throw std::runtime_error("coincident face barycenters; mesh is invalid for a repulsive flow");
    }
    return grad;
}

double sphereTangentPointEnergy(double radius, double p)
{
    double area = 4.0 * M_PI * radius * radius;
    return area * area * std::pow(2.0 * radius, -p);
}

double torusTangentPointEnergyQuadrature(double R, double r, double p, int nPhi, int nTheta)
{
    // Midpoint rule on the smooth parameterization with exact normals.
    const int n = nPhi * nTheta;
    std::vector<Vec3> pts(n), normals(n);
    std::vector<double> dA(n);
    double dPhi = 2.0 * M_PI / nPhi;
    double dTheta = 2.0 * M_PI / nTheta;
    for (int i = 0; i < nPhi; ++i) {
        double phi = (i + 0.5) * dPhi;
        for (int j = 0; j < nTheta; ++j) {
            double theta = (j + 0.5) * dTheta;
            int idx = i * nTheta + j;
            double w = R + r * std::cos(theta);
            pts[idx] = Vec3(w * std::cos(phi), w * std::sin(phi), r * std::sin(theta));
            normals[idx] = Vec3(std::cos(theta) * std::cos(phi), std::cos(theta) * std::sin(phi),
                                std::sin(theta));
            dA[idx] = r * w * dPhi * dTheta;
        }
    }

    double total = 0;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) reduction(+ : total)
#endif
    for (int a = 0; a < n; ++a) {
        double row = 0;
        for (int b = 0; b < n; ++b) {
            if (b == a) continue; // the smooth kernel is bounded on the diagonal
            Vec3 d = pts[a] - pts[b];
            double dist2 = d.squaredNorm();
            double num = std::abs(normals[a].dot(d));
            row += std::pow(num, p) / std::pow(dist2, p) * dA[a] * dA[b];
        }
        total += row;
    }
    return total;
}

double torusTangentPointEnergyReference(double R, double r, double p, int nTheta)
{
    double coarse = torusTangentPointEnergyQuadrature(R, r, p, 3 * nTheta, nTheta);
    double fine = torusTangentPointEnergyQuadrature(R, r, p, 6 * nTheta, 2 * nTheta);
    return (4.0 * fine - coarse) / 3.0;
}

} // namespace repulsor
