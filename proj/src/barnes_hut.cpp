#include "repulsor/barnes_hut.hpp"

#include <cmath>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace repulsor {

void BhParams::validate() const
{
    if (theta < 0) throw std::invalid_argument("theta must be >= 0");
}

double bhEnergy(const TriMesh& mesh, const Bvh& bvh, const EnergyParams& params,
                const BhParams& bh, bool deterministic)
{
    params.validate();
    bh.validate();
    const int nF = mesh.numFaces();
    double total = 0;
    bool coincident = false;

    auto faceRow = [&](int S, std::vector<FrontEntry>& front, bool& bad) {
        bhFront(bvh, S, bh.theta, front);
        const Vec3& X = bvh.faceCenter[S];
        const Mat3& P = bvh.faceProjector[S];
        double aS = bvh.faceArea[S];
        double row = 0;
        for (const FrontEntry& e : front) {
            const BvhNode& node = bvh.nodes[e.node];
            if (!e.exact) {
                Vec3 d = X - node.centroid;
                double dist = d.norm();
                row += std::pow((P * d).norm(), params.p) / std::pow(dist, 2.0 * params.p) * aS *
                       node.area;
            } else {
                for (int pos = node.begin; pos < node.end; ++pos) {
                    int T = bvh.faceIds[pos];
                    if (T == S) continue;
                    Vec3 d = X - bvh.faceCenter[T];
                    double dist = d.norm();
                    if (dist < 1e-14) {
                        bad = true;
                        continue;
                    }
                    row += std::pow((P * d).norm(), params.p) / std::pow(dist, 2.0 * params.p) *
                           aS * bvh.faceArea[T];
                }
            }
        }
        return row;
    };

#ifdef _OPENMP
    if (!deterministic) {
#pragma omp parallel reduction(+ : total) reduction(|| : coincident)
        {
            std::vector<FrontEntry> front;
#pragma omp for schedule(dynamic, 16)
            for (int S = 0; S < nF; ++S) total += faceRow(S, front, coincident);
        }
    } else
#endif
    {
        std::vector<FrontEntry> front;
        for (int S = 0; S < nF; ++S) total += faceRow(S, front, coincident);
    }
    if (coincident) {
        throw std::runtime_error("coincident face barycenters; mesh is invalid for a repulsive flow");
    }
    return total;
}

Eigen::VectorXd bhDifferential(const TriMesh& mesh, const std::vector<FaceGeometry>& geom,
                               const Bvh& bvh, const EnergyParams& params, const BhParams& bh,
                               bool deterministic)
{
    params.validate();
    bh.validate();
    const int nF = mesh.numFaces();
    const int n3 = 3 * mesh.numVertices();
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(n3);
    bool coincident = false;

    auto faceContribution = [&](int S, std::vector<FrontEntry>& front, Eigen::VectorXd& acc) {
        bhFront(bvh, S, bh.theta, front);
        const Vec3& X = bvh.faceCenter[S];
        const Mat3& P = bvh.faceProjector[S];
        auto addPair = [&](const Vec3& Y, const Mat3& Q, double aOther) {
            if ((X - Y).norm() < 1e-14) {
                coincident = true;
                return;
            }
            // Forward: this face owns slot 1 of K(X,P;Y).
            TpKernelDerivatives fwd = tpKernelDerivatives(X, P, Y, params.p);
            accumulateSlot1Gradient(mesh, geom, S, fwd, aOther, acc);
            // Reverse: this face owns slot 2 of K(Y,Q;X).
            TpKernelDerivatives rev = tpKernelDerivatives(Y, Q, X, params.p);
            accumulateSlot2Gradient(mesh, geom, S, rev, aOther, acc);
        };
        for (const FrontEntry& e : front) {
            const BvhNode& node = bvh.nodes[e.node];
            if (!e.exact) {
                addPair(node.centroid, node.projector, node.area);
            } else {
                for (int pos = node.begin; pos < node.end; ++pos) {
                    int T = bvh.faceIds[pos];
                    if (T == S) continue;
                    addPair(bvh.faceCenter[T], bvh.faceProjector[T], bvh.faceArea[T]);
                }
            }
        }
    };

#ifdef _OPENMP
    if (!deterministic) {
        int nThreads = omp_get_max_threads();
        std::vector<Eigen::VectorXd> partial(nThreads, Eigen::VectorXd::Zero(n3));
#pragma omp parallel
        {
            std::vector<FrontEntry> front;
#pragma omp for schedule(dynamic, 16)
            for (int S = 0; S < nF; ++S) {
                faceContribution(S, front, partial[omp_get_thread_num()]);
            }
        }
        for (const auto& p : partial) grad += p;
        if (coincident) {
            throw std::runtime_error(
                "coincident face barycenters; mesh is invalid for a repulsive flow");
        }
        return grad;
    }
#endif
    std::vector<FrontEntry> front;
    for (int S = 0; S < nF; ++S) faceContribution(S, front, grad);
    if (coincident) {
        throw std::runtime_error("coincident face barycenters; mesh is invalid for a repulsive flow");
    }
    return grad;
}

} // namespace repulsor
