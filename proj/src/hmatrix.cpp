#include "repulsor/hmatrix.hpp"

#include <cmath>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace repulsor {

void KernelSpec::validate() const
{
    if (sigma <= 0 || sigma >= 2) {
        throw std::invalid_argument("kernel exponent sigma must lie in (0, 2)");
    }
}

namespace {

double k2Kernel(const Vec3& X, const Mat3& P, const Vec3& Y)
{
    Vec3 d = X - Y;
    double dist2 = d.squaredNorm();
    return (P * d).squaredNorm() / (dist2 * dist2);
}

} // namespace

double kernelValue(const KernelSpec& spec, const Vec3& X, const Mat3& P, const Vec3& Y,
                   const Mat3& Q)
{
    double dist = (X - Y).norm();
    if (dist < 1e-14) {
        throw std::runtime_error("kernel evaluated at coincident cluster centers");
    }
    double base = std::pow(dist, -(2.0 * spec.sigma + 2.0));
    switch (spec.kind) {
    case KernelKind::Laplace:
    case KernelKind::HighOrder:
        return base;
    case KernelKind::LowOrder:
        return 0.5 * (k2Kernel(X, P, Y) + k2Kernel(Y, Q, X)) * base;
    }
    return 0;
}

BlockClusterTree buildBlockClusterTree(const Bvh& bvh, double chi)
{
    if (chi < 0) throw std::invalid_argument("chi must be >= 0");
    BlockClusterTree bct;
    bct.bvh = &bvh;
    bct.chi = chi;

    std::vector<std::pair<int, int>> stack = {{0, 0}};
    while (!stack.empty()) {
        auto [i, j] = stack.back();
        stack.pop_back();
        const BvhNode& I = bvh.nodes[i];
        const BvhNode& J = bvh.nodes[j];
        double dist = distBoxBox(I.boxMin, I.boxMax, J.boxMin, J.boxMax);
        bool separated = chi > 0 && dist > 0 && std::max(I.radius, J.radius) <= chi * dist;
        if (separated) {
            bct.admissible.emplace_back(i, j);
            continue;
        }
        if (I.isLeaf() && J.isLeaf()) {
            bct.inadmissible.emplace_back(i, j);
            continue;
        }
        // Split whichever side still has children (both when possible).
        if (!I.isLeaf() && !J.isLeaf()) {
            stack.push_back({I.left, J.left});
            stack.push_back({I.left, J.right});
            stack.push_back({I.right, J.left});
            stack.push_back({I.right, J.right});
        } else if (!I.isLeaf()) {
            stack.push_back({I.left, j});
            stack.push_back({I.right, j});
        } else {
            stack.push_back({i, J.left});
            stack.push_back({i, J.right});
        }
    }
    return bct;
}

HKernelMatrix buildKernelMatrix(const BlockClusterTree& bct, const KernelSpec& spec)
{
    spec.validate();
    const Bvh& bvh = *bct.bvh;
    const int nF = bvh.numFaces();
    const int nC = static_cast<int>(bvh.nodes.size());

    HKernelMatrix H;
    H.bvh = &bvh;

    std::vector<Triplet> nearTrips;
    for (const auto& [i, j] : bct.inadmissible) {
        const BvhNode& I = bvh.nodes[i];
        const BvhNode& J = bvh.nodes[j];
        for (int pi = I.begin; pi < I.end; ++pi) {
            int S = bvh.faceIds[pi];
            for (int pj = J.begin; pj < J.end; ++pj) {
                int T = bvh.faceIds[pj];
                if (S == T) continue;
                double v = kernelValue(spec, bvh.faceCenter[S], bvh.faceProjector[S],
                                       bvh.faceCenter[T], bvh.faceProjector[T]);
                nearTrips.emplace_back(S, T, v);
            }
        }
    }
    H.near.resize(nF, nF);
    H.near.setFromTriplets(nearTrips.begin(), nearTrips.end());

    std::vector<Triplet> farTrips;
    farTrips.reserve(bct.admissible.size());
    for (const auto& [i, j] : bct.admissible) {
        const BvhNode& I = bvh.nodes[i];
        const BvhNode& J = bvh.nodes[j];
        farTrips.emplace_back(i, j, kernelValue(spec, I.centroid, I.projector, J.centroid,
                                                J.projector));
    }
    H.far.resize(nC, nC);
    H.far.setFromTriplets(farTrips.begin(), farTrips.end());
    return H;
}

Eigen::MatrixXd HKernelMatrix::apply(const Eigen::MatrixXd& x) const
{
    const int nF = bvh->numFaces();
    if (x.rows() != nF) throw std::invalid_argument("kernel product: vector length != |F|");
    const int nC = static_cast<int>(bvh->nodes.size());
    const int cols = static_cast<int>(x.cols());

    Eigen::MatrixXd y = near * x;

    // Upward pass: accumulate face values into cluster scalars. Children
    // always carry larger indices than their parent, so a reverse sweep is a
    // post-order traversal.
    Eigen::MatrixXd xt = Eigen::MatrixXd::Zero(nC, cols);
    for (int n = nC - 1; n >= 0; --n) {
        const BvhNode& node = bvh->nodes[n];
        if (node.isLeaf()) {
            for (int pos = node.begin; pos < node.end; ++pos) {
                xt.row(n) += x.row(bvh->faceIds[pos]);
            }
        } else {
            xt.row(n) = xt.row(node.left) + xt.row(node.right);
        }
    }

    Eigen::MatrixXd yt = far * xt;

    // Downward pass: push cluster results to children, then scatter leaves.
    for (int n = 0; n < nC; ++n) {
        const BvhNode& node = bvh->nodes[n];
        if (!node.isLeaf()) {
            yt.row(node.left) += yt.row(n);
            yt.row(node.right) += yt.row(n);
        } else {
            for (int pos = node.begin; pos < node.end; ++pos) {
                y.row(bvh->faceIds[pos]) += yt.row(n);
            }
        }
    }
    return y;
}

Eigen::VectorXd HKernelMatrix::apply(const Eigen::VectorXd& x) const
{
    return apply(Eigen::MatrixXd(x)).col(0);
}

Eigen::MatrixXd denseKernelMatrix(const Bvh& bvh, const KernelSpec& spec)
{
    const int nF = bvh.numFaces();
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(nF, nF);
    for (int S = 0; S < nF; ++S) {
        for (int T = 0; T < nF; ++T) {
            if (S == T) continue;
            H(S, T) = kernelValue(spec, bvh.faceCenter[S], bvh.faceProjector[S],
                                  bvh.faceCenter[T], bvh.faceProjector[T]);
        }
    }
    return H;
}

SparseMat buildAveragingOperator(const TriMesh& mesh, const std::vector<FaceGeometry>& geom)
{
    std::vector<Triplet> trips;
    trips.reserve(mesh.numFaces() * 3);
    for (int f = 0; f < mesh.numFaces(); ++f) {
        for (int t = 0; t < 3; ++t) {
            trips.emplace_back(f, mesh.faces[f][t], geom[f].area / 3.0);
        }
    }
    SparseMat U(mesh.numFaces(), mesh.numVertices());
    U.setFromTriplets(trips.begin(), trips.end());
    return U;
}

std::array<SparseMat, 3> buildDerivativeOperator(const TriMesh& mesh,
                                                 const std::vector<FaceGeometry>& geom)
{
    std::array<std::vector<Triplet>, 3> trips;
    for (int f = 0; f < mesh.numFaces(); ++f) {
        const auto& tri = mesh.faces[f];
        const FaceGeometry& g = geom[f];
        for (int t = 0; t < 3; ++t) {
            const Vec3& xj = mesh.positions[tri[(t + 1) % 3]];
            const Vec3& xk = mesh.positions[tri[(t + 2) % 3]];
            Vec3 gradHat = g.normal.cross(xk - xj) / (2.0 * g.area);
            for (int c = 0; c < 3; ++c) {
                trips[c].emplace_back(f, tri[t], gradHat[c]);
            }
        }
    }
    std::array<SparseMat, 3> D;
    for (int c = 0; c < 3; ++c) {
        D[c].resize(mesh.numFaces(), mesh.numVertices());
        D[c].setFromTriplets(trips[c].begin(), trips[c].end());
    }
    return D;
}

FractionalStack::FractionalStack(const TriMesh& mesh, const std::vector<FaceGeometry>& geom,
                                 const BlockClusterTree& bct, double p, bool lowOrder)
    : nV_(mesh.numVertices()), nF_(mesh.numFaces()), p_(p), s_(fractionalOrderS(p)),
      lowOrder_(lowOrder)
{
    if (s_ <= 1.0 || s_ >= 2.0) {
        throw std::invalid_argument("fractional order s = 2 - 2/p must lie in (1, 2)");
    }
    U_ = buildAveragingOperator(mesh, geom);
    D_ = buildDerivativeOperator(mesh, geom);
    area_.resize(nF_);
    for (int f = 0; f < nF_; ++f) area_[f] = geom[f].area;

    KernelSpec high{KernelKind::HighOrder, s_ - 1.0};
    KernelSpec pre{KernelKind::Laplace, 2.0 - s_};
    Hhigh_ = buildKernelMatrix(bct, high);
    Hpre_ = buildKernelMatrix(bct, pre);
    diagHigh_ = Hhigh_.apply(Eigen::VectorXd(area_)).cwiseQuotient(area_);
    diagPre_ = Hpre_.apply(Eigen::VectorXd(area_)).cwiseQuotient(area_);
    if (lowOrder_) {
        KernelSpec low{KernelKind::LowOrder, s_ - 1.0};
        Hlow_ = buildKernelMatrix(bct, low);
        diagLow_ = Hlow_.apply(Eigen::VectorXd(area_)).cwiseQuotient(area_);
    }
}

Eigen::VectorXd FractionalStack::applyLsigmaPre(const Eigen::VectorXd& v) const
{
    Eigen::VectorXd w = U_ * v;
    Eigen::VectorXd y = diagPre_.cwiseProduct(w) - Hpre_.apply(w);
    return 2.0 * (U_.transpose() * y);
}

Eigen::VectorXd FractionalStack::applyB(const Eigen::VectorXd& v) const
{
    Eigen::MatrixXd W(nF_, 3);
    for (int c = 0; c < 3; ++c) W.col(c) = area_.cwiseProduct(D_[c] * v);
    Eigen::MatrixXd Y = diagHigh_.asDiagonal() * W - Hhigh_.apply(W);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(nV_);
    for (int c = 0; c < 3; ++c) out += D_[c].transpose() * area_.cwiseProduct(Y.col(c));
    return 2.0 * out;
}

Eigen::VectorXd FractionalStack::applyB0(const Eigen::VectorXd& v) const
{
    if (!lowOrder_) throw std::logic_error("low-order term disabled");
    Eigen::VectorXd w = U_ * v;
    Eigen::VectorXd y = diagLow_.cwiseProduct(w) - Hlow_.apply(w);
    return 2.0 * (U_.transpose() * y);
}

Eigen::VectorXd FractionalStack::applyB0ViaV(const Eigen::VectorXd& v) const
{
    if (!lowOrder_) throw std::logic_error("low-order term disabled");
    Eigen::MatrixXd W(nF_, 3);
    for (int c = 0; c < 3; ++c) W.col(c) = area_.cwiseProduct(D_[c] * v);
    Eigen::MatrixXd Y = diagLow_.asDiagonal() * W - Hlow_.apply(W);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(nV_);
    for (int c = 0; c < 3; ++c) out += D_[c].transpose() * area_.cwiseProduct(Y.col(c));
    return 2.0 * out;
}

Eigen::VectorXd FractionalStack::applyA(const Eigen::VectorXd& v) const
{
    Eigen::VectorXd out = applyB(v);
    if (lowOrder_) out += applyB0(v);
    return out;
}

Eigen::MatrixXd FractionalStack::applyA3(const Eigen::MatrixXd& x) const
{
    if (x.rows() != nV_ || x.cols() != 3) {
        throw std::invalid_argument("A3 expects a |V| x 3 matrix");
    }
    // High-order part, batched: 3 coordinates x 3 gradient components.
    Eigen::MatrixXd W(nF_, 9);
    for (int c = 0; c < 3; ++c) {
        for (int g = 0; g < 3; ++g) {
            W.col(3 * c + g) = area_.cwiseProduct(D_[g] * x.col(c));
        }
    }
    Eigen::MatrixXd Y = diagHigh_.asDiagonal() * W - Hhigh_.apply(W);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(nV_, 3);
    for (int c = 0; c < 3; ++c) {
        for (int g = 0; g < 3; ++g) {
            out.col(c) += D_[g].transpose() * area_.cwiseProduct(Y.col(3 * c + g));
        }
    }

    if (lowOrder_) {
        Eigen::MatrixXd Wl = U_ * x;
        Eigen::MatrixXd Yl = diagLow_.asDiagonal() * Wl - Hlow_.apply(Wl);
        out += U_.transpose() * Yl;
    }
    return 2.0 * out;
}

Eigen::MatrixXd assembleDenseFractional(const TriMesh& mesh, const std::vector<FaceGeometry>& geom,
                                        FractionalOp which, double sigma, int maxFaces)
{
    const int nF = mesh.numFaces();
    const int nV = mesh.numVertices();
    if (nF > maxFaces) {
        throw std::invalid_argument("dense fractional assembly capped at " +
                                    std::to_string(maxFaces) + " faces");
    }

    // Per-face hat-function gradients for the high-order summand.
    std::vector<std::array<Vec3, 3>> hatGrad(nF);
    for (int f = 0; f < nF; ++f) {
        const auto& tri = mesh.faces[f];
        for (int t = 0; t < 3; ++t) {
            const Vec3& xj = mesh.positions[tri[(t + 1) % 3]];
            const Vec3& xk = mesh.positions[tri[(t + 2) % 3]];
            hatGrad[f][t] = geom[f].normal.cross(xk - xj) / (2.0 * geom[f].area);
        }
    }

    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(nV, nV);
    double expo = 2.0 * sigma + 2.0;

    for (int S = 0; S < nF; ++S) {
        for (int T = 0; T < nF; ++T) {
            if (S == T) continue;
            Vec3 d = geom[S].barycenter - geom[T].barycenter;
            double dist = d.norm();
            double base = std::pow(dist, -expo) * geom[S].area * geom[T].area;
            if (which == FractionalOp::B0) {
                double num = (geom[S].projector * d).norm();
                base *= num * num / (dist * dist * dist * dist); // K_{f,2}(S,T)
            }

            // Vertices adjacent to S or T (up to 6, fewer when shared).
            int verts[6];
            int nVerts = 0;
            auto addVert = [&](int v) {
                for (int q = 0; q < nVerts; ++q) {
                    if (verts[q] == v) return;
                }
                verts[nVerts++] = v;
            };
            for (int t = 0; t < 3; ++t) addVert(mesh.faces[S][t]);
            for (int t = 0; t < 3; ++t) addVert(mesh.faces[T][t]);

            auto hatAverage = [&](int v, int face) {
                for (int t = 0; t < 3; ++t) {
                    if (mesh.faces[face][t] == v) return 1.0 / 3.0;
                }
                return 0.0;
            };
            auto hatGradient = [&](int v, int face) -> Vec3 {
                for (int t = 0; t < 3; ++t) {
                    if (mesh.faces[face][t] == v) return hatGrad[face][t];
                }
                return Vec3::Zero();
            };

            for (int qi = 0; qi < nVerts; ++qi) {
                int i = verts[qi];
                for (int qj = 0; qj < nVerts; ++qj) {
                    int j = verts[qj];
                    double summand;
                    if (which == FractionalOp::B) {
                        Vec3 di = hatGradient(i, S) - hatGradient(i, T);
                        Vec3 dj = hatGradient(j, S) - hatGradient(j, T);
                        summand = di.dot(dj);
                    } else {
                        summand = (hatAverage(i, S) - hatAverage(i, T)) *
                                  (hatAverage(j, S) - hatAverage(j, T));
                    }
                    L(i, j) += summand * base;
                }
            }
        }
    }
    return L;
}

} // namespace repulsor
