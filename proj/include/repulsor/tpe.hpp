#pragma once

#include "repulsor/trimesh.hpp"

namespace repulsor {

struct EnergyParams {
    double p = 6.0;
    bool subcritical = false; // permits p <= 4

    void validate() const;
};

/// Tangent-point kernel ||P (X - Y)||^p / ||X - Y||^(2p).
/// Equals (2 r)^-p where r is the tangent-point radius of the pair.
/// Throws when the points are closer than 1e-14.
double tpKernel(const Vec3& X, const Mat3& P, const Vec3& Y, double p);

/// Kernel value and partial derivatives with X, P, Y treated independently.
struct TpKernelDerivatives {
    double value = 0;
    Vec3 dX = Vec3::Zero();
    Vec3 dY = Vec3::Zero();
    Mat3 dP = Mat3::Zero();
};

TpKernelDerivatives tpKernelDerivatives(const Vec3& X, const Mat3& P, const Vec3& Y, double p);

/// All-pairs discrete tangent-point energy (ordered face pairs S != T,
/// midpoint quadrature). O(|F|^2).
double tpeEnergyExact(const TriMesh& mesh, const std::vector<FaceGeometry>& geom,
                      const EnergyParams& params, bool deterministic = false);

/// Exact differential of tpeEnergyExact with respect to all vertex
/// coordinates (length 3|V|, layout [x0 y0 z0 x1 ...]). Differentiates
/// through barycenters, normals/projectors and face areas.
Eigen::VectorXd tpeDifferentialExact(const TriMesh& mesh, const std::vector<FaceGeometry>& geom,
                                     const EnergyParams& params, bool deterministic = false);

/// Scatters the derivative of K(X(S),P(S);.)*a(S) ("slot 1": the face owns
/// barycenter, projector, and area) into the per-vertex gradient. `weight`
/// multiplies everything (typically the opposite area a_I).
void accumulateSlot1Gradient(const TriMesh& mesh, const std::vector<FaceGeometry>& geom, FaceId S,
                             const TpKernelDerivatives& kd, double weight,
                             Eigen::VectorXd& grad);

/// Scatters the derivative of K(.;Y(S))*a(S) ("slot 2": the face owns the
/// second barycenter and its area) into the per-vertex gradient.
void accumulateSlot2Gradient(const TriMesh& mesh, const std::vector<FaceGeometry>& geom, FaceId S,
                             const TpKernelDerivatives& kd, double weight,
                             Eigen::VectorXd& grad);

/// Analytic tangent-point energy of a round sphere: (4 pi R^2)^2 (2R)^-p.
double sphereTangentPointEnergy(double radius, double p);

/// Midpoint-quadrature tangent-point energy of the smooth torus of
/// revolution (ring radius R, tube radius r) on an nPhi x nTheta parameter
/// grid. Serves as the smooth-surface reference for consistency studies.
double torusTangentPointEnergyQuadrature(double R, double r, double p, int nPhi, int nTheta);

/// Richardson extrapolation of the quadrature above from grids (3n x n) and
/// (6n x 2n); the midpoint error is O(h^2), so this removes the leading
/// term. n = 32 gives better than 1e-5 relative accuracy for the standard
/// (1, 1/3) torus.
double torusTangentPointEnergyReference(double R, double r, double p, int nTheta = 32);

} // namespace repulsor
