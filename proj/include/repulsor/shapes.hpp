#pragma once

#include "repulsor/trimesh.hpp"

namespace repulsor {

TriMesh makeTetrahedron(double scale = 1.0);
TriMesh makeCube(double edge = 1.0); // 12 triangles, outward orientation

/// Subdivided icosahedron projected to a sphere of the given radius.
/// Level 0 has 20 faces; each level quadruples the face count.
TriMesh makeIcosphere(double radius, int level);

/// Torus of revolution with ring radius R and tube radius r, sampled on a
/// regular parameter grid (each quad split into two triangles).
TriMesh makeTorus(double R, double r, int nPhi, int nTheta);

/// Icosphere displaced radially by a fixed smooth bump field; the field is a
/// function of direction only, so different levels sample the same surface.
TriMesh makeBumpySphere(double radius, int level, double amplitude);

/// Flat fan disk in the z=0 plane: one center vertex, n rim vertices.
TriMesh makeDiskFan(double radius, int n);

/// Flat rectangular strip [0,w]x[0,h] in the z=0 plane with nx*ny quads.
TriMesh makeStrip(double w, double h, int nx, int ny);

/// Applies a rigid motion (or any affine map) to all positions.
void transformMesh(TriMesh& mesh, const Mat3& linear, const Vec3& translation);

} // namespace repulsor
