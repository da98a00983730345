#pragma once

#include <string>

#include "repulsor/trimesh.hpp"

namespace repulsor {

/// Loads a Wavefront OBJ restricted to `v x y z` / `f i j k` records
/// (1-based indices, `#` comments). Non-triangular faces, bad indices and
/// degenerate faces are rejected with the offending line number.
TriMesh loadObj(const std::string& path);

/// Writes `v`/`f` records with 17-significant-digit positions.
void saveObj(const TriMesh& mesh, const std::string& path);

} // namespace repulsor
