#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "repulsor/flow.hpp"

namespace repulsor {

struct ConstraintSpec {
    std::string type; // barycenter | pin | area | volume
    int component = 0;
    int vertex = -1;
    std::vector<double> target; // empty: captured from the input mesh

    bool operator==(const ConstraintSpec&) const = default;
};

struct PenaltySpec {
    std::string type;
    double weight = 1.0;
    std::vector<double> target;     // A0 / V0 / boundary length
    std::string meshPath;           // mesh_obstacle
    std::vector<std::string> field; // implicit kinds: primitive + parameters

    bool operator==(const PenaltySpec&) const = default;
};

/// Key-value scene description with nested [constraint], [penalty] sections.
/// The grammar is documented in the README.
struct SceneConfig {
    std::string meshPath;
    std::vector<std::string> shape; // generator + parameters, alternative to meshPath

    double p = 6.0;
    bool subcritical = false;
    double theta = 0.5;
    double chi = 0.5;
    int leafSize = 8;
    std::string metric = "hs";
    int maxSteps = 100;
    double tolerance = 1e-6;
    std::string output = "out";
    int stride = 1;
    int threads = 0; // 0 = all cores
    bool deterministic = false;
    bool freeBarycenter = false;
    bool disableLowOrder = false;
    bool remeshEnabled = true;
    double targetEdgeLength = 0;

    std::vector<ConstraintSpec> constraints;
    std::vector<PenaltySpec> penalties;

    // Consistency-study fields.
    std::vector<std::string> surface; // sphere R | torus R r
    int levels = 3;
    std::vector<double> thetas = {1.0, 0.5, 0.25, 0.0};

    bool operator==(const SceneConfig&) const = default;
};

SceneConfig parseSceneConfig(std::istream& in, const std::string& name = "<config>");
SceneConfig loadSceneConfig(const std::string& path);
std::string serializeSceneConfig(const SceneConfig& config);

/// Range and reference checks (existence of referenced files included).
void validateSceneConfig(const SceneConfig& config);

struct Scene {
    TriMesh mesh;
    ConstraintSet constraints;
    PenaltySet penalties;
    FlowOptions options;
};

TriMesh makeShape(const std::vector<std::string>& shape);
Scene buildScene(const SceneConfig& config);

void applyThreadSettings(const SceneConfig& config);

/// Flow driver: frames, energies.csv, final summary. Returns the process
/// exit code (0 ok, 1 config error, 2 solver failure).
int runScene(const SceneConfig& config, std::ostream& log);

/// Energy consistency study on an analytic surface (sphere or torus):
/// discretization error against the smooth reference per level, Barnes-Hut
/// deviation per theta, fitted convergence rates.
int runConsistency(const SceneConfig& config, std::ostream& log);

} // namespace repulsor
