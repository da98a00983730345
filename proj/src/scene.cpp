#include "repulsor/scene.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "repulsor/obj_io.hpp"
#include "repulsor/shapes.hpp"
#include "repulsor/tpe.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace repulsor {

namespace {

[[noreturn]] void configFail(const std::string& name, int line, const std::string& what)
{
    throw std::invalid_argument(name + ":" + std::to_string(line) + ": " + what);
}

std::vector<std::string> tokens(const std::string& text)
{
    std::istringstream in(text);
    std::vector<std::string> out;
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

double toDouble(const std::string& s, const std::string& name, int line)
{
    try {
        size_t used;
        double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        configFail(name, line, "expected a number, got '" + s + "'");
    }
}

int toInt(const std::string& s, const std::string& name, int line)
{
    try {
        size_t used;
        int v = std::stoi(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        configFail(name, line, "expected an integer, got '" + s + "'");
    }
}

bool toBool(const std::string& s, const std::string& name, int line)
{
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    configFail(name, line, "expected a boolean, got '" + s + "'");
}

std::vector<double> toDoubles(const std::vector<std::string>& toks, const std::string& name,
                              int line)
{
    std::vector<double> out;
    for (const auto& t : toks) out.push_back(toDouble(t, name, line));
    return out;
}

} // namespace

SceneConfig parseSceneConfig(std::istream& in, const std::string& name)
{
    SceneConfig cfg;
    std::string section; // "", "constraint", "penalty"
    std::string line;
    int lineNo = 0;

    while (std::getline(in, line)) {
        ++lineNo;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        auto toksAll = tokens(line);
        if (toksAll.empty()) continue;

        if (toksAll.size() == 1 && toksAll[0].front() == '[' && toksAll[0].back() == ']') {
            section = toksAll[0].substr(1, toksAll[0].size() - 2);
            if (section == "constraint") {
                cfg.constraints.emplace_back();
            } else if (section == "penalty") {
                cfg.penalties.emplace_back();
            } else {
                configFail(name, lineNo, "unknown section [" + section + "]");
            }
            continue;
        }

        // key = v1 v2 ...
        auto eq = std::find(toksAll.begin(), toksAll.end(), "=");
        if (eq == toksAll.end() || eq == toksAll.begin()) {
            configFail(name, lineNo, "expected 'key = value'");
        }
        std::string key = toksAll.front();
        if (std::distance(toksAll.begin(), eq) != 1) {
            configFail(name, lineNo, "expected a single key before '='");
        }
        std::vector<std::string> vals(eq + 1, toksAll.end());
        if (vals.empty()) configFail(name, lineNo, "missing value for '" + key + "'");
        auto one = [&]() -> const std::string& {
            if (vals.size() != 1) configFail(name, lineNo, "'" + key + "' expects one value");
            return vals[0];
        };

        if (section == "constraint") {
            ConstraintSpec& c = cfg.constraints.back();
            if (key == "type") c.type = one();
            else if (key == "component") c.component = toInt(one(), name, lineNo);
            else if (key == "vertex") c.vertex = toInt(one(), name, lineNo);
            else if (key == "target") c.target = toDoubles(vals, name, lineNo);
            else configFail(name, lineNo, "unknown constraint key '" + key + "'");
        } else if (section == "penalty") {
            PenaltySpec& p = cfg.penalties.back();
            if (key == "type") p.type = one();
            else if (key == "weight") p.weight = toDouble(one(), name, lineNo);
            else if (key == "target") p.target = toDoubles(vals, name, lineNo);
            else if (key == "mesh") p.meshPath = one();
            else if (key == "field") p.field = vals;
            else configFail(name, lineNo, "unknown penalty key '" + key + "'");
        } else {
            if (key == "mesh") cfg.meshPath = one();
            else if (key == "shape") cfg.shape = vals;
            else if (key == "p") cfg.p = toDouble(one(), name, lineNo);
            else if (key == "subcritical") cfg.subcritical = toBool(one(), name, lineNo);
            else if (key == "theta") cfg.theta = toDouble(one(), name, lineNo);
            else if (key == "chi") cfg.chi = toDouble(one(), name, lineNo);
            else if (key == "leaf_size") cfg.leafSize = toInt(one(), name, lineNo);
            else if (key == "metric") cfg.metric = one();
            else if (key == "max_steps") cfg.maxSteps = toInt(one(), name, lineNo);
            else if (key == "tolerance") cfg.tolerance = toDouble(one(), name, lineNo);
            else if (key == "output") cfg.output = one();
            else if (key == "stride") cfg.stride = toInt(one(), name, lineNo);
            else if (key == "threads") cfg.threads = toInt(one(), name, lineNo);
            else if (key == "deterministic") cfg.deterministic = toBool(one(), name, lineNo);
            else if (key == "free_barycenter") cfg.freeBarycenter = toBool(one(), name, lineNo);
            else if (key == "disable_low_order")
                cfg.disableLowOrder = toBool(one(), name, lineNo);
            else if (key == "remesh") cfg.remeshEnabled = toBool(one(), name, lineNo);
            else if (key == "target_edge_length")
                cfg.targetEdgeLength = toDouble(one(), name, lineNo);
            else if (key == "surface") cfg.surface = vals;
            else if (key == "levels") cfg.levels = toInt(one(), name, lineNo);
            else if (key == "thetas") cfg.thetas = toDoubles(vals, name, lineNo);
            else configFail(name, lineNo, "unknown key '" + key + "'");
        }
    }
    return cfg;
}

SceneConfig loadSceneConfig(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config: " + path);
    return parseSceneConfig(in, path);
}

std::string serializeSceneConfig(const SceneConfig& c)
{
    std::ostringstream out;
    out.precision(17);
    auto vec = [&](const std::vector<double>& v) {
        std::ostringstream s;
        s.precision(17);
        for (size_t i = 0; i < v.size(); ++i) s << (i ? " " : "") << v[i];
        return s.str();
    };
    auto strs = [&](const std::vector<std::string>& v) {
        std::string s;
        for (size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + v[i];
        return s;
    };

    if (!c.meshPath.empty()) out << "mesh = " << c.meshPath << "\n";
    if (!c.shape.empty()) out << "shape = " << strs(c.shape) << "\n";
    out << "p = " << c.p << "\n";
    out << "subcritical = " << (c.subcritical ? "true" : "false") << "\n";
    out << "theta = " << c.theta << "\n";
    out << "chi = " << c.chi << "\n";
    out << "leaf_size = " << c.leafSize << "\n";
    out << "metric = " << c.metric << "\n";
    out << "max_steps = " << c.maxSteps << "\n";
    out << "tolerance = " << c.tolerance << "\n";
    out << "output = " << c.output << "\n";
    out << "stride = " << c.stride << "\n";
    out << "threads = " << c.threads << "\n";
    out << "deterministic = " << (c.deterministic ? "true" : "false") << "\n";
    out << "free_barycenter = " << (c.freeBarycenter ? "true" : "false") << "\n";
    out << "disable_low_order = " << (c.disableLowOrder ? "true" : "false") << "\n";
    out << "remesh = " << (c.remeshEnabled ? "true" : "false") << "\n";
    out << "target_edge_length = " << c.targetEdgeLength << "\n";
    if (!c.surface.empty()) out << "surface = " << strs(c.surface) << "\n";
    out << "levels = " << c.levels << "\n";
    out << "thetas = " << vec(c.thetas) << "\n";
    for (const auto& cs : c.constraints) {
        out << "\n[constraint]\n";
        out << "type = " << cs.type << "\n";
        if (cs.type == "barycenter") out << "component = " << cs.component << "\n";
        if (cs.type == "pin") out << "vertex = " << cs.vertex << "\n";
        if (!cs.target.empty()) out << "target = " << vec(cs.target) << "\n";
    }
    for (const auto& ps : c.penalties) {
        out << "\n[penalty]\n";
        out << "type = " << ps.type << "\n";
        out << "weight = " << ps.weight << "\n";
        if (!ps.target.empty()) out << "target = " << vec(ps.target) << "\n";
        if (!ps.meshPath.empty()) out << "mesh = " << ps.meshPath << "\n";
        if (!ps.field.empty()) out << "field = " << strs(ps.field) << "\n";
    }
    return out.str();
}

void validateSceneConfig(const SceneConfig& c)
{
    if (c.meshPath.empty() == c.shape.empty()) {
        throw std::invalid_argument("config needs exactly one of 'mesh' or 'shape'");
    }
    if (!c.meshPath.empty() && !std::filesystem::exists(c.meshPath)) {
        throw std::invalid_argument("mesh file does not exist: " + c.meshPath);
    }
    if (c.p <= 0) throw std::invalid_argument("p must be positive");
    if (!c.subcritical && c.p <= 4) {
        throw std::invalid_argument("p <= 4 requires 'subcritical = true'");
    }
    if (c.theta < 0 || c.chi < 0) throw std::invalid_argument("theta and chi must be >= 0");
    if (c.leafSize < 1) throw std::invalid_argument("leaf_size must be >= 1");
    metricKindFromString(c.metric);
    if (c.maxSteps < 1) throw std::invalid_argument("max_steps must be >= 1");
    if (c.tolerance <= 0) throw std::invalid_argument("tolerance must be positive");
    if (c.stride < 1) throw std::invalid_argument("stride must be >= 1");
    if (c.threads < 0) throw std::invalid_argument("threads must be >= 0");
    if (c.levels < 1) throw std::invalid_argument("levels must be >= 1");

    for (const auto& cs : c.constraints) {
        if (cs.type != "barycenter" && cs.type != "pin" && cs.type != "area" &&
            cs.type != "volume") {
            throw std::invalid_argument("unknown constraint type '" + cs.type + "'");
        }
        if (cs.type == "pin" && cs.vertex < 0) {
            throw std::invalid_argument("pin constraint needs 'vertex'");
        }
        if (cs.type == "barycenter" && !cs.target.empty() && cs.target.size() != 3) {
            throw std::invalid_argument("barycenter target needs 3 numbers");
        }
        if ((cs.type == "area" || cs.type == "volume") && cs.target.size() > 1) {
            throw std::invalid_argument(cs.type + " target is a single number");
        }
    }
    for (const auto& ps : c.penalties) {
        static const std::vector<std::string> kinds = {
            "area_deviation",   "volume_deviation",  "mesh_obstacle",
            "implicit_obstacle", "implicit_attractor", "boundary_length",
            "boundary_curvature", "willmore"};
        if (std::find(kinds.begin(), kinds.end(), ps.type) == kinds.end()) {
            throw std::invalid_argument("unknown penalty type '" + ps.type + "'");
        }
        if (ps.weight < 0) throw std::invalid_argument("penalty weights must be >= 0");
        if (ps.type == "mesh_obstacle") {
            if (ps.meshPath.empty()) {
                throw std::invalid_argument("mesh_obstacle needs 'mesh = <path>'");
            }
            if (!std::filesystem::exists(ps.meshPath)) {
                throw std::invalid_argument("obstacle mesh does not exist: " + ps.meshPath);
            }
        }
        if ((ps.type == "implicit_obstacle" || ps.type == "implicit_attractor") &&
            ps.field.empty()) {
            throw std::invalid_argument(ps.type + " needs 'field = <primitive> <params...>'");
        }
    }
}

TriMesh makeShape(const std::vector<std::string>& shape)
{
    auto need = [&](size_t n) {
        if (shape.size() != n + 1) {
            throw std::invalid_argument("shape '" + shape[0] + "' expects " + std::to_string(n) +
                                        " parameters");
        }
    };
    const std::string& kind = shape.at(0);
    auto num = [&](size_t i) { return std::stod(shape.at(i)); };
    if (kind == "icosphere") {
        need(2);
        return makeIcosphere(num(1), static_cast<int>(num(2)));
    }
    if (kind == "torus") {
        need(4);
        return makeTorus(num(1), num(2), static_cast<int>(num(3)), static_cast<int>(num(4)));
    }
    if (kind == "cube") {
        need(1);
        return makeCube(num(1));
    }
    if (kind == "bumpy_sphere") {
        need(3);
        return makeBumpySphere(num(1), static_cast<int>(num(2)), num(3));
    }
    if (kind == "disk") {
        need(2);
        return makeDiskFan(num(1), static_cast<int>(num(2)));
    }
    if (kind == "strip") {
        need(4);
        return makeStrip(num(1), num(2), static_cast<int>(num(3)), static_cast<int>(num(4)));
    }
    throw std::invalid_argument("unknown shape '" + kind + "'");
}

namespace {

std::shared_ptr<ImplicitField> buildField(const std::vector<std::string>& spec)
{
    auto num = [&](size_t i) { return std::stod(spec.at(i)); };
    const std::string& kind = spec.at(0);
    if (kind == "sphere" && spec.size() == 5) {
        return makeSphereField(Vec3(num(1), num(2), num(3)), num(4));
    }
    if (kind == "cylinder" && spec.size() == 8) {
        return makeCylinderField(Vec3(num(1), num(2), num(3)), Vec3(num(4), num(5), num(6)),
                                 num(7));
    }
    if (kind == "plane" && spec.size() == 7) {
        return makePlaneField(Vec3(num(1), num(2), num(3)), Vec3(num(4), num(5), num(6)));
    }
    if (kind == "slab" && spec.size() == 8) {
        return makeSlabField(Vec3(num(1), num(2), num(3)), Vec3(num(4), num(5), num(6)), num(7));
    }
    if (kind == "grid" && spec.size() == 2) {
        return loadGridField(spec[1]);
    }
    throw std::invalid_argument("malformed field spec starting with '" + kind + "'");
}

} // namespace

Scene buildScene(const SceneConfig& cfg)
{
    validateSceneConfig(cfg);

    Scene scene;
    scene.mesh = cfg.meshPath.empty() ? makeShape(cfg.shape) : loadObj(cfg.meshPath);
    if (scene.mesh.componentOf.empty()) labelComponents(scene.mesh);

    for (const auto& cs : cfg.constraints) {
        Constraint c;
        if (cs.type == "barycenter") {
            c.kind = Constraint::Kind::Barycenter;
            c.component = cs.component;
            if (!cs.target.empty()) c.targetPoint = Vec3(cs.target[0], cs.target[1], cs.target[2]);
        } else if (cs.type == "pin") {
            c.kind = Constraint::Kind::Pin;
            c.vertex = cs.vertex;
            if (cs.target.size() == 3) {
                c.targetPoint = Vec3(cs.target[0], cs.target[1], cs.target[2]);
            }
        } else if (cs.type == "area") {
            c.kind = Constraint::Kind::TotalArea;
            if (!cs.target.empty()) c.targetScalar = cs.target[0];
        } else {
            c.kind = Constraint::Kind::TotalVolume;
            if (!cs.target.empty()) c.targetScalar = cs.target[0];
        }
        scene.constraints.items.push_back(c);
    }
    // Capture any omitted targets from the initial mesh.
    {
        ConstraintSet captured = scene.constraints;
        captured.captureTargets(scene.mesh);
        for (size_t i = 0; i < scene.constraints.items.size(); ++i) {
            const auto& spec = cfg.constraints[i];
            if (spec.target.empty()) scene.constraints.items[i] = captured.items[i];
        }
    }

    for (const auto& ps : cfg.penalties) {
        Penalty p;
        p.weight = ps.weight;
        p.exponent = cfg.p;
        if (!ps.target.empty()) p.target = ps.target[0];
        if (ps.type == "area_deviation") {
            p.kind = Penalty::Kind::AreaDeviation;
            if (ps.target.empty()) {
                double area, vol;
                totals(scene.mesh, area, vol);
                p.target = area;
            }
        } else if (ps.type == "volume_deviation") {
            p.kind = Penalty::Kind::VolumeDeviation;
            if (ps.target.empty()) {
                double area, vol;
                totals(scene.mesh, area, vol);
                p.target = vol;
            }
        } else if (ps.type == "mesh_obstacle") {
            p.kind = Penalty::Kind::MeshObstacle;
            p.obstacle = std::make_shared<TriMesh>(loadObj(ps.meshPath));
            BvhParams bp;
            bp.leafSize = cfg.leafSize;
            p.obstacleBvh =
                std::make_shared<Bvh>(buildBvh(*p.obstacle, allFaceGeometry(*p.obstacle), bp));
            p.obstacleTheta = cfg.theta;
        } else if (ps.type == "implicit_obstacle") {
            p.kind = Penalty::Kind::ImplicitObstacle;
            p.field = buildField(ps.field);
        } else if (ps.type == "implicit_attractor") {
            p.kind = Penalty::Kind::ImplicitAttractor;
            p.field = buildField(ps.field);
        } else if (ps.type == "boundary_length") {
            p.kind = Penalty::Kind::BoundaryLength;
        } else if (ps.type == "boundary_curvature") {
            p.kind = Penalty::Kind::BoundaryCurvature;
        } else {
            p.kind = Penalty::Kind::Willmore;
        }
        scene.penalties.items.push_back(p);
    }

    scene.options.energy.p = cfg.p;
    scene.options.energy.subcritical = cfg.subcritical;
    scene.options.bh.theta = cfg.theta;
    scene.options.chi = cfg.chi;
    scene.options.bvhParams.leafSize = cfg.leafSize;
    scene.options.metric = metricKindFromString(cfg.metric);
    scene.options.solve.tol = cfg.tolerance;
    scene.options.deterministic = cfg.deterministic;
    scene.options.freeBarycenter = cfg.freeBarycenter;
    scene.options.disableLowOrder = cfg.disableLowOrder;
    scene.options.remeshEnabled = cfg.remeshEnabled;
    if (cfg.targetEdgeLength > 0) {
        scene.options.remesh.targetEdgeLength = cfg.targetEdgeLength;
    }
    return scene;
}

void applyThreadSettings(const SceneConfig& cfg)
{
#ifdef _OPENMP
    int threads = cfg.threads;
    if (const char* env = std::getenv("REPULSOR_THREADS")) {
        threads = std::atoi(env);
    }
    if (threads > 0) omp_set_num_threads(threads);
#else
    (void)cfg;
#endif
}

namespace {

std::string csvFormat(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

int runScene(const SceneConfig& cfg, std::ostream& log)
{
    Scene scene;
    try {
        scene = buildScene(cfg);
    } catch (const std::exception& e) {
        log << "config error: " << e.what() << "\n";
        return 1;
    }
    applyThreadSettings(cfg);

    namespace fs = std::filesystem;
    fs::create_directories(cfg.output);
    {
        std::ofstream echo(fs::path(cfg.output) / "config.echo");
        echo << serializeSceneConfig(cfg);
    }

    std::ofstream csv(fs::path(cfg.output) / "energies.csv");
    csv << "step,energy";
    for (const auto& p : scene.penalties.items) {
        csv << ",penalty:" << penaltyKindName(p.kind);
    }
    {
        int idx = 0;
        for (const auto& c : scene.constraints.items) {
            const char* kind = c.kind == Constraint::Kind::Barycenter ? "barycenter"
                               : c.kind == Constraint::Kind::Pin      ? "pin"
                               : c.kind == Constraint::Kind::TotalArea ? "area"
                                                                        : "volume";
            for (int r = 0; r < c.rowCount(); ++r) {
                csv << ",residual:" << idx << ":" << kind;
            }
            ++idx;
        }
    }
    csv << ",tau,solver_iters,seconds\n";

    try {
        FlowState flow(std::move(scene.mesh), scene.constraints, scene.penalties, scene.options);
        for (int step = 0; step < cfg.maxSteps; ++step) {
            StepRecord rec = flow.step();
            csv << rec.step << "," << csvFormat(rec.bhEnergy);
            for (double v : rec.penaltyValues) csv << "," << csvFormat(v);
            if (rec.penaltyValues.empty()) {
                for (size_t i = 0; i < scene.penalties.items.size(); ++i) csv << ",0";
            }
            for (int i = 0; i < rec.residuals.size(); ++i) {
                csv << "," << csvFormat(rec.residuals[i]);
            }
            csv << "," << csvFormat(rec.tau) << "," << rec.solverIterations << ","
                << csvFormat(rec.seconds) << "\n";

            if (rec.step % cfg.stride == 0) {
                char frame[32];
                std::snprintf(frame, sizeof(frame), "frame_%06d.obj", rec.step);
                saveObj(flow.mesh(), fs::path(cfg.output) / frame);
            }
            if (rec.converged) {
                log << "converged after " << (step + 1) << " steps\n";
                break;
            }
        }
        const StepRecord& last = flow.history().back();
        log << "final objective " << last.objective << " after " << flow.history().size()
            << " steps; max residual "
            << (last.residuals.size() ? last.residuals.lpNorm<Eigen::Infinity>() : 0.0) << "\n";
        std::ofstream summary(fs::path(cfg.output) / "summary.txt");
        summary << "steps " << flow.history().size() << "\n"
                << "objective " << csvFormat(last.objective) << "\n"
                << "bh_energy " << csvFormat(last.bhEnergy) << "\n"
                << "vertices " << flow.mesh().numVertices() << "\n"
                << "faces " << flow.mesh().numFaces() << "\n"
                << "converged " << (flow.converged() ? "true" : "false") << "\n";
    } catch (const SolveFailure& e) {
        log << "solver failure: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

int runConsistency(const SceneConfig& cfg, std::ostream& log)
{
    if (cfg.surface.empty()) {
        log << "config error: consistency study needs 'surface = sphere R | torus R r'\n";
        return 1;
    }
    applyThreadSettings(cfg);
    namespace fs = std::filesystem;
    fs::create_directories(cfg.output);
    {
        std::ofstream echo(fs::path(cfg.output) / "config.echo");
        echo << serializeSceneConfig(cfg);
    }

    double reference = 0;
    std::vector<TriMesh> meshes;
    try {
        const std::string& kind = cfg.surface.at(0);
        if (kind == "sphere") {
            double R = std::stod(cfg.surface.at(1));
            reference = sphereTangentPointEnergy(R, cfg.p);
            for (int l = 0; l < cfg.levels; ++l) meshes.push_back(makeIcosphere(R, l + 2));
        } else if (kind == "torus") {
            double R = std::stod(cfg.surface.at(1));
            double r = std::stod(cfg.surface.at(2));
            reference = torusTangentPointEnergyReference(R, r, cfg.p);
            for (int l = 0; l < cfg.levels; ++l) {
                int n = 8 << l;
                meshes.push_back(makeTorus(R, r, 3 * n, n));
            }
        } else {
            log << "config error: unknown surface '" << kind << "'\n";
            return 1;
        }
    } catch (const std::exception& e) {
        log << "config error: " << e.what() << "\n";
        return 1;
    }

    EnergyParams params;
    params.p = cfg.p;
    params.subcritical = cfg.subcritical;

    std::ofstream csv(fs::path(cfg.output) / "consistency.csv");
    csv << "level,h,faces,energy,rel_error";
    for (double theta : cfg.thetas) csv << ",bh_dev_theta_" << theta;
    csv << "\n";

    std::vector<double> hs, errs;
    std::vector<double> finestDeviations;
    for (size_t level = 0; level < meshes.size(); ++level) {
        const TriMesh& m = meshes[level];
        auto geom = allFaceGeometry(m);
        BvhParams bp;
        bp.leafSize = cfg.leafSize;
        Bvh bvh = buildBvh(m, geom, bp);
        double exact = tpeEnergyExact(m, geom, params, cfg.deterministic);
        double h = maxEdgeLength(m);
        double relErr = std::abs(exact - reference) / reference;
        hs.push_back(h);
        errs.push_back(relErr);

        csv << level << "," << csvFormat(h) << "," << m.numFaces() << "," << csvFormat(exact)
            << "," << csvFormat(relErr);
        log << "level " << level << "  h " << h << "  faces " << m.numFaces() << "  energy "
            << exact << "  rel_error " << relErr << "\n";
        std::vector<double>* devOut =
            (level + 1 == meshes.size()) ? &finestDeviations : nullptr;
        for (double theta : cfg.thetas) {
            BhParams bh;
            bh.theta = theta;
            double approx = bhEnergy(m, bvh, params, bh, cfg.deterministic);
            double dev = std::abs(approx - exact) / exact;
            csv << "," << csvFormat(dev);
            log << "    theta " << theta << "  bh_deviation " << dev << "\n";
            if (devOut) devOut->push_back(dev);
        }
        csv << "\n";
    }

    // Fitted log-log rates.
    auto fitSlope = [](const std::vector<double>& x, const std::vector<double>& y) {
        double sx = 0, sy = 0, sxx = 0, sxy = 0;
        int n = 0;
        for (size_t i = 0; i < x.size(); ++i) {
            if (x[i] <= 0 || y[i] <= 0) continue;
            double lx = std::log(x[i]), ly = std::log(y[i]);
            sx += lx;
            sy += ly;
            sxx += lx * lx;
            sxy += lx * ly;
            ++n;
        }
        return (n * sxy - sx * sy) / (n * sxx - sx * sx);
    };
    double hRate = fitSlope(hs, errs);
    log << "fitted energy convergence rate (vs h): " << hRate << "\n";
    std::vector<double> positiveThetas, thetaDevs;
    for (size_t i = 0; i < cfg.thetas.size(); ++i) {
        if (cfg.thetas[i] > 0 && i < finestDeviations.size()) {
            positiveThetas.push_back(cfg.thetas[i]);
            thetaDevs.push_back(finestDeviations[i]);
        }
    }
    if (positiveThetas.size() >= 2) {
        log << "fitted Barnes-Hut rate (vs theta): " << fitSlope(positiveThetas, thetaDevs)
            << "\n";
    }
    return 0;
}

} // namespace repulsor
