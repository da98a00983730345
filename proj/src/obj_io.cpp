#include "repulsor/obj_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace repulsor {

namespace {

[[noreturn]] void parseFail(const std::string& path, int line, const std::string& what)
{
    throw std::runtime_error(path + ":" + std::to_string(line) + ": " + what);
}

} // namespace

TriMesh loadObj(const std::string& path)
{
    std::ifstream in(path);
    if (!in) {
        throw std::runtime_error("cannot open OBJ file: " + path);
    }

    TriMesh mesh;
    std::string line;
    int lineNo = 0;
    while (std::getline(in, line)) {
        ++lineNo;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream ls(line);
        std::string tag;
        if (!(ls >> tag)) continue;

        if (tag == "v") {
            Vec3 p;
            if (!(ls >> p[0] >> p[1] >> p[2])) {
                parseFail(path, lineNo, "malformed vertex record");
            }
            mesh.positions.push_back(p);
        } else if (tag == "f") {
            std::vector<long> idx;
            std::string tok;
            while (ls >> tok) {
                if (tok.find('/') != std::string::npos) {
                    parseFail(path, lineNo, "face with attribute indices is outside the supported OBJ subset");
                }
                size_t used = 0;
                long v = 0;
                try {
                    v = std::stol(tok, &used);
                } catch (const std::exception&) {
                    parseFail(path, lineNo, "malformed face index '" + tok + "'");
                }
                if (used != tok.size()) parseFail(path, lineNo, "malformed face index '" + tok + "'");
                idx.push_back(v);
            }
            if (idx.size() != 3) {
                parseFail(path, lineNo, "non-triangular face (" + std::to_string(idx.size()) + " vertices)");
            }
            std::array<VertexId, 3> tri;
            for (int t = 0; t < 3; ++t) {
                long v = idx[t];
                if (v < 1 || v > static_cast<long>(mesh.positions.size())) {
                    parseFail(path, lineNo, "face index " + std::to_string(v) + " out of range");
                }
                tri[t] = static_cast<VertexId>(v - 1);
            }
            if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2]) {
                parseFail(path, lineNo, "face with repeated vertices");
            }
            mesh.faces.push_back(tri);
        }
        // Other record types are ignored.
    }

    // Degenerate-face and manifoldness checks reuse the validator but report
    // per-face (the validator message carries the face index).
    for (FaceId f = 0; f < mesh.numFaces(); ++f) {
        faceGeometry(mesh, f);
    }
    validateMesh(mesh);

    std::vector<bool> referenced(mesh.positions.size(), false);
    for (const auto& tri : mesh.faces) {
        for (int t = 0; t < 3; ++t) referenced[tri[t]] = true;
    }
    for (size_t i = 0; i < referenced.size(); ++i) {
        if (!referenced[i]) {
            throw std::runtime_error(path + ": vertex " + std::to_string(i + 1) +
                                     " is not referenced by any face");
        }
    }

    labelComponents(mesh);
    return mesh;
}

void saveObj(const TriMesh& mesh, const std::string& path)
{
    std::FILE* out = std::fopen(path.c_str(), "w");
    if (!out) {
        throw std::runtime_error("cannot open for writing: " + path);
    }
    for (const Vec3& p : mesh.positions) {
        std::fprintf(out, "v %.17g %.17g %.17g\n", p[0], p[1], p[2]);
    }
    for (const auto& tri : mesh.faces) {
        std::fprintf(out, "f %d %d %d\n", tri[0] + 1, tri[1] + 1, tri[2] + 1);
    }
    if (std::fclose(out) != 0) {
        throw std::runtime_error("write failure: " + path);
    }
}

} // namespace repulsor
