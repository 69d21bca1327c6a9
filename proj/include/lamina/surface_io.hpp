#pragma once

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lamina/tracer.hpp"

namespace lamina {

namespace detail {
// shortest round-trip decimal form of a double
inline std::string dtos(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}
}  // namespace detail

inline void save_surface_ply(const StreamSurface& s, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(ErrorCode::IoError, "cannot open for write: " + path);
    os << "ply\nformat ascii 1.0\n";
    os << "comment stream surface " << s.id << " r " << detail::dtos(s.r) << "\n";
    os << "element vertex " << s.points.size() << "\n";
    os << "property double x\nproperty double y\nproperty double z\n";
    os << "property double nx\nproperty double ny\nproperty double nz\n";
    os << "end_header\n";
    for (std::size_t i = 0; i < s.points.size(); ++i) {
        const Vec3& p = s.points[i];
        const Vec3& n = s.normals[i];
        os << detail::dtos(p.x) << " " << detail::dtos(p.y) << " " << detail::dtos(p.z) << " "
           << detail::dtos(n.x) << " " << detail::dtos(n.y) << " " << detail::dtos(n.z) << "\n";
    }
    if (!os) throw Error(ErrorCode::IoError, "short write: " + path);
}

inline StreamSurface load_surface_ply(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error(ErrorCode::IoError, "cannot open: " + path);
    std::string line;
    std::size_t n_vertices = 0;
    StreamSurface s;
    bool in_header = true;
    while (in_header && std::getline(is, line)) {
        if (line.rfind("element vertex ", 0) == 0)
            n_vertices = std::stoul(line.substr(15));
        else if (line.rfind("comment stream surface ", 0) == 0) {
            // "comment stream surface <id> r <r>"
            std::sscanf(line.c_str(), "comment stream surface %d r %lf", &s.id, &s.r);
        } else if (line == "end_header")
            in_header = false;
    }
    if (in_header) throw Error(ErrorCode::MalformedHeader, "no end_header in " + path);
    s.points.reserve(n_vertices);
    s.normals.reserve(n_vertices);
    for (std::size_t i = 0; i < n_vertices; ++i) {
        Vec3 p, n;
        if (!(is >> p.x >> p.y >> p.z >> n.x >> n.y >> n.z))
            throw Error(ErrorCode::DimensionMismatch, "vertex list shorter than header in " + path);
        s.points.push_back(p);
        s.normals.push_back(n);
    }
    return s;
}

struct SurfaceManifest {
    double r = 0.0;
    double r_fine = 0.0;
    std::uint64_t field_hash = 0;
    std::vector<int> surface_ids;
};

inline std::string surface_file_name(int id) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "surface_%04d.ply", id);
    return buf;
}

inline void save_manifest(const SurfaceManifest& m, const std::string& path) {
    nlohmann::json j = {
        {"r", m.r},
        {"r_fine", m.r_fine},
        {"field_hash", m.field_hash},
        {"surface_ids", m.surface_ids},
    };
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(ErrorCode::IoError, "cannot open for write: " + path);
    os << j.dump(2) << "\n";
}

inline SurfaceManifest load_manifest(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error(ErrorCode::IoError, "cannot open: " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedHeader, std::string("bad manifest JSON: ") + e.what());
    }
    SurfaceManifest m;
    m.r = j.at("r").get<double>();
    m.r_fine = j.at("r_fine").get<double>();
    m.field_hash = j.at("field_hash").get<std::uint64_t>();
    m.surface_ids = j.at("surface_ids").get<std::vector<int>>();
    return m;
}

inline void save_surface_set(const std::vector<StreamSurface>& surfaces, const SurfaceManifest& m,
                             const std::string& dir) {
    std::filesystem::create_directories(dir);
    for (const StreamSurface& s : surfaces)
        save_surface_ply(s, (std::filesystem::path(dir) / surface_file_name(s.id)).string());
    save_manifest(m, (std::filesystem::path(dir) / "manifest.json").string());
}

inline std::vector<StreamSurface> load_surface_set(const std::string& dir,
                                                   SurfaceManifest* manifest_out = nullptr) {
    const auto mpath = std::filesystem::path(dir) / "manifest.json";
    SurfaceManifest m = load_manifest(mpath.string());
    std::vector<StreamSurface> out;
    out.reserve(m.surface_ids.size());
    for (int id : m.surface_ids)
        out.push_back(load_surface_ply((std::filesystem::path(dir) / surface_file_name(id)).string()));
    if (manifest_out) *manifest_out = m;
    return out;
}

}  // namespace lamina
