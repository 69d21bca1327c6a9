#pragma once

#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lamina/field.hpp"

namespace lamina {

// .ffield: single-line JSON header {dims:[nx,ny,nz], spacing, origin:[x,y,z],
// version:1} followed by little-endian float32 payload, 12 floats per voxel
// (m1, m2, m3, t), x-fastest.

inline void save_field(const FrameGrid& g, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(ErrorCode::IoError, "cannot open for write: " + path);
    nlohmann::json header = {
        {"dims", {g.spec().dims.x, g.spec().dims.y, g.spec().dims.z}},
        {"spacing", g.spec().spacing},
        {"origin", {g.spec().origin.x, g.spec().origin.y, g.spec().origin.z}},
        {"version", 1},
    };
    os << header.dump() << "\n";
    std::vector<float> payload;
    payload.reserve(g.spec().voxel_count() * 12);
    for (const Frame& f : g.frames()) {
        for (int a = 0; a < 3; ++a)
            for (int c = 0; c < 3; ++c) payload.push_back(float(f.m[a][c]));
        for (int a = 0; a < 3; ++a) payload.push_back(float(f.t[a]));
    }
    os.write(reinterpret_cast<const char*>(payload.data()),
             std::streamsize(payload.size() * sizeof(float)));
    if (!os) throw Error(ErrorCode::IoError, "short write: " + path);
}

inline FrameGrid load_field(const std::string& path, double eps_void = 0.01,
                            double eps_solid = 0.99) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error(ErrorCode::IoError, "cannot open: " + path);
    std::string line;
    if (!std::getline(is, line))
        throw Error(ErrorCode::MalformedHeader, "missing header line in " + path);
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedHeader, std::string("bad header JSON: ") + e.what());
    }
    if (!header.contains("dims") || !header.contains("spacing") || !header.contains("origin") ||
        header.value("version", 0) != 1)
        throw Error(ErrorCode::MalformedHeader, "header missing dims/spacing/origin/version");
    const auto dims_j = header["dims"];
    if (!dims_j.is_array() || dims_j.size() != 3)
        throw Error(ErrorCode::MalformedHeader, "dims must be a 3-array");
    GridSpec spec;
    spec.dims = {dims_j[0].get<int>(), dims_j[1].get<int>(), dims_j[2].get<int>()};
    if (spec.dims.x <= 0 || spec.dims.y <= 0 || spec.dims.z <= 0)
        throw Error(ErrorCode::MalformedHeader, "non-positive dims");
    spec.spacing = header["spacing"].get<double>();
    if (!(spec.spacing > 0.0)) throw Error(ErrorCode::MalformedHeader, "non-positive spacing");
    spec.origin = {header["origin"][0].get<double>(), header["origin"][1].get<double>(),
                   header["origin"][2].get<double>()};

    const std::size_t n = spec.voxel_count();
    std::vector<float> payload(n * 12);
    is.read(reinterpret_cast<char*>(payload.data()), std::streamsize(payload.size() * sizeof(float)));
    if (std::size_t(is.gcount()) != payload.size() * sizeof(float))
        throw Error(ErrorCode::DimensionMismatch,
                    "payload shorter than dims announce in " + path);
    // trailing bytes also indicate a header/payload mismatch
    char extra;
    if (is.read(&extra, 1); is.gcount() != 0)
        throw Error(ErrorCode::DimensionMismatch, "payload longer than dims announce in " + path);

    FrameGrid g(spec, eps_void, eps_solid);
    for (std::size_t v = 0; v < n; ++v) {
        Frame f;
        const float* rec = payload.data() + v * 12;
        for (int a = 0; a < 3; ++a) f.m[a] = {rec[3 * a], rec[3 * a + 1], rec[3 * a + 2]};
        f.t = {rec[9], rec[10], rec[11]};
        for (int a = 0; a < 3; ++a) {
            if (std::abs(norm(f.m[a]) - 1.0) > 1e-4)
                throw Error(ErrorCode::NonOrthogonalFrame, "non-unit frame vector at voxel " +
                                                               std::to_string(v));
            if (std::abs(dot(f.m[a], f.m[(a + 1) % 3])) > 1e-4)
                throw Error(ErrorCode::NonOrthogonalFrame,
                            "frame vectors not orthogonal at voxel " + std::to_string(v));
        }
        g.at(v) = f;
    }
    g.reclassify();
    return g;
}

// Content hash of a grid (header plus float32 payload), used in manifests.
inline std::uint64_t field_hash(const FrameGrid& g) {
    std::uint64_t h = fnv1a(&g.spec().dims, sizeof(Index3));
    h = fnv1a(&g.spec().spacing, sizeof(double), h);
    h = fnv1a(&g.spec().origin, sizeof(Vec3), h);
    for (const Frame& f : g.frames()) {
        float rec[12];
        for (int a = 0; a < 3; ++a)
            for (int c = 0; c < 3; ++c) rec[3 * a + c] = float(f.m[a][c]);
        for (int a = 0; a < 3; ++a) rec[9 + a] = float(f.t[a]);
        h = fnv1a(rec, sizeof(rec), h);
    }
    return h;
}

}  // namespace lamina
