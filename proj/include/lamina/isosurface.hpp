#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "lamina/splatter.hpp"

namespace lamina {

struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<std::uint32_t, 3>> triangles;
};

namespace detail {

// Kuhn subdivision of the cube into six tetrahedra around the main diagonal
// c0-c6. Every cube uses the same pattern, so shared faces triangulate
// identically and the extracted mesh is watertight.
inline constexpr int kTetCorners[6][4] = {
    {0, 1, 2, 6}, {0, 2, 3, 6}, {0, 3, 7, 6}, {0, 7, 4, 6}, {0, 4, 5, 6}, {0, 5, 1, 6},
};
inline constexpr int kCubeOffset[8][3] = {
    {0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0}, {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1},
};

}  // namespace detail

// Triangle mesh of the iso level set of the trilinear occupancy field, by
// marching tetrahedra over the voxel-center lattice. Vertices sit on lattice
// edges, so they are within one voxel diagonal of the true level set.
// Triangles are oriented with the normal pointing toward lower occupancy.
inline TriMesh extract_isosurface(const VoxelVolume& vol, double iso = 0.5) {
    const GridSpec& spec = vol.spec;
    TriMesh mesh;
    std::unordered_map<std::uint64_t, std::uint32_t> edge_vertex;

    auto node_id = [&](int i, int j, int k) -> std::uint64_t {
        return (std::uint64_t(k) * spec.dims.y + j) * spec.dims.x + i;
    };
    auto vertex_on_edge = [&](std::uint64_t a, std::uint64_t b, const Vec3& pa, const Vec3& pb,
                              double va, double vb) -> std::uint32_t {
        const std::uint64_t key = a < b ? (a << 32 | b) : (b << 32 | a);
        const auto it = edge_vertex.find(key);
        if (it != edge_vertex.end()) return it->second;
        const double t = (iso - va) / (vb - va);
        const Vec3 p = pa + (pb - pa) * std::clamp(t, 0.0, 1.0);
        const auto id = std::uint32_t(mesh.vertices.size());
        mesh.vertices.push_back(p);
        edge_vertex.emplace(key, id);
        return id;
    };
    auto emit = [&](std::uint32_t a, std::uint32_t b, std::uint32_t c, const Vec3& toward_out) {
        const Vec3& pa = mesh.vertices[a];
        const Vec3 n = cross(mesh.vertices[b] - pa, mesh.vertices[c] - pa);
        if (0.5 * norm(n) <= 1e-12) return;  // degenerate sliver
        if (dot(n, toward_out) < 0.0)
            mesh.triangles.push_back({a, c, b});
        else
            mesh.triangles.push_back({a, b, c});
    };

    for (int k = 0; k + 1 < spec.dims.z; ++k)
        for (int j = 0; j + 1 < spec.dims.y; ++j)
            for (int i = 0; i + 1 < spec.dims.x; ++i) {
                double val[8];
                Vec3 pos[8];
                std::uint64_t nid[8];
                bool any_in = false, any_out = false;
                for (int c = 0; c < 8; ++c) {
                    const int ci = i + detail::kCubeOffset[c][0];
                    const int cj = j + detail::kCubeOffset[c][1];
                    const int ck = k + detail::kCubeOffset[c][2];
                    val[c] = vol.at(ci, cj, ck);
                    pos[c] = spec.voxel_center(ci, cj, ck);
                    nid[c] = node_id(ci, cj, ck);
                    (val[c] >= iso ? any_in : any_out) = true;
                }
                if (!any_in || !any_out) continue;
                for (const auto& tet : detail::kTetCorners) {
                    int inside[4], outside[4];
                    int ni = 0, no = 0;
                    for (int c = 0; c < 4; ++c) {
                        if (val[tet[c]] >= iso)
                            inside[ni++] = tet[c];
                        else
                            outside[no++] = tet[c];
                    }
                    if (ni == 0 || ni == 4) continue;
                    auto ev = [&](int a, int b) {
                        return vertex_on_edge(nid[a], nid[b], pos[a], pos[b], val[a], val[b]);
                    };
                    if (ni == 1) {
                        const int a = inside[0];
                        const Vec3 out_c = (pos[outside[0]] + pos[outside[1]] + pos[outside[2]]) / 3.0;
                        emit(ev(a, outside[0]), ev(a, outside[1]), ev(a, outside[2]),
                             out_c - pos[a]);
                    } else if (ni == 3) {
                        const int d = outside[0];
                        const Vec3 in_c = (pos[inside[0]] + pos[inside[1]] + pos[inside[2]]) / 3.0;
                        emit(ev(inside[0], d), ev(inside[1], d), ev(inside[2], d), pos[d] - in_c);
                    } else {
                        // two in, two out: quad on the four mixed edges
                        const int a = inside[0], b = inside[1];
                        const int c = outside[0], d = outside[1];
                        const Vec3 toward = (pos[c] + pos[d]) * 0.5 - (pos[a] + pos[b]) * 0.5;
                        const std::uint32_t vac = ev(a, c), vad = ev(a, d);
                        const std::uint32_t vbc = ev(b, c), vbd = ev(b, d);
                        emit(vac, vad, vbd, toward);
                        emit(vac, vbd, vbc, toward);
                    }
                }
            }
    if (mesh.triangles.empty())
        throw Error(ErrorCode::EmptySurface, "volume never crosses the iso value");
    return mesh;
}

inline void save_obj(const TriMesh& mesh, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(ErrorCode::IoError, "cannot open for write: " + path);
    os << "# triangle mesh, " << mesh.vertices.size() << " vertices, " << mesh.triangles.size()
       << " triangles\n";
    char buf[128];
    for (const Vec3& v : mesh.vertices) {
        std::snprintf(buf, sizeof(buf), "v %.9g %.9g %.9g\n", v.x, v.y, v.z);
        os << buf;
    }
    for (const auto& t : mesh.triangles)
        os << "f " << t[0] + 1 << " " << t[1] + 1 << " " << t[2] + 1 << "\n";
    if (!os) throw Error(ErrorCode::IoError, "short write: " + path);
}

}  // namespace lamina
