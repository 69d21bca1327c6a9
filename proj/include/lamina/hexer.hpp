#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "lamina/spatial_hash.hpp"
#include "lamina/tracer.hpp"

namespace lamina {

enum class VertexClass : std::uint8_t { Dropped = 0, Surface = 1, Intersection = 2, Triple = 3 };

// Proximity graph over the union of all surface points: an edge joins two
// points closer than 2r. Vertices are classed by how many distinct surfaces
// appear in their closed neighborhood.
struct ProximityGraph {
    std::vector<Vec3> points;
    std::vector<int> surface_of;
    std::vector<std::uint32_t> adj;
    std::vector<std::uint32_t> adj_start;  // CSR, size points+1
    std::vector<VertexClass> classes;
    double r = 0.0;
    std::size_t dropped = 0;  // vertices over the 4r separation budget (non-strict)

    std::size_t size() const { return points.size(); }
    auto neighbors(std::size_t v) const {
        return std::pair{adj.begin() + adj_start[v], adj.begin() + adj_start[v + 1]};
    }
};

// Build the graph. Stream surfaces following the same lamination direction
// must stay 4r apart; a vertex whose neighborhood spans four or more surfaces
// violates that. strict raises SeparationViolation, otherwise the offending
// vertices are dropped (leaving a gap) and counted.
inline ProximityGraph build_proximity_graph(const std::vector<StreamSurface>& surfaces, double r,
                                            bool strict = true) {
    ProximityGraph g;
    g.r = r;
    for (std::size_t si = 0; si < surfaces.size(); ++si)
        for (const Vec3& p : surfaces[si].points) {
            g.points.push_back(p);
            g.surface_of.push_back(int(si));
        }

    PDSIndex index(2.0 * r);
    for (const Vec3& p : g.points) index.insert(p);

    const std::size_t n = g.points.size();
    const double lim2 = 4.0 * r * r;
    std::vector<std::vector<std::uint32_t>> adj(n);
    for (std::size_t v = 0; v < n; ++v) {
        for (std::uint32_t u : index.query(g.points[v], 2.0 * r)) {
            if (u == v) continue;
            if (norm2(g.points[u] - g.points[v]) < lim2) adj[v].push_back(u);
        }
    }

    g.classes.assign(n, VertexClass::Surface);
    std::vector<std::uint8_t> alive(n, 1);
    // dropping a vertex can only lower its neighbors' surface counts, so the
    // fixpoint is reached monotonically
    for (bool changed = true; changed;) {
        changed = false;
        for (std::size_t v = 0; v < n; ++v) {
            if (!alive[v]) continue;
            std::set<int> srf{g.surface_of[v]};
            for (std::uint32_t u : adj[v])
                if (alive[u]) srf.insert(g.surface_of[u]);
            if (srf.size() >= 4) {
                if (strict)
                    throw Error(ErrorCode::SeparationViolation,
                                "vertex sees " + std::to_string(srf.size()) +
                                    " surfaces; surfaces are closer than the 4r minimum");
                alive[v] = 0;
                ++g.dropped;
                changed = true;
            }
        }
    }
    for (std::size_t v = 0; v < n; ++v) {
        if (!alive[v]) {
            g.classes[v] = VertexClass::Dropped;
            continue;
        }
        std::set<int> srf{g.surface_of[v]};
        for (std::uint32_t u : adj[v])
            if (alive[u]) srf.insert(g.surface_of[u]);
        g.classes[v] = srf.size() == 1   ? VertexClass::Surface
                       : srf.size() == 2 ? VertexClass::Intersection
                                         : VertexClass::Triple;
    }

    g.adj_start.assign(n + 1, 0);
    for (std::size_t v = 0; v < n; ++v) {
        if (alive[v])
            for (std::uint32_t u : adj[v])
                if (alive[u]) ++g.adj_start[v + 1];
    }
    for (std::size_t v = 0; v < n; ++v) g.adj_start[v + 1] += g.adj_start[v];
    g.adj.resize(g.adj_start.back());
    std::vector<std::uint32_t> cursor(g.adj_start.begin(), g.adj_start.end() - 1);
    for (std::size_t v = 0; v < n; ++v) {
        if (!alive[v]) continue;
        for (std::uint32_t u : adj[v])
            if (alive[u]) g.adj[cursor[v]++] = u;
    }
    return g;
}

// Spatial twist continuum graph: one vertex per connected cluster of triple
// intersection points, edges from intersection curves connecting clusters.
struct STCGraph {
    std::vector<Vec3> positions;              // cluster barycenters
    std::vector<std::uint32_t> cluster_size;  // member triple points
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
};

inline STCGraph build_stc(const ProximityGraph& g) {
    const std::size_t n = g.size();
    constexpr std::uint32_t kNone = 0xffffffffu;
    std::vector<std::uint32_t> cluster(n, kNone);

    // connected components of triple vertices
    std::uint32_t n_clusters = 0;
    std::vector<std::uint32_t> stack;
    for (std::size_t v = 0; v < n; ++v) {
        if (g.classes[v] != VertexClass::Triple || cluster[v] != kNone) continue;
        const std::uint32_t id = n_clusters++;
        stack.assign(1, std::uint32_t(v));
        cluster[v] = id;
        while (!stack.empty()) {
            const std::uint32_t a = stack.back();
            stack.pop_back();
            auto [b, e] = g.neighbors(a);
            for (auto it = b; it != e; ++it) {
                if (g.classes[*it] == VertexClass::Triple && cluster[*it] == kNone) {
                    cluster[*it] = id;
                    stack.push_back(*it);
                }
            }
        }
    }
    if (n_clusters == 0)
        throw Error(ErrorCode::NoTripleIntersections,
                    "no triple intersection points; hex meshing impossible");

    STCGraph stc;
    stc.positions.assign(n_clusters, Vec3{});
    stc.cluster_size.assign(n_clusters, 0);
    for (std::size_t v = 0; v < n; ++v) {
        if (g.classes[v] != VertexClass::Triple) continue;
        stc.positions[cluster[v]] += g.points[v];
        ++stc.cluster_size[cluster[v]];
    }
    for (std::uint32_t c = 0; c < n_clusters; ++c)
        stc.positions[c] = stc.positions[c] / double(stc.cluster_size[c]);

    // multi-source Dijkstra over intersection vertices, seeded at distance 0
    // from every triple cluster; each reached vertex remembers its origin
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    using QItem = std::pair<double, std::uint32_t>;
    std::priority_queue<QItem, std::vector<QItem>, std::greater<>> queue;
    for (std::size_t v = 0; v < n; ++v) {
        if (g.classes[v] == VertexClass::Triple) {
            dist[v] = 0.0;
            queue.emplace(0.0, std::uint32_t(v));
        }
    }
    while (!queue.empty()) {
        const auto [d, v] = queue.top();
        queue.pop();
        if (d > dist[v]) continue;
        auto [b, e] = g.neighbors(v);
        for (auto it = b; it != e; ++it) {
            const std::uint32_t u = *it;
            if (g.classes[u] != VertexClass::Intersection) continue;
            const double nd = d + norm(g.points[u] - g.points[v]);
            if (nd < dist[u]) {
                dist[u] = nd;
                cluster[u] = cluster[v];
                queue.emplace(nd, u);
            }
        }
    }

    // every edge joining vertices reached from different clusters dualizes to
    // an STC edge
    std::set<std::pair<std::uint32_t, std::uint32_t>> edge_set;
    for (std::size_t v = 0; v < n; ++v) {
        if (cluster[v] == kNone) continue;
        auto [b, e] = g.neighbors(v);
        for (auto it = b; it != e; ++it) {
            const std::uint32_t u = *it;
            if (u <= v || cluster[u] == kNone) continue;
            if (cluster[u] == cluster[v]) continue;
            edge_set.emplace(std::min(cluster[v], cluster[u]), std::max(cluster[v], cluster[u]));
        }
    }
    stc.edges.assign(edge_set.begin(), edge_set.end());
    return stc;
}

struct HexMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<std::uint32_t, 8>> cells;  // VTK hexahedron ordering
};

namespace detail {

inline constexpr double kHexCorner[8][3] = {
    {-1, -1, -1}, {1, -1, -1}, {1, 1, -1}, {-1, 1, -1},
    {-1, -1, 1},  {1, -1, 1},  {1, 1, 1},  {-1, 1, 1},
};
// faces in +x,-x,+y,-y,+z,-z order with their corner ids
inline constexpr int kHexFace[6][4] = {
    {1, 2, 6, 5}, {0, 3, 7, 4}, {2, 3, 7, 6}, {0, 1, 5, 4}, {4, 5, 6, 7}, {0, 1, 2, 3},
};

// Rotation best aligning the cube axes with the bundle of incident edge
// directions: alternate nearest-signed-axis assignment with an orthogonal
// Procrustes solve.
inline Mat3 fit_cube_rotation(const std::vector<Vec3>& dirs) {
    if (dirs.empty()) return Mat3::identity();
    Mat3 R = Mat3::identity();
    for (int pass = 0; pass < 8; ++pass) {
        Eigen::Matrix3d B = Eigen::Matrix3d::Zero();
        for (const Vec3& d : dirs) {
            // assign d to the closest signed axis of R
            int best_axis = 0;
            double best_dot = 0.0;
            for (int a = 0; a < 3; ++a) {
                const double da = dot(d, R.col[a]);
                if (std::abs(da) > std::abs(best_dot)) {
                    best_dot = da;
                    best_axis = a;
                }
            }
            const double s = best_dot >= 0.0 ? 1.0 : -1.0;
            for (int row = 0; row < 3; ++row) B(row, best_axis) += s * d[row];
        }
        Eigen::JacobiSVD<Eigen::Matrix3d> svd(B, Eigen::ComputeFullU | Eigen::ComputeFullV);
        Eigen::Matrix3d U = svd.matrixU(), V = svd.matrixV();
        Eigen::Matrix3d Rn = U * V.transpose();
        if (Rn.determinant() < 0.0) {
            U.col(2) *= -1.0;
            Rn = U * V.transpose();
        }
        Mat3 next;
        for (int c = 0; c < 3; ++c) next.col[c] = {Rn(0, c), Rn(1, c), Rn(2, c)};
        R = next;
    }
    return R;
}

}  // namespace detail

struct DualizeStats {
    std::size_t face_conflicts = 0;  // edges that lost a contested quad face
};

// Dual hexahedralization: one cube per STC vertex, scaled to the mean
// incident edge length and rotated onto the incident edge bundle; per STC
// edge the best-aligned quad faces of its two cubes are paired and their
// corners merged (union-find, clusters up to eight), final vertices at
// cluster barycenters.
inline HexMesh dualize(const STCGraph& stc, double fallback_size = 1.0, bool strict = true,
                       DualizeStats* stats = nullptr) {
    const std::size_t nv = stc.positions.size();
    std::vector<std::vector<std::uint32_t>> incident(nv);
    for (std::uint32_t e = 0; e < stc.edges.size(); ++e) {
        incident[stc.edges[e].first].push_back(e);
        incident[stc.edges[e].second].push_back(e);
    }

    std::vector<Mat3> rot(nv);
    std::vector<double> size(nv);
    for (std::size_t v = 0; v < nv; ++v) {
        std::vector<Vec3> dirs;
        double mean_len = 0.0;
        for (std::uint32_t e : incident[v]) {
            const auto [a, b] = stc.edges[e];
            const std::uint32_t other = a == v ? b : a;
            const Vec3 d = stc.positions[other] - stc.positions[v];
            const double len = norm(d);
            if (len < 1e-15) continue;
            dirs.push_back(d / len);
            mean_len += len;
        }
        size[v] = dirs.empty() ? fallback_size : mean_len / double(dirs.size());
        rot[v] = detail::fit_cube_rotation(dirs);
    }

    // corner positions, 8 per hex
    std::vector<Vec3> corner(nv * 8);
    for (std::size_t v = 0; v < nv; ++v)
        for (int c = 0; c < 8; ++c) {
            const Vec3 local{detail::kHexCorner[c][0], detail::kHexCorner[c][1],
                             detail::kHexCorner[c][2]};
            corner[v * 8 + c] = stc.positions[v] + rot[v] * (local * (0.5 * size[v]));
        }

    // face claims: each STC edge wants the best-aligned face of both hexes
    struct Claim {
        std::uint32_t edge;
        int face_a, face_b;
        double align;
    };
    std::vector<Claim> claims(stc.edges.size());
    std::map<std::pair<std::uint32_t, int>, std::vector<std::uint32_t>> face_claims;
    for (std::uint32_t e = 0; e < stc.edges.size(); ++e) {
        const auto [a, b] = stc.edges[e];
        Vec3 d = stc.positions[b] - stc.positions[a];
        const double len = norm(d);
        d = len > 1e-15 ? d / len : Vec3{1, 0, 0};
        auto best_face = [&](std::uint32_t h, const Vec3& dir) {
            int best = 0;
            double bd = -2.0;
            for (int f = 0; f < 6; ++f) {
                const int axis = f / 2;
                const double sgn = f % 2 == 0 ? 1.0 : -1.0;
                const double al = sgn * dot(rot[h].col[axis], dir);
                if (al > bd) {
                    bd = al;
                    best = f;
                }
            }
            return std::pair{best, bd};
        };
        const auto [fa, aa] = best_face(a, d);
        const auto [fb, ab] = best_face(b, -d);
        claims[e] = {e, fa, fb, std::min(aa, ab)};
        face_claims[{a, fa}].push_back(e);
        face_claims[{b, fb}].push_back(e);
    }
    std::vector<std::uint8_t> edge_ok(stc.edges.size(), 1);
    for (const auto& [key, list] : face_claims) {
        if (list.size() < 2) continue;
        if (strict)
            throw Error(ErrorCode::FacePairingConflict,
                        "quad face claimed by " + std::to_string(list.size()) + " STC edges");
        // keep the best-aligned claim, deterministically
        std::uint32_t keep = list.front();
        for (std::uint32_t e : list)
            if (claims[e].align > claims[keep].align ||
                (claims[e].align == claims[keep].align && e < keep))
                keep = e;
        for (std::uint32_t e : list)
            if (e != keep) edge_ok[e] = 0;
    }
    if (stats) {
        stats->face_conflicts = 0;
        for (auto ok : edge_ok) stats->face_conflicts += ok ? 0 : 1;
    }

    // union-find over hex corners via the face pairings
    std::vector<std::uint32_t> parent(nv * 8);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](std::uint32_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    auto unite = [&](std::uint32_t x, std::uint32_t y) {
        x = find(x);
        y = find(y);
        if (x != y) parent[std::max(x, y)] = std::min(x, y);
    };
    for (std::uint32_t e = 0; e < stc.edges.size(); ++e) {
        if (!edge_ok[e]) continue;
        const auto [a, b] = stc.edges[e];
        const int fa = claims[e].face_a, fb = claims[e].face_b;
        // match the 4+4 face corners by minimal total distance
        std::array<std::uint32_t, 4> ca, cb;
        for (int i = 0; i < 4; ++i) {
            ca[i] = std::uint32_t(a * 8 + detail::kHexFace[fa][i]);
            cb[i] = std::uint32_t(b * 8 + detail::kHexFace[fb][i]);
        }
        std::array<int, 4> perm = {0, 1, 2, 3}, best_perm = perm;
        double best_cost = std::numeric_limits<double>::infinity();
        std::sort(perm.begin(), perm.end());
        do {
            double cost = 0.0;
            for (int i = 0; i < 4; ++i) cost += norm2(corner[ca[i]] - corner[cb[perm[i]]]);
            if (cost < best_cost) {
                best_cost = cost;
                best_perm = perm;
            }
        } while (std::next_permutation(perm.begin(), perm.end()));
        for (int i = 0; i < 4; ++i) unite(ca[i], cb[best_perm[i]]);
    }

    // cluster barycenters become the final vertices
    std::vector<std::uint32_t> root_vertex(nv * 8, 0xffffffffu);
    HexMesh mesh;
    std::vector<Vec3> acc;
    std::vector<std::uint32_t> cnt;
    for (std::uint32_t c = 0; c < nv * 8; ++c) {
        const std::uint32_t r = find(c);
        if (root_vertex[r] == 0xffffffffu) {
            root_vertex[r] = std::uint32_t(acc.size());
            acc.push_back(Vec3{});
            cnt.push_back(0);
        }
        acc[root_vertex[r]] += corner[c];
        ++cnt[root_vertex[r]];
    }
    mesh.vertices.resize(acc.size());
    for (std::size_t i = 0; i < acc.size(); ++i) mesh.vertices[i] = acc[i] / double(cnt[i]);
    mesh.cells.resize(nv);
    for (std::size_t v = 0; v < nv; ++v)
        for (int c = 0; c < 8; ++c) mesh.cells[v][c] = root_vertex[find(std::uint32_t(v * 8 + c))];
    return mesh;
}

// Minimum over the eight corners of the determinant of the normalized edge
// triple, ordered so a reference cube scores +1 everywhere.
inline double scaled_jacobian(const std::array<Vec3, 8>& c) {
    static constexpr int kCornerEdges[8][3] = {
        {1, 3, 4}, {2, 0, 5}, {3, 1, 6}, {0, 2, 7}, {7, 5, 0}, {4, 6, 1}, {5, 7, 2}, {6, 4, 3},
    };
    double min_det = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 8; ++k) {
        Vec3 e[3];
        for (int j = 0; j < 3; ++j) {
            e[j] = c[kCornerEdges[k][j]] - c[k];
            const double len = norm(e[j]);
            if (len < 1e-15)
                throw Error(ErrorCode::DegenerateCell, "coincident hexahedron corners");
            e[j] = e[j] / len;
        }
        min_det = std::min(min_det, dot(e[0], cross(e[1], e[2])));
    }
    return min_det;
}

inline double scaled_jacobian(const HexMesh& mesh, std::size_t cell) {
    std::array<Vec3, 8> c;
    for (int i = 0; i < 8; ++i) c[i] = mesh.vertices[mesh.cells[cell][i]];
    return scaled_jacobian(c);
}

struct QualityReport {
    double min_scaled_jacobian = 0.0;
    double mean_scaled_jacobian = 0.0;
    std::size_t cell_count = 0;
    std::size_t nonconforming_faces = 0;
};

inline QualityReport mesh_quality_report(const HexMesh& mesh) {
    QualityReport rep;
    rep.cell_count = mesh.cells.size();
    if (mesh.cells.empty()) return rep;
    double sum = 0.0;
    rep.min_scaled_jacobian = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < mesh.cells.size(); ++c) {
        const double sj = scaled_jacobian(mesh, c);
        sum += sj;
        rep.min_scaled_jacobian = std::min(rep.min_scaled_jacobian, sj);
    }
    rep.mean_scaled_jacobian = sum / double(mesh.cells.size());

    // conformity: any two cells sharing >= 4 vertices must share them as a
    // whole quad face of both
    std::vector<std::set<std::array<std::uint32_t, 4>>> cell_faces(mesh.cells.size());
    for (std::size_t c = 0; c < mesh.cells.size(); ++c)
        for (const auto& f : detail::kHexFace) {
            std::array<std::uint32_t, 4> key{mesh.cells[c][f[0]], mesh.cells[c][f[1]],
                                             mesh.cells[c][f[2]], mesh.cells[c][f[3]]};
            std::sort(key.begin(), key.end());
            cell_faces[c].insert(key);
        }
    std::map<std::uint32_t, std::vector<std::uint32_t>> vertex_cells;
    for (std::size_t c = 0; c < mesh.cells.size(); ++c) {
        std::set<std::uint32_t> uniq(mesh.cells[c].begin(), mesh.cells[c].end());
        for (std::uint32_t v : uniq) vertex_cells[v].push_back(std::uint32_t(c));
    }
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::vector<std::uint32_t>> pair_shared;
    for (const auto& [v, cells] : vertex_cells)
        for (std::size_t i = 0; i < cells.size(); ++i)
            for (std::size_t j = i + 1; j < cells.size(); ++j)
                pair_shared[{cells[i], cells[j]}].push_back(v);
    for (const auto& [pair, shared] : pair_shared) {
        if (shared.size() < 4) continue;
        bool ok = false;
        if (shared.size() == 4) {
            std::array<std::uint32_t, 4> key{shared[0], shared[1], shared[2], shared[3]};
            std::sort(key.begin(), key.end());
            ok = cell_faces[pair.first].count(key) && cell_faces[pair.second].count(key);
        }
        if (!ok) ++rep.nonconforming_faces;
    }
    return rep;
}

inline void save_vtk(const HexMesh& mesh, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(ErrorCode::IoError, "cannot open for write: " + path);
    os << "# vtk DataFile Version 3.0\nhex mesh\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    os << "POINTS " << mesh.vertices.size() << " double\n";
    char buf[128];
    for (const Vec3& v : mesh.vertices) {
        std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g\n", v.x, v.y, v.z);
        os << buf;
    }
    os << "CELLS " << mesh.cells.size() << " " << mesh.cells.size() * 9 << "\n";
    for (const auto& c : mesh.cells) {
        os << "8";
        for (std::uint32_t v : c) os << " " << v;
        os << "\n";
    }
    os << "CELL_TYPES " << mesh.cells.size() << "\n";
    for (std::size_t i = 0; i < mesh.cells.size(); ++i) os << "12\n";
    if (!os) throw Error(ErrorCode::IoError, "short write: " + path);
}

inline void save_medit(const HexMesh& mesh, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(ErrorCode::IoError, "cannot open for write: " + path);
    os << "MeshVersionFormatted 2\nDimension\n3\nVertices\n" << mesh.vertices.size() << "\n";
    char buf[160];
    for (const Vec3& v : mesh.vertices) {
        std::snprintf(buf, sizeof(buf), "%.17g %.17g %.17g 0\n", v.x, v.y, v.z);
        os << buf;
    }
    os << "Hexahedra\n" << mesh.cells.size() << "\n";
    for (const auto& c : mesh.cells) {
        for (int i = 0; i < 8; ++i) os << c[i] + 1 << (i == 7 ? "" : " ");
        os << " 0\n";
    }
    os << "End\n";
    if (!os) throw Error(ErrorCode::IoError, "short write: " + path);
}

inline void save_quality_report(const QualityReport& rep, const std::string& path) {
    nlohmann::json j = {
        {"min_scaled_jacobian", rep.min_scaled_jacobian},
        {"mean_scaled_jacobian", rep.mean_scaled_jacobian},
        {"cell_count", rep.cell_count},
        {"nonconforming_faces", rep.nonconforming_faces},
    };
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(ErrorCode::IoError, "cannot open for write: " + path);
    os << j.dump(2) << "\n";
}

}  // namespace lamina
