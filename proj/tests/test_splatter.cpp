#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <random>
#include <set>

#include "lamina/isosurface.hpp"
#include "lamina/splatter.hpp"
#include "support/fixtures.hpp"

using namespace lamina;

namespace {

// mesh topology helpers for closedness / Euler characteristic checks
struct MeshTopology {
    int components = 0;
    std::vector<int> euler;          // per component
    std::size_t boundary_edges = 0;  // edges with exactly one incident triangle
    bool closed() const { return boundary_edges == 0; }
};

MeshTopology analyze(const TriMesh& mesh) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, int> edge_count;
    std::vector<int> comp(mesh.vertices.size(), -1);
    // union-find over triangle vertices
    std::vector<std::uint32_t> parent(mesh.vertices.size());
    for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = std::uint32_t(i);
    auto find = [&](std::uint32_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (const auto& t : mesh.triangles) {
        for (int e = 0; e < 3; ++e) {
            const std::uint32_t a = t[e], b = t[(e + 1) % 3];
            ++edge_count[{std::min(a, b), std::max(a, b)}];
            const std::uint32_t ra = find(a), rb = find(b);
            if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
        }
    }
    MeshTopology topo;
    std::map<std::uint32_t, int> comp_id;
    for (const auto& t : mesh.triangles) {
        const std::uint32_t root = find(t[0]);
        if (!comp_id.count(root)) comp_id[root] = topo.components++;
    }
    std::vector<std::set<std::uint32_t>> verts(topo.components);
    std::vector<std::size_t> faces(topo.components, 0), edges(topo.components, 0);
    for (const auto& t : mesh.triangles) {
        const int c = comp_id[find(t[0])];
        ++faces[c];
        for (std::uint32_t v : t) verts[c].insert(v);
    }
    for (const auto& [edge, cnt] : edge_count) {
        const int c = comp_id[find(edge.first)];
        ++edges[c];
        if (cnt == 1) ++topo.boundary_edges;
    }
    for (int c = 0; c < topo.components; ++c)
        topo.euler.push_back(int(verts[c].size()) - int(edges[c]) + int(faces[c]));
    return topo;
}

}  // namespace

TEST_CASE("smoothstep endpoints, midpoint and reparametrization") {
    CHECK(smoothstep(0, 1, 0) == 0.0);
    CHECK(smoothstep(0, 1, 1) == 1.0);
    CHECK(smoothstep(0, 1, 0.5) == 0.5);
    CHECK(smoothstep(-2, 0, -1) == 0.5);
    CHECK(smoothstep(0, 1, -3) == 0.0);
    CHECK(smoothstep(0, 1, 7) == 1.0);
    CHECK_THROWS_AS(smoothstep(1, 1, 0.5), Error);
    CHECK_THROWS_AS(smoothstep(2, 1, 0.5), Error);
}

TEST_CASE("single point splat hits one and decays to the support edge") {
    GridSpec grid{{9, 9, 9}, 1.0, {}};
    StreamSurface s;
    s.r = 2.0;
    s.points = {{4, 4, 4}};
    s.normals = {{0, 0, 1}};
    const double tau = 3.0;
    const VoxelVolume v = splat_surface(s, {tau}, grid, 2.0);
    CHECK(v.at(4, 4, 4) == 1.0f);       // phi = ss(-tau, 0, 0) = 1
    CHECK(v.at(4, 4, 7) == 0.0f);       // axial offset 3 = tau: phi support ends
    CHECK(v.at(6, 4, 4) == 0.0f);       // lateral offset 2 = r: weight support ends
    CHECK(v.at(4, 4, 5) > v.at(4, 4, 6));  // axial decay
    for (float val : v.values) {
        CHECK(val >= 0.0f);
        CHECK(val <= 1.0f);
    }
}

TEST_CASE("densely sampled plane gives the analytic slab profile") {
    GridSpec grid{{40, 40, 40}, 1.0, {}};
    const double tau = 3.0, r = 2.0;
    const auto plane = fixtures::make_plane_cloud(0, {19.5, 19.5, 19.5}, {0, 0, 1}, 41, 41, 1.0);
    const VoxelVolume v = splat_surface(plane, std::vector<double>(plane.points.size(), tau),
                                        grid, r);
    // interior columns: occupancy crosses 0.5 at |z - 19.5| = tau/2
    for (int j = 8; j < 32; j += 3)
        for (int i = 8; i < 32; i += 3) {
            int lo = 40, hi = -1;
            for (int k = 0; k < 40; ++k)
                if (v.at(i, j, k) >= 0.5f) {
                    lo = std::min(lo, k);
                    hi = std::max(hi, k);
                }
            const double width = hi - lo + 1;  // voxels with V >= 0.5
            CHECK(width >= tau - 1.0);
            CHECK(width <= tau + 1.0);
            // compare against the analytic profile away from the crossing
            for (int k = 14; k <= 25; ++k) {
                const double z = std::abs(grid.voxel_center(i, j, k).z - 19.5);
                if (std::abs(z - tau) < 1.5) continue;  // sampling blur near the edge
                const double expect = z >= tau ? 0.0 : smoothstep(-tau, 0.0, -z);
                CHECK(std::abs(v.at(i, j, k) - expect) < 0.08);
            }
        }
}

TEST_CASE("union is a pointwise max with identity and commutativity") {
    GridSpec grid{{12, 12, 12}, 1.0, {}};
    const auto a = fixtures::make_plane_cloud(0, {5.5, 5.5, 4.0}, {0, 0, 1}, 13, 13, 1.0);
    const auto b = fixtures::make_plane_cloud(1, {5.5, 5.5, 7.0}, {0, 1, 0}, 13, 13, 1.0);
    const VoxelVolume va = splat_surface(a, std::vector<double>(a.points.size(), 2.0), grid, 1.5);
    const VoxelVolume vb = splat_surface(b, std::vector<double>(b.points.size(), 2.0), grid, 1.5);
    const VoxelVolume zero = VoxelVolume::zeros(grid);

    const VoxelVolume ident = union_volumes({va, zero});
    CHECK(ident.values == va.values);
    const VoxelVolume self = union_volumes({va, va});
    CHECK(self.values == va.values);
    const VoxelVolume ab = union_volumes({va, vb});
    const VoxelVolume ba = union_volumes({vb, va});
    CHECK(ab.values == ba.values);
    for (std::size_t i = 0; i < ab.values.size(); ++i)
        CHECK(ab.values[i] == std::max(va.values[i], vb.values[i]));
    // monotonicity: adding a surface never decreases occupancy
    for (std::size_t i = 0; i < ab.values.size(); ++i) CHECK(ab.values[i] >= va.values[i]);

    GridSpec other{{12, 12, 12}, 1.0, {1, 0, 0}};
    VoxelVolume mismatched = VoxelVolume::zeros(other);
    CHECK_THROWS_AS(union_volumes({va, mismatched}), Error);
}

TEST_CASE("thickness follows the matched layer scaled by gamma") {
    Frame f;
    f.t = {0.5, 0.25, 0.0};
    const FrameGrid g = make_constant_field({8, 8, 8}, f);
    CHECK(thickness_from_field(g, {4, 4, 4}, {1, 0, 0}, 10.0) == Catch::Approx(5.0));
    CHECK(thickness_from_field(g, {4, 4, 4}, {0, -1, 0}, 10.0) == Catch::Approx(2.5));
    CHECK(thickness_from_field(g, {4, 4, 4}, {0, 0, 1}, 10.0) == Catch::Approx(0.0));
    CHECK_THROWS_AS(thickness_from_field(g, {40, 4, 4}, {1, 0, 0}, 10.0), Error);
}

TEST_CASE("splatting a constant-thickness field yields a uniform wall") {
    Frame f;
    f.t = {0.5, 0.5, 0.5};
    const FrameGrid g = make_constant_field({24, 24, 24}, f);
    const auto plane = fixtures::make_plane_cloud(0, {11.5, 11.5, 11.5}, {0, 0, 1}, 31, 31, 0.8);
    const GridSpec grid = make_output_grid(g.spec(), {24, 24, 24});
    const VoxelVolume v = splat_collection({plane}, g, grid, 8.0, 1.0);
    std::vector<int> widths;
    for (int j = 6; j < 18; j += 2)
        for (int i = 6; i < 18; i += 2) {
            int width = 0;
            for (int k = 0; k < 24; ++k) width += v.at(i, j, k) >= 0.5f;
            widths.push_back(width);
        }
    for (int w : widths) CHECK(w == widths.front());
}

TEST_CASE("solid regions are filled and close the extracted boundary") {
    Frame mixed;
    mixed.t = {0.5, 0.5, 0.5};
    FrameGrid g = make_constant_field({16, 16, 16}, mixed);
    // a solid 4^3 block in the middle
    Frame solid;
    solid.t = {1.0, 1.0, 1.0};
    for (int k = 6; k < 10; ++k)
        for (int j = 6; j < 10; ++j)
            for (int i = 6; i < 10; ++i) g.at(i, j, k) = solid;
    g.reclassify();

    const VoxelVolume empty = VoxelVolume::zeros(g.spec());
    const VoxelVolume filled = fill_solid_regions(empty, g);
    std::size_t ones = 0;
    for (float v : filled.values) ones += v == 1.0f;
    CHECK(ones == 64);

    const FrameGrid uniform = make_constant_field({8, 8, 8}, mixed);
    const VoxelVolume same = fill_solid_regions(empty, g);
    CHECK(fill_solid_regions(VoxelVolume::zeros(uniform.spec()), uniform).values ==
          VoxelVolume::zeros(uniform.spec()).values);

    const TriMesh mesh = extract_isosurface(filled, 0.5);
    const MeshTopology topo = analyze(mesh);
    CHECK(topo.components == 1);
    CHECK(topo.closed());
    CHECK(topo.euler.front() == 2);  // sphere-like box
}

TEST_CASE("isosurface of an empty volume raises EmptySurface") {
    const VoxelVolume v = VoxelVolume::zeros(GridSpec{{8, 8, 8}, 1.0, {}});
    CHECK_THROWS_AS(extract_isosurface(v, 0.5), Error);
}

TEST_CASE("isosurface of a smooth sphere stays within one voxel of the radius") {
    GridSpec grid{{40, 40, 40}, 1.0, {}};
    VoxelVolume v = VoxelVolume::zeros(grid);
    const Vec3 c{19.5, 19.5, 19.5};
    const double R = 12.0;
    for (int k = 0; k < 40; ++k)
        for (int j = 0; j < 40; ++j)
            for (int i = 0; i < 40; ++i) {
                const double d = norm(grid.voxel_center(i, j, k) - c);
                v.at(i, j, k) = float(smoothstep(-2.0, 2.0, R - d));
            }
    const TriMesh mesh = extract_isosurface(v, 0.5);
    REQUIRE(mesh.triangles.size() > 100);
    for (const Vec3& p : mesh.vertices) CHECK(std::abs(norm(p - c) - R) < 1.0);
    const MeshTopology topo = analyze(mesh);
    CHECK(topo.components == 1);
    CHECK(topo.closed());
    CHECK(topo.euler.front() == 2);
}

TEST_CASE("isosurface of a slab is two open sheets") {
    GridSpec grid{{20, 20, 20}, 1.0, {}};
    VoxelVolume v = VoxelVolume::zeros(grid);
    for (int k = 8; k <= 11; ++k)
        for (int j = 0; j < 20; ++j)
            for (int i = 0; i < 20; ++i) v.at(i, j, k) = 1.0f;
    const TriMesh mesh = extract_isosurface(v, 0.5);
    const MeshTopology topo = analyze(mesh);
    CHECK(topo.components == 2);
    for (int chi : topo.euler) CHECK(chi == 1);  // each sheet is a disk
}

TEST_CASE("splat support and translation equivariance") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> pos(6.0, 10.0);
    StreamSurface s;
    s.r = 1.5;
    for (int i = 0; i < 12; ++i) {
        s.points.push_back({pos(rng), pos(rng), pos(rng)});
        s.normals.push_back(normalized(Vec3{pos(rng) - 8.0, pos(rng) - 8.0, 1.0}));
    }
    const std::vector<double> tau(s.points.size(), 2.0);
    GridSpec grid{{16, 16, 16}, 1.0, {}};
    const VoxelVolume v = splat_surface(s, tau, grid, s.r);
    const double reach = std::sqrt(s.r * s.r + 4.0);
    for (int k = 0; k < 16; ++k)
        for (int j = 0; j < 16; ++j)
            for (int i = 0; i < 16; ++i) {
                double nearest = 1e9;
                for (const Vec3& p : s.points)
                    nearest = std::min(nearest, norm(grid.voxel_center(i, j, k) - p));
                if (nearest > reach) CHECK(v.at(i, j, k) == 0.0f);
            }

    const Vec3 shift{3.25, -1.5, 0.75};
    StreamSurface moved = s;
    for (Vec3& p : moved.points) p += shift;
    GridSpec moved_grid = grid;
    moved_grid.origin += shift;
    const VoxelVolume v2 = splat_surface(moved, tau, moved_grid, s.r);
    CHECK(v2.values == v.values);
}
