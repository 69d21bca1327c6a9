#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <set>

#include "lamina/hexer.hpp"
#include "support/fixtures.hpp"

using namespace lamina;

namespace {

std::array<Vec3, 8> unit_cube() {
    return {Vec3{0, 0, 0}, Vec3{1, 0, 0}, Vec3{1, 1, 0}, Vec3{0, 1, 0},
            Vec3{0, 0, 1}, Vec3{1, 0, 1}, Vec3{1, 1, 1}, Vec3{0, 1, 1}};
}

std::size_t count_class(const ProximityGraph& g, VertexClass c) {
    std::size_t n = 0;
    for (auto cls : g.classes) n += cls == c;
    return n;
}

}  // namespace

TEST_CASE("well separated parallel planes stay disconnected") {
    const double r = 1.0;
    std::vector<StreamSurface> planes;
    planes.push_back(fixtures::make_plane_cloud(0, {0, 0, 0}, {0, 0, 1}, 15, 15, r));
    planes.push_back(fixtures::make_plane_cloud(1, {0, 0, 10 * r}, {0, 0, 1}, 15, 15, r));
    const ProximityGraph g = build_proximity_graph(planes, r);
    for (std::size_t v = 0; v < g.size(); ++v) {
        auto [b, e] = g.neighbors(v);
        for (auto it = b; it != e; ++it) CHECK(g.surface_of[*it] == g.surface_of[v]);
    }
    CHECK(count_class(g, VertexClass::Surface) == g.size());
}

TEST_CASE("two orthogonal planes meet along the intersection band") {
    const double r = 1.0;
    std::vector<StreamSurface> planes;
    planes.push_back(fixtures::make_plane_cloud(0, {0, 0, 0}, {0, 0, 1}, 25, 25, r));
    planes.push_back(fixtures::make_plane_cloud(1, {0, 0, 0}, {1, 0, 0}, 25, 25, r));
    const ProximityGraph g = build_proximity_graph(planes, r);
    // plane 0 spans z=0, plane 1 spans x=0: they meet along the y axis
    for (std::size_t v = 0; v < g.size(); ++v) {
        bool cross = false;
        auto [b, e] = g.neighbors(v);
        for (auto it = b; it != e; ++it) cross = cross || g.surface_of[*it] != g.surface_of[v];
        const double line_dist = std::hypot(g.points[v].x, g.points[v].z);
        if (cross) CHECK(line_dist < 2.0 * r + 1e-9);
        if (line_dist > 2.0 * r) CHECK(g.classes[v] == VertexClass::Surface);
        if (line_dist < 1.0 * r) CHECK(g.classes[v] == VertexClass::Intersection);
    }
    CHECK(count_class(g, VertexClass::Intersection) > 0);
    CHECK(count_class(g, VertexClass::Triple) == 0);
}

TEST_CASE("three orthogonal planes create triple vertices but never four") {
    const double r = 1.0;
    std::vector<StreamSurface> planes;
    planes.push_back(fixtures::make_plane_cloud(0, {0, 0, 0}, {1, 0, 0}, 25, 25, r));
    planes.push_back(fixtures::make_plane_cloud(1, {0, 0, 0}, {0, 1, 0}, 25, 25, r));
    planes.push_back(fixtures::make_plane_cloud(2, {0, 0, 0}, {0, 0, 1}, 25, 25, r));
    const ProximityGraph g = build_proximity_graph(planes, r, /*strict=*/true);
    CHECK(count_class(g, VertexClass::Triple) > 0);
    CHECK(g.dropped == 0);

    const STCGraph stc = build_stc(g);
    CHECK(stc.positions.size() == 1);
    CHECK(stc.edges.empty());
    CHECK(norm(stc.positions[0]) < r);
}

TEST_CASE("crowded surfaces violate the 4r separation rule") {
    const double r = 1.0;
    std::vector<StreamSurface> planes;
    for (int i = 0; i < 4; ++i)
        planes.push_back(
            fixtures::make_plane_cloud(i, {0, 0, i * 0.5 * r}, {0, 0, 1}, 9, 9, r));
    CHECK_THROWS_AS(build_proximity_graph(planes, r, /*strict=*/true), Error);
    const ProximityGraph relaxed = build_proximity_graph(planes, r, /*strict=*/false);
    CHECK(relaxed.dropped > 0);
}

TEST_CASE("dual-hex fixture: two hexahedra sharing one quad") {
    const double r = 0.5;
    const auto planes = fixtures::fig7_planes(r, 8.0 * r, 33);
    const ProximityGraph g = build_proximity_graph(planes, r);
    const STCGraph stc = build_stc(g);
    REQUIRE(stc.positions.size() == 2);
    REQUIRE(stc.edges.size() == 1);

    const HexMesh mesh = dualize(stc, 4.0 * r);
    REQUIRE(mesh.cells.size() == 2);
    std::set<std::uint32_t> a(mesh.cells[0].begin(), mesh.cells[0].end());
    std::set<std::uint32_t> b(mesh.cells[1].begin(), mesh.cells[1].end());
    std::vector<std::uint32_t> shared;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(shared));
    CHECK(shared.size() == 4);
    CHECK(mesh_quality_report(mesh).nonconforming_faces == 0);
}

TEST_CASE("manual STC star dualizes to a centered cube") {
    STCGraph stc;
    const double L = 3.0;
    stc.positions.push_back({0, 0, 0});
    for (int axis = 0; axis < 3; ++axis)
        for (double s : {-1.0, 1.0}) {
            Vec3 p{};
            p[axis] = s * L;
            stc.positions.push_back(p);
            stc.edges.emplace_back(0, std::uint32_t(stc.positions.size() - 1));
        }
    stc.cluster_size.assign(stc.positions.size(), 1);
    const HexMesh mesh = dualize(stc, 1.0);
    REQUIRE(mesh.cells.size() == 7);
    // the center cell is a cube with edge length L
    const auto& cell = mesh.cells[0];
    const double edge = norm(mesh.vertices[cell[1]] - mesh.vertices[cell[0]]);
    CHECK(edge == Catch::Approx(L).margin(1e-9));
    CHECK(scaled_jacobian(mesh, 0) == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("plane stacks dualize to structured grids") {
    const double r = 0.5;
    for (int k = 1; k <= 3; ++k) {
        const int planes_per_axis = k + 1;
        const double spacing = 8.0 * r;
        const int extent = int(planes_per_axis * spacing / r) + 9;
        const auto planes = fixtures::plane_stack(planes_per_axis, spacing, r, extent);
        const ProximityGraph g = build_proximity_graph(planes, r);
        const STCGraph stc = build_stc(g);
        const std::size_t m = planes_per_axis;
        CHECK(stc.positions.size() == m * m * m);
        CHECK(stc.edges.size() == 3 * (m - 1) * m * m);

        const HexMesh mesh = dualize(stc, 4.0 * r);
        CHECK(mesh.cells.size() == m * m * m);
        CHECK(mesh.vertices.size() == (m + 1) * (m + 1) * (m + 1));
        const QualityReport rep = mesh_quality_report(mesh);
        CHECK(rep.min_scaled_jacobian == Catch::Approx(1.0).margin(1e-6));
        CHECK(rep.mean_scaled_jacobian == Catch::Approx(1.0).margin(1e-6));
        CHECK(rep.nonconforming_faces == 0);
    }
}

TEST_CASE("removing one plane removes exactly one layer of hexahedra") {
    const double r = 0.5;
    const double spacing = 8.0 * r;
    const int extent = int(3 * spacing / r) + 9;
    auto planes = fixtures::plane_stack(3, spacing, r, extent);
    const std::size_t full = dualize(build_stc(build_proximity_graph(planes, r)), 1.0)
                                 .cells.size();
    planes.pop_back();  // drop the last z plane
    const std::size_t cut = dualize(build_stc(build_proximity_graph(planes, r)), 1.0)
                                .cells.size();
    CHECK(full == 27);
    CHECK(cut == 18);
}

TEST_CASE("scaled jacobian of reference shapes") {
    CHECK(scaled_jacobian(unit_cube()) == Catch::Approx(1.0).margin(1e-12));

    // shear so the x and y edges meet at 60 degrees
    std::array<Vec3, 8> sheared = unit_cube();
    const double c60 = std::cos(kPi / 3.0), s60 = std::sin(kPi / 3.0);
    for (Vec3& p : sheared) p = {p.x + c60 * p.y, s60 * p.y, p.z};
    CHECK(scaled_jacobian(sheared) == Catch::Approx(s60).margin(1e-12));

    std::array<Vec3, 8> inverted = unit_cube();
    std::swap(inverted[0], inverted[1]);
    CHECK(scaled_jacobian(inverted) < 0.0);

    std::array<Vec3, 8> degenerate = unit_cube();
    degenerate[1] = degenerate[0];
    CHECK_THROWS_AS(scaled_jacobian(degenerate), Error);
}

TEST_CASE("scaled jacobian is invariant under rigid motion and scaling") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    std::array<Vec3, 8> base = unit_cube();
    for (Vec3& p : base) p += Vec3{d(rng), d(rng), d(rng)} * 0.2;  // generic hex
    const double sj = scaled_jacobian(base);
    for (int trial = 0; trial < 20; ++trial) {
        const Vec3 axis = normalized(Vec3{d(rng), d(rng), d(rng)});
        const double angle = d(rng) * 3.0;
        const double scale = 0.3 + std::abs(d(rng)) * 4.0;
        const Vec3 shift{d(rng) * 10, d(rng) * 10, d(rng) * 10};
        std::array<Vec3, 8> moved;
        for (int i = 0; i < 8; ++i)
            moved[i] = rotate_about(base[i], axis, angle) * scale + shift;
        CHECK(scaled_jacobian(moved) == Catch::Approx(sj).margin(1e-11));
    }
}

TEST_CASE("quality report on an empty mesh is all zeros") {
    const QualityReport rep = mesh_quality_report(HexMesh{});
    CHECK(rep.cell_count == 0);
    CHECK(rep.min_scaled_jacobian == 0.0);
    CHECK(rep.mean_scaled_jacobian == 0.0);
    CHECK(rep.nonconforming_faces == 0);
}

TEST_CASE("mesh writers emit parseable VTK and MEDIT") {
    const double r = 0.5;
    const auto planes = fixtures::fig7_planes(r, 8.0 * r, 33);
    const HexMesh mesh = dualize(build_stc(build_proximity_graph(planes, r)), 1.0);
    const auto dir = std::filesystem::temp_directory_path() / "lamina_hex_test";
    std::filesystem::create_directories(dir);
    save_vtk(mesh, (dir / "m.vtk").string());
    save_medit(mesh, (dir / "m.mesh").string());

    std::ifstream vtk(dir / "m.vtk");
    std::string text((std::istreambuf_iterator<char>(vtk)), {});
    CHECK(text.find("DATASET UNSTRUCTURED_GRID") != std::string::npos);
    CHECK(text.find("POINTS " + std::to_string(mesh.vertices.size())) != std::string::npos);
    CHECK(text.find("CELL_TYPES 2") != std::string::npos);

    std::ifstream medit(dir / "m.mesh");
    std::string mtext((std::istreambuf_iterator<char>(medit)), {});
    CHECK(mtext.find("Hexahedra\n2") != std::string::npos);
    CHECK(mtext.find("End") != std::string::npos);
}
