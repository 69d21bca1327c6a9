#include <catch2/catch_amalgamated.hpp>

#include <deque>
#include <filesystem>
#include <random>

#include "lamina/singularity.hpp"
#include "support/fixtures.hpp"

using namespace lamina;

namespace {

// 6-connected components of the marked voxels
int connected_components(const SingularMask& m, bool* contains_center_column = nullptr) {
    const GridSpec& spec = m.spec;
    std::vector<int> comp(spec.voxel_count(), -1);
    int n_comp = 0;
    const int off[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    for (int k = 0; k < spec.dims.z; ++k)
        for (int j = 0; j < spec.dims.y; ++j)
            for (int i = 0; i < spec.dims.x; ++i) {
                const std::size_t lin = spec.linear(i, j, k);
                if (!m.excluded[lin] || comp[lin] >= 0) continue;
                std::deque<Index3> queue{{i, j, k}};
                comp[lin] = n_comp;
                while (!queue.empty()) {
                    const Index3 v = queue.front();
                    queue.pop_front();
                    for (const auto& o : off) {
                        const int ni = v.x + o[0], nj = v.y + o[1], nk = v.z + o[2];
                        if (!spec.valid_index(ni, nj, nk)) continue;
                        const std::size_t nl = spec.linear(ni, nj, nk);
                        if (m.excluded[nl] && comp[nl] < 0) {
                            comp[nl] = n_comp;
                            queue.push_back({ni, nj, nk});
                        }
                    }
                }
                ++n_comp;
            }
    if (contains_center_column) {
        *contains_center_column = true;
        const int ci = spec.dims.x / 2, cj = spec.dims.y / 2;
        for (int k = 0; k < spec.dims.z; ++k)
            if (!m.excluded[spec.linear(ci, cj, k)]) *contains_center_column = false;
    }
    return n_comp;
}

}  // namespace

TEST_CASE("rotation energy of a constant field vanishes") {
    const FrameGrid g = fixtures::axis_frame_field({6, 5, 4});
    for (double e : rotation_energy(g)) CHECK(e == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("rotation energy of a two-voxel 10 degree pair") {
    const double ang = 10.0 * kPi / 180.0;
    const FrameGrid g = fixtures::two_voxel_rotated(ang);
    const auto energy = rotation_energy(g);
    REQUIRE(energy.size() == 2);
    CHECK(energy[0] == Catch::Approx(ang).epsilon(1e-9));
    CHECK(energy[1] == Catch::Approx(ang).epsilon(1e-9));
}

TEST_CASE("rotation energy decreases with cylinder radius") {
    const FrameGrid g = gen_cylinder_field({33, 33, 33});
    const auto energy = rotation_energy(g);
    const GridSpec& spec = g.spec();
    // interior voxels only: the boundary voxel averages over five neighbors
    for (int i = 19; i < 31; ++i) {
        CHECK(energy[spec.linear(i, 16, 16)] > energy[spec.linear(i + 1, 16, 16)]);
    }
}

TEST_CASE("rotation energy is invariant under a global relabeling") {
    FrameGrid g = gen_cylinder_field({9, 9, 9});
    const auto base = rotation_energy(g);
    FrameGrid relabeled = g;
    for (std::size_t v = 0; v < g.spec().voxel_count(); ++v) {
        Frame f = g.at(v);
        Frame p;
        p.m = {f.m[2] * -1.0, f.m[0], f.m[1] * -1.0};
        p.t = {f.t[2], f.t[0], f.t[1]};
        relabeled.at(v) = p;
    }
    const auto perm = rotation_energy(relabeled);
    for (std::size_t v = 0; v < base.size(); ++v)
        CHECK(perm[v] == Catch::Approx(base[v]).margin(1e-9));
}

TEST_CASE("constant field yields an empty mask; infinite threshold too") {
    const FrameGrid g = fixtures::axis_frame_field({8, 8, 8});
    const auto energy = rotation_energy(g);
    CHECK(detect_singular_voxels(g, energy, 0.5, 0.0).count() == 0);
    const FrameGrid cyl = gen_cylinder_field({17, 17, 9});
    auto no_flags = cyl;
    for (std::size_t v = 0; v < cyl.spec().voxel_count(); ++v) no_flags.set_degenerate(v, false);
    CHECK(detect_singular_voxels(no_flags, rotation_energy(no_flags),
                                 std::numeric_limits<double>::infinity(), 2.0)
              .count() == 0);
}

TEST_CASE("embedded index-1 singularity is detected as one component") {
    const FrameGrid g = gen_embedded_singularity_field({41, 41, 9}, 1);
    const SingularMask mask = compute_singular_mask(g, 3.0, 4.0);
    REQUIRE(mask.count() > 0);
    bool has_column = false;
    CHECK(connected_components(mask, &has_column) == 1);
    CHECK(has_column);
    // everything marked stays near the axis
    const double limit = 5.0 + mask.dilation_radius;
    for (int k = 0; k < 9; ++k)
        for (int j = 0; j < 41; ++j)
            for (int i = 0; i < 41; ++i)
                if (mask.is_excluded(i, j, k)) {
                    const double r = std::hypot(i - 20.0, j - 20.0);
                    CHECK(r <= limit + 1e-9);
                }
}

TEST_CASE("mask monotonicity in k_sigma and dilation identity") {
    const FrameGrid g = gen_embedded_singularity_field({25, 25, 7}, -1);
    const auto energy = rotation_energy(g);
    const SingularMask loose = detect_singular_voxels(g, energy, 1.0, 0.0);
    const SingularMask tight = detect_singular_voxels(g, energy, 4.0, 0.0);
    for (std::size_t v = 0; v < loose.excluded.size(); ++v)
        if (tight.excluded[v]) CHECK(loose.excluded[v]);

    const SingularMask same = dilate(tight, 0.0);
    CHECK(same.excluded == tight.excluded);

    const SingularMask grown = dilate(tight, 2.0);
    std::size_t extra = 0;
    for (std::size_t v = 0; v < grown.excluded.size(); ++v) {
        if (tight.excluded[v]) CHECK(grown.excluded[v]);
        extra += grown.excluded[v] && !tight.excluded[v];
    }
    CHECK(extra > 0);
}

TEST_CASE("mask export writes header plus one byte per voxel") {
    const FrameGrid g = gen_embedded_singularity_field({15, 15, 5}, 1);
    const SingularMask mask = compute_singular_mask(g, 3.0, 2.0);
    const auto path = std::filesystem::temp_directory_path() / "lamina_mask_test.mask";
    save_mask(mask, path.string());
    std::ifstream is(path, std::ios::binary);
    std::string header;
    std::getline(is, header);
    CHECK(header.find("\"dims\":[15,15,5]") != std::string::npos);
    is.seekg(0, std::ios::end);
    CHECK(std::size_t(is.tellg()) == header.size() + 1 + mask.excluded.size());
}
