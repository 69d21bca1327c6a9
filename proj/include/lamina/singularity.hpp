#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "lamina/field.hpp"

namespace lamina {

namespace detail {

// The 48 signed permutation matrices of the octahedral group, as column
// triples (axis index, sign).
struct SignedPerm {
    std::array<int, 3> axis;
    std::array<double, 3> sign;
    double det;
};

inline const std::vector<SignedPerm>& signed_permutations() {
    static const std::vector<SignedPerm> all = [] {
        std::vector<SignedPerm> v;
        int perms[6][3] = {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}};
        double perm_sign[6] = {1, -1, -1, 1, 1, -1};
        for (int p = 0; p < 6; ++p)
            for (int s = 0; s < 8; ++s) {
                SignedPerm sp;
                sp.axis = {perms[p][0], perms[p][1], perms[p][2]};
                sp.sign = {s & 1 ? -1.0 : 1.0, s & 2 ? -1.0 : 1.0, s & 4 ? -1.0 : 1.0};
                sp.det = perm_sign[p] * sp.sign[0] * sp.sign[1] * sp.sign[2];
                v.push_back(sp);
            }
        return v;
    }();
    return all;
}

}  // namespace detail

// Minimal rotation angle aligning frame a to frame b over all signed
// permutations of b's vectors that yield a proper relative rotation.
inline double frame_alignment_angle(const Frame& a, const Frame& b) {
    const double det_a = a.basis().det();
    const double det_b = b.basis().det();
    const double need = det_a * det_b; // det of admissible permutations
    double best = std::numeric_limits<double>::infinity();
    for (const auto& sp : detail::signed_permutations()) {
        if (sp.det * need < 0.0) continue;
        // R maps a.m[k] -> sign[k] * b.m[axis[k]]; angle from its trace
        double tr = 0.0;
        for (int k = 0; k < 3; ++k) tr += sp.sign[k] * dot(b.m[sp.axis[k]], a.m[k]);
        const double c = std::clamp((tr - 1.0) * 0.5, -1.0, 1.0);
        best = std::min(best, std::acos(c));
    }
    return best;
}

// Per-voxel rotational energy: average over the (up to six) face neighbors of
// the minimal rotation aligning the voxel frame to the neighbor frame.
inline std::vector<double> rotation_energy(const FrameGrid& g) {
    const GridSpec& spec = g.spec();
    if (spec.dims.x < 2 && spec.dims.y < 2 && spec.dims.z < 2)
        throw Error(ErrorCode::InvalidParam, "rotation_energy needs at least two voxels");
    std::vector<double> energy(spec.voxel_count(), 0.0);
    const int off[6][3] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    for (int k = 0; k < spec.dims.z; ++k)
        for (int j = 0; j < spec.dims.y; ++j)
            for (int i = 0; i < spec.dims.x; ++i) {
                const Frame& f = g.at(i, j, k);
                double sum = 0.0;
                int cnt = 0;
                for (const auto& o : off) {
                    const int ni = i + o[0], nj = j + o[1], nk = k + o[2];
                    if (!spec.valid_index(ni, nj, nk)) continue;
                    sum += frame_alignment_angle(f, g.at(ni, nj, nk));
                    ++cnt;
                }
                energy[spec.linear(i, j, k)] = cnt > 0 ? sum / cnt : 0.0;
            }
    return energy;
}

struct SingularMask {
    GridSpec spec;
    std::vector<std::uint8_t> excluded;
    double dilation_radius = 0.0;

    bool is_excluded(int i, int j, int k) const { return excluded[spec.linear(i, j, k)] != 0; }
    bool is_excluded(const Vec3& p) const {
        const Index3 v = spec.nearest_voxel(p);
        return is_excluded(v.x, v.y, v.z);
    }
    std::size_t count() const {
        std::size_t n = 0;
        for (auto e : excluded) n += e;
        return n;
    }
};

inline SingularMask dilate(const SingularMask& in, double radius) {
    SingularMask out = in;
    if (radius <= 0.0) return out;
    const GridSpec& spec = in.spec;
    const double rvox = radius / spec.spacing;
    const int rv = int(std::ceil(rvox - 1e-9));
    if (rv <= 0) return out;
    const double r2 = rvox * rvox + 1e-9;
    for (int k = 0; k < spec.dims.z; ++k)
        for (int j = 0; j < spec.dims.y; ++j)
            for (int i = 0; i < spec.dims.x; ++i) {
                if (!in.excluded[spec.linear(i, j, k)]) continue;
                for (int dz = -rv; dz <= rv; ++dz)
                    for (int dy = -rv; dy <= rv; ++dy)
                        for (int dx = -rv; dx <= rv; ++dx) {
                            if (dx * dx + dy * dy + dz * dz > r2) continue;
                            const int ni = i + dx, nj = j + dy, nk = k + dz;
                            if (spec.valid_index(ni, nj, nk))
                                out.excluded[spec.linear(ni, nj, nk)] = 1;
                        }
            }
    return out;
}

// Spike detection: mark voxels with energy above mean + k_sigma * stddev,
// statistics taken over Intermediate voxels only. Degenerate generator voxels
// are always marked. The mask is then dilated by dilation_radius.
inline SingularMask detect_singular_voxels(const FrameGrid& g, const std::vector<double>& energy,
                                           double k_sigma, double dilation_radius) {
    const GridSpec& spec = g.spec();
    if (energy.size() != spec.voxel_count())
        throw Error(ErrorCode::DimensionMismatch, "energy field size mismatch");
    double mean = 0.0;
    std::size_t n = 0;
    for (std::size_t v = 0; v < energy.size(); ++v) {
        if (g.voxel_class(v) != VoxelClass::Intermediate) continue;
        mean += energy[v];
        ++n;
    }
    mean = n ? mean / double(n) : 0.0;
    double var = 0.0;
    for (std::size_t v = 0; v < energy.size(); ++v) {
        if (g.voxel_class(v) != VoxelClass::Intermediate) continue;
        const double d = energy[v] - mean;
        var += d * d;
    }
    const double sigma = n > 1 ? std::sqrt(var / double(n)) : 0.0;
    const double threshold = mean + k_sigma * sigma;

    SingularMask mask;
    mask.spec = spec;
    mask.dilation_radius = dilation_radius;
    mask.excluded.assign(spec.voxel_count(), 0);
    for (std::size_t v = 0; v < energy.size(); ++v)
        if (energy[v] > threshold || g.degenerate(v)) mask.excluded[v] = 1;
    return dilate(mask, dilation_radius);
}

inline SingularMask compute_singular_mask(const FrameGrid& g, double k_sigma,
                                          double dilation_radius) {
    return detect_singular_voxels(g, rotation_energy(g), k_sigma, dilation_radius);
}

inline SingularMask empty_mask(const GridSpec& spec) {
    SingularMask m;
    m.spec = spec;
    m.excluded.assign(spec.voxel_count(), 0);
    return m;
}

// Debug export: JSON header line (same layout as .ffield) + raw uint8 grid.
inline void save_mask(const SingularMask& m, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(ErrorCode::IoError, "cannot open for write: " + path);
    nlohmann::json header = {
        {"dims", {m.spec.dims.x, m.spec.dims.y, m.spec.dims.z}},
        {"spacing", m.spec.spacing},
        {"origin", {m.spec.origin.x, m.spec.origin.y, m.spec.origin.z}},
        {"version", 1},
    };
    os << header.dump() << "\n";
    os.write(reinterpret_cast<const char*>(m.excluded.data()), std::streamsize(m.excluded.size()));
    if (!os) throw Error(ErrorCode::IoError, "short write: " + path);
}

}  // namespace lamina
