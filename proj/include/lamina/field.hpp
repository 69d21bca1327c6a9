#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "lamina/core.hpp"
#include "lamina/errors.hpp"

namespace lamina {

// Local rank-3 laminate descriptor: three mutually orthogonal unit layer
// normals m[k] with relative layer thicknesses t[k] in [0,1]. Frames are
// equivalent under signed permutation of the (m,t) triples; nothing in this
// module assumes a combed labeling.
struct Frame {
    std::array<Vec3, 3> m{Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1}};
    std::array<double, 3> t{0.0, 0.0, 0.0};

    Mat3 basis() const { return Mat3::from_cols(m[0], m[1], m[2]); }
};

struct ClosestVector {
    int axis = 0;      // layer index k in {0,1,2}
    double sign = 1.0; // +-1
    Vec3 v;            // sign * m[axis], unit
};

// Frame vector best aligned with direction d: maximizes s*(m_k . d) over the
// six signed frame vectors. Ties break toward the lowest axis index.
inline ClosestVector closest_frame_vector(const Frame& f, const Vec3& d) {
    ClosestVector best;
    double best_dot = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < 3; ++k) {
        const double dk = dot(f.m[k], d);
        const double mag = std::abs(dk);
        if (mag > best_dot) {
            best_dot = mag;
            best.axis = k;
            best.sign = dk >= 0.0 ? 1.0 : -1.0;
        }
    }
    best.v = f.m[best.axis] * best.sign;
    return best;
}

enum class VoxelClass : std::uint8_t { Void = 0, Solid = 1, Intermediate = 2 };

inline VoxelClass classify_voxel(double t1, double t2, double t3,
                                 double eps_void = 0.01, double eps_solid = 0.99) {
    if (t1 <= eps_void && t2 <= eps_void && t3 <= eps_void) return VoxelClass::Void;
    if (std::min({t1, t2, t3}) >= eps_solid) return VoxelClass::Solid;
    return VoxelClass::Intermediate;
}

// Layer k may grow a stream surface in this voxel iff its thickness is
// non-zero and the voxel is not fully solid.
inline bool layer_traceable(VoxelClass c, double tk, double eps_void = 0.01) {
    return c != VoxelClass::Solid && tk > eps_void;
}

class FrameGrid {
public:
    FrameGrid() = default;
    FrameGrid(GridSpec spec, double eps_void = 0.01, double eps_solid = 0.99)
        : spec_(spec), eps_void_(eps_void), eps_solid_(eps_solid),
          frames_(spec.voxel_count()), classes_(spec.voxel_count(), VoxelClass::Void),
          degenerate_(spec.voxel_count(), 0) {}

    const GridSpec& spec() const { return spec_; }
    double eps_void() const { return eps_void_; }
    double eps_solid() const { return eps_solid_; }

    Frame& at(int i, int j, int k) { return frames_[spec_.linear(i, j, k)]; }
    const Frame& at(int i, int j, int k) const { return frames_[spec_.linear(i, j, k)]; }
    Frame& at(std::size_t lin) { return frames_[lin]; }
    const Frame& at(std::size_t lin) const { return frames_[lin]; }

    VoxelClass voxel_class(int i, int j, int k) const { return classes_[spec_.linear(i, j, k)]; }
    VoxelClass voxel_class(std::size_t lin) const { return classes_[lin]; }
    VoxelClass class_at(const Vec3& p) const {
        const Index3 v = spec_.nearest_voxel(p);
        return classes_[spec_.linear(v.x, v.y, v.z)];
    }

    bool degenerate(std::size_t lin) const { return degenerate_[lin] != 0; }
    void set_degenerate(std::size_t lin, bool d) { degenerate_[lin] = d ? 1 : 0; }

    const std::vector<Frame>& frames() const { return frames_; }
    std::vector<Frame>& frames() { return frames_; }

    // Re-derive the classification from the stored thicknesses.
    void reclassify() {
        for (std::size_t i = 0; i < frames_.size(); ++i) {
            const auto& t = frames_[i].t;
            classes_[i] = classify_voxel(t[0], t[1], t[2], eps_void_, eps_solid_);
        }
    }
    void set_thresholds(double eps_void, double eps_solid) {
        eps_void_ = eps_void;
        eps_solid_ = eps_solid;
        reclassify();
    }

    bool in_bounds(const Vec3& p) const { return spec_.contains(p); }

    // Trilinear frame interpolation. The eight cell-corner frames are matched
    // against the nearest voxel's frame (sign + permutation via
    // closest_frame_vector), blended componentwise together with their
    // thicknesses, then re-orthonormalized in order m1, m2, m3.
    Frame sample(const Vec3& p) const {
        if (!spec_.contains(p))
            throw Error(ErrorCode::OutOfBounds, "sample outside frame grid");

        const double fx = (p.x - spec_.origin.x) / spec_.spacing;
        const double fy = (p.y - spec_.origin.y) / spec_.spacing;
        const double fz = (p.z - spec_.origin.z) / spec_.spacing;
        // cell base index; positions in the outer half-voxel margin clamp to
        // the boundary cell
        const int i0 = std::clamp(int(std::floor(fx)), 0, std::max(spec_.dims.x - 2, 0));
        const int j0 = std::clamp(int(std::floor(fy)), 0, std::max(spec_.dims.y - 2, 0));
        const int k0 = std::clamp(int(std::floor(fz)), 0, std::max(spec_.dims.z - 2, 0));
        const double u = std::clamp(fx - i0, 0.0, 1.0);
        const double v = std::clamp(fy - j0, 0.0, 1.0);
        const double w = std::clamp(fz - k0, 0.0, 1.0);

        const Index3 nv = spec_.nearest_voxel(p);
        const Frame& ref = at(nv.x, nv.y, nv.z);

        Vec3 acc_m[3];
        double acc_t[3] = {0, 0, 0};
        for (int dz = 0; dz < 2; ++dz) {
            for (int dy = 0; dy < 2; ++dy) {
                for (int dx = 0; dx < 2; ++dx) {
                    const int ii = std::min(i0 + dx, spec_.dims.x - 1);
                    const int jj = std::min(j0 + dy, spec_.dims.y - 1);
                    const int kk = std::min(k0 + dz, spec_.dims.z - 1);
                    const double lam = (dx ? u : 1.0 - u) * (dy ? v : 1.0 - v) * (dz ? w : 1.0 - w);
                    if (lam == 0.0) continue;
                    const Frame& fr = at(ii, jj, kk);
                    for (int a = 0; a < 3; ++a) {
                        const ClosestVector cv = closest_frame_vector(fr, ref.m[a]);
                        acc_m[a] += cv.v * lam;
                        acc_t[a] += fr.t[cv.axis] * lam;
                    }
                }
            }
        }

        Frame out;
        // Gram-Schmidt in order m1, m2, m3
        Vec3 e0 = normalized(acc_m[0]);
        Vec3 e1 = acc_m[1] - e0 * dot(acc_m[1], e0);
        e1 = normalized(e1);
        Vec3 e2 = acc_m[2] - e0 * dot(acc_m[2], e0) - e1 * dot(acc_m[2], e1);
        e2 = normalized(e2);
        out.m = {e0, e1, e2};
        out.t = {std::clamp(acc_t[0], 0.0, 1.0), std::clamp(acc_t[1], 0.0, 1.0),
                 std::clamp(acc_t[2], 0.0, 1.0)};
        return out;
    }

private:
    GridSpec spec_;
    double eps_void_ = 0.01, eps_solid_ = 0.99;
    std::vector<Frame> frames_;
    std::vector<VoxelClass> classes_;
    std::vector<std::uint8_t> degenerate_;
};

namespace detail {

// Fill degenerate voxels (on a singular axis, frame undefined) with the
// nearest valid frame and keep the degenerate flag for the singularity mask.
inline void inherit_nearest_valid(FrameGrid& g, const std::vector<std::size_t>& degenerate,
                                  const std::vector<std::size_t>& valid) {
    if (valid.empty()) return;
    const auto& spec = g.spec();
    auto unpack = [&](std::size_t lin) {
        const int i = int(lin % spec.dims.x);
        const int j = int((lin / spec.dims.x) % spec.dims.y);
        const int k = int(lin / (std::size_t(spec.dims.x) * spec.dims.y));
        return Vec3{double(i), double(j), double(k)};
    };
    for (std::size_t lin : degenerate) {
        const Vec3 p = unpack(lin);
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_lin = valid.front();
        for (std::size_t vl : valid) {
            const double d2 = norm2(unpack(vl) - p);
            if (d2 < best) {
                best = d2;
                best_lin = vl;
            }
        }
        g.at(lin) = g.at(best_lin);
        g.set_degenerate(lin, true);
    }
}

}  // namespace detail

inline FrameGrid make_constant_field(Index3 dims, const Frame& f, double spacing = 1.0,
                                     Vec3 origin = {}) {
    FrameGrid g(GridSpec{dims, spacing, origin});
    for (std::size_t i = 0; i < g.spec().voxel_count(); ++i) g.at(i) = f;
    g.reclassify();
    return g;
}

// Cylinder field: m1 along the given axis, m2 radial, m3 = m1 x m2. One
// singular curve on the axis through the domain center.
inline FrameGrid gen_cylinder_field(Index3 dims, int axis = 2, double spacing = 1.0,
                                    double thickness = 0.5) {
    if (dims.x <= 0 || dims.y <= 0 || dims.z <= 0)
        throw Error(ErrorCode::InvalidParam, "cylinder field dims must be positive");
    if (axis < 0 || axis > 2)
        throw Error(ErrorCode::InvalidParam, "axis must be 0, 1 or 2");
    FrameGrid g(GridSpec{dims, spacing, Vec3{}});
    const GridSpec& spec = g.spec();
    Vec3 axis_dir{};
    axis_dir[axis] = 1.0;
    Vec3 center{0.5 * (dims.x - 1) * spacing, 0.5 * (dims.y - 1) * spacing,
                0.5 * (dims.z - 1) * spacing};
    std::vector<std::size_t> degenerate, valid;
    for (int k = 0; k < dims.z; ++k)
        for (int j = 0; j < dims.y; ++j)
            for (int i = 0; i < dims.x; ++i) {
                const std::size_t lin = spec.linear(i, j, k);
                Vec3 p = spec.voxel_center(i, j, k) - center;
                Vec3 radial = p - axis_dir * dot(p, axis_dir);
                Frame f;
                f.t = {thickness, thickness, thickness};
                if (norm(radial) < spacing) {
                    degenerate.push_back(lin);
                    g.at(lin) = f;
                    continue;
                }
                f.m[0] = axis_dir;
                f.m[1] = normalized(radial);
                f.m[2] = cross(f.m[0], f.m[1]);
                g.at(lin) = f;
                valid.push_back(lin);
            }
    detail::inherit_nearest_valid(g, degenerate, valid);
    g.reclassify();
    return g;
}

// Helicoid field: m1 tangent to helical motion around the axis, rising from
// the horizontal plane by atan(pitch * r) at cylindrical radius r; m2 radial;
// m3 = m1 x m2. Non-integrable away from the axis; singular on the axis.
inline FrameGrid gen_helicoid_field(Index3 dims, double pitch, int axis = 2,
                                    double spacing = 1.0, double thickness = 0.5) {
    if (pitch == 0.0)
        throw Error(ErrorCode::InvalidParam, "helicoid pitch must be non-zero");
    if (dims.x <= 0 || dims.y <= 0 || dims.z <= 0)
        throw Error(ErrorCode::InvalidParam, "helicoid field dims must be positive");
    if (axis < 0 || axis > 2)
        throw Error(ErrorCode::InvalidParam, "axis must be 0, 1 or 2");
    FrameGrid g(GridSpec{dims, spacing, Vec3{}});
    const GridSpec& spec = g.spec();
    Vec3 axis_dir{};
    axis_dir[axis] = 1.0;
    Vec3 center{0.5 * (dims.x - 1) * spacing, 0.5 * (dims.y - 1) * spacing,
                0.5 * (dims.z - 1) * spacing};
    std::vector<std::size_t> degenerate, valid;
    for (int k = 0; k < dims.z; ++k)
        for (int j = 0; j < dims.y; ++j)
            for (int i = 0; i < dims.x; ++i) {
                const std::size_t lin = spec.linear(i, j, k);
                Vec3 p = spec.voxel_center(i, j, k) - center;
                Vec3 radial = p - axis_dir * dot(p, axis_dir);
                const double r = norm(radial);
                Frame f;
                f.t = {thickness, thickness, thickness};
                if (r < spacing) {
                    degenerate.push_back(lin);
                    g.at(lin) = f;
                    continue;
                }
                const Vec3 rhat = radial / r;
                const Vec3 that = cross(axis_dir, rhat);
                const double alpha = std::atan(pitch * r);
                f.m[0] = that * std::cos(alpha) + axis_dir * std::sin(alpha);
                f.m[1] = rhat;
                f.m[2] = cross(f.m[0], f.m[1]);
                g.at(lin) = f;
                valid.push_back(lin);
            }
    detail::inherit_nearest_valid(g, degenerate, valid);
    g.reclassify();
    return g;
}

// In-plane (x-y) singularity of index +-1 around the domain center, embedded
// in a layer with constant normal z (the traversing layer): m1 rotates in the
// plane with the given index, m3 = z, m2 = m3 x m1.
inline FrameGrid gen_embedded_singularity_field(Index3 dims, int index, double spacing = 1.0,
                                                std::array<double, 3> thickness = {0.5, 0.5, 0.5}) {
    if (index != 1 && index != -1)
        throw Error(ErrorCode::InvalidParam, "singularity index must be +1 or -1");
    if (dims.x <= 0 || dims.y <= 0 || dims.z <= 0)
        throw Error(ErrorCode::InvalidParam, "field dims must be positive");
    FrameGrid g(GridSpec{dims, spacing, Vec3{}});
    const GridSpec& spec = g.spec();
    const double cx = 0.5 * (dims.x - 1) * spacing;
    const double cy = 0.5 * (dims.y - 1) * spacing;
    std::vector<std::size_t> degenerate, valid;
    for (int k = 0; k < dims.z; ++k)
        for (int j = 0; j < dims.y; ++j)
            for (int i = 0; i < dims.x; ++i) {
                const std::size_t lin = spec.linear(i, j, k);
                const Vec3 p = spec.voxel_center(i, j, k);
                const double dx = p.x - cx, dy = p.y - cy;
                const double r = std::hypot(dx, dy);
                Frame f;
                f.t = thickness;
                if (r < spacing) {
                    degenerate.push_back(lin);
                    g.at(lin) = f;
                    continue;
                }
                const double theta = double(index) * std::atan2(dy, dx);
                f.m[0] = Vec3{std::cos(theta), std::sin(theta), 0.0};
                f.m[2] = Vec3{0.0, 0.0, 1.0};
                f.m[1] = cross(f.m[2], f.m[0]);
                g.at(lin) = f;
                valid.push_back(lin);
            }
    detail::inherit_nearest_valid(g, degenerate, valid);
    g.reclassify();
    return g;
}

}  // namespace lamina
