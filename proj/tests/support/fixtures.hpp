#pragma once

// Synthetic point-sampled surfaces and fields shared by the unit and
// acceptance suites.

#include <vector>

#include "lamina/field.hpp"
#include "lamina/tracer.hpp"

namespace fixtures {

using lamina::Frame;
using lamina::FrameGrid;
using lamina::Index3;
using lamina::StreamSurface;
using lamina::Vec3;

// Rectangular lattice patch on the plane through `center` with unit `normal`:
// extent_u x extent_v points spaced `spacing` along two in-plane axes.
inline StreamSurface make_plane_cloud(int id, const Vec3& center, const Vec3& normal,
                                      int extent_u, int extent_v, double spacing) {
    StreamSurface s;
    s.id = id;
    s.r = spacing;
    const Vec3 n = lamina::normalized(normal);
    const Vec3 u = lamina::any_perpendicular(n);
    const Vec3 v = lamina::cross(n, u);
    for (int j = 0; j < extent_v; ++j)
        for (int i = 0; i < extent_u; ++i) {
            const double du = (i - 0.5 * (extent_u - 1)) * spacing;
            const double dv = (j - 0.5 * (extent_v - 1)) * spacing;
            s.points.push_back(center + u * du + v * dv);
            s.normals.push_back(n);
        }
    return s;
}

// The dual-hex configuration: three mutually orthogonal planes plus one
// parallel offset copy, giving exactly two triple intersection points.
inline std::vector<StreamSurface> fig7_planes(double r, double offset, int extent) {
    std::vector<StreamSurface> out;
    out.push_back(make_plane_cloud(0, {0, 0, 0}, {1, 0, 0}, extent, extent, r));
    out.push_back(make_plane_cloud(1, {0, 0, 0}, {0, 1, 0}, extent, extent, r));
    out.push_back(make_plane_cloud(2, {0, 0, 0}, {0, 0, 1}, extent, extent, r));
    out.push_back(make_plane_cloud(3, {0, 0, offset}, {0, 0, 1}, extent, extent, r));
    return out;
}

// (k+1) axis-aligned planes per axis at the given spacing, centered on the
// origin; dualizes to a structured grid of (k+1)^3 hexahedra.
inline std::vector<StreamSurface> plane_stack(int planes_per_axis, double plane_spacing,
                                              double r, int extent) {
    std::vector<StreamSurface> out;
    int id = 0;
    const double half = 0.5 * (planes_per_axis - 1) * plane_spacing;
    for (int axis = 0; axis < 3; ++axis)
        for (int i = 0; i < planes_per_axis; ++i) {
            Vec3 n{}, c{};
            n[axis] = 1.0;
            c[axis] = i * plane_spacing - half;
            out.push_back(make_plane_cloud(id++, c, n, extent, extent, r));
        }
    return out;
}

inline FrameGrid axis_frame_field(Index3 dims, double thickness = 0.5, double spacing = 1.0) {
    Frame f;
    f.t = {thickness, thickness, thickness};
    return lamina::make_constant_field(dims, f, spacing);
}

// Two-voxel-wide grid whose second voxel is the first rotated by `angle`
// about z; handy for closed-form rotation-energy checks.
inline FrameGrid two_voxel_rotated(double angle) {
    FrameGrid g(lamina::GridSpec{{2, 1, 1}, 1.0, {}});
    Frame a;
    a.t = {0.5, 0.5, 0.5};
    Frame b = a;
    b.m[0] = {std::cos(angle), std::sin(angle), 0.0};
    b.m[1] = {-std::sin(angle), std::cos(angle), 0.0};
    b.m[2] = {0.0, 0.0, 1.0};
    g.at(0, 0, 0) = a;
    g.at(1, 0, 0) = b;
    g.reclassify();
    return g;
}

}  // namespace fixtures
