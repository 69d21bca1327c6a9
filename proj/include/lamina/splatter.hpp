#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "lamina/field.hpp"
#include "lamina/tracer.hpp"

namespace lamina {

inline double smoothstep(double a, double b, double x) {
    if (a >= b) throw Error(ErrorCode::InvalidRange, "smoothstep needs a < b");
    const double t = std::clamp((x - a) / (b - a), 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

// Scalar occupancy grid in [0,1].
struct VoxelVolume {
    GridSpec spec;
    std::vector<float> values;

    static VoxelVolume zeros(const GridSpec& spec) {
        VoxelVolume v;
        v.spec = spec;
        v.values.assign(spec.voxel_count(), 0.0f);
        return v;
    }
    float& at(int i, int j, int k) { return values[spec.linear(i, j, k)]; }
    float at(int i, int j, int k) const { return values[spec.linear(i, j, k)]; }
};

// Output grid covering the same world box as the field at a chosen
// resolution.
inline GridSpec make_output_grid(const GridSpec& field, Index3 out_dims) {
    if (out_dims.x <= 0 || out_dims.y <= 0 || out_dims.z <= 0)
        throw Error(ErrorCode::InvalidParam, "output dims must be positive");
    GridSpec out;
    out.dims = out_dims;
    const Vec3 lo = field.min_corner();
    const Vec3 hi = field.max_corner();
    // uniform spacing; the largest axis fixes it so the box is covered
    double sp = 0.0;
    sp = std::max(sp, (hi.x - lo.x) / out_dims.x);
    sp = std::max(sp, (hi.y - lo.y) / out_dims.y);
    sp = std::max(sp, (hi.z - lo.z) / out_dims.z);
    out.spacing = sp;
    out.origin = lo + Vec3{0.5, 0.5, 0.5} * sp;
    return out;
}

// Wall thickness for a splat point: the relative thickness of the layer whose
// normal matches the point normal, scaled by the member spacing gamma.
inline double thickness_from_field(const FrameGrid& g, const Vec3& point, const Vec3& normal,
                                   double gamma) {
    const Frame f = g.sample(point);  // throws OutOfBounds
    const ClosestVector cv = closest_frame_vector(f, normal);
    return f.t[cv.axis] * gamma;
}

// Composite one stream surface into a fresh grid:
//   V_s[x] = sum_i w_i(x) phi_i(x) / sum_i w_i(x)
// with phi_i = ss(-tau_i, 0, -|n_i.(x-p_i)|) axially and
// w_i = ss(-r, 0, -lateral distance). Each point only touches its cylinder of
// radius r and half-height tau_i; weights live on a separate grid and the
// division happens in a second pass.
inline VoxelVolume splat_surface(const StreamSurface& s, const std::vector<double>& tau,
                                 const GridSpec& grid, double r) {
    if (tau.size() != s.points.size())
        throw Error(ErrorCode::DimensionMismatch, "per-point thickness count mismatch");
    std::vector<double> num(grid.voxel_count(), 0.0);
    std::vector<double> den(grid.voxel_count(), 0.0);
    const double inv_sp = 1.0 / grid.spacing;
    for (std::size_t pi = 0; pi < s.points.size(); ++pi) {
        const Vec3& p = s.points[pi];
        const Vec3& n = s.normals[pi];
        const double t = tau[pi];
        if (!(t > 0.0)) continue;
        const double reach = std::sqrt(r * r + t * t);
        int lo[3], hi[3];
        for (int a = 0; a < 3; ++a) {
            lo[a] = std::max(0, int(std::ceil((p[a] - reach - grid.origin[a]) * inv_sp)));
            hi[a] = std::min(grid.dims_at(a) - 1,
                             int(std::floor((p[a] + reach - grid.origin[a]) * inv_sp)));
        }
        for (int k = lo[2]; k <= hi[2]; ++k)
            for (int j = lo[1]; j <= hi[1]; ++j)
                for (int i = lo[0]; i <= hi[0]; ++i) {
                    const Vec3 x = grid.voxel_center(i, j, k);
                    const Vec3 d = x - p;
                    const double axial = dot(n, d);
                    if (std::abs(axial) >= t) continue;
                    const double lateral = norm(d - n * axial);
                    if (lateral >= r) continue;
                    const double phi = smoothstep(-t, 0.0, -std::abs(axial));
                    const double wgt = smoothstep(-r, 0.0, -lateral);
                    if (wgt <= 0.0) continue;
                    const std::size_t lin = grid.linear(i, j, k);
                    num[lin] += wgt * phi;
                    den[lin] += wgt;
                }
    }
    VoxelVolume out = VoxelVolume::zeros(grid);
    for (std::size_t v = 0; v < num.size(); ++v)
        out.values[v] = den[v] > 0.0 ? float(std::clamp(num[v] / den[v], 0.0, 1.0)) : 0.0f;
    return out;
}

inline std::vector<double> thickness_for_surface(const FrameGrid& g, const StreamSurface& s,
                                                 double gamma, double min_tau, double max_tau) {
    std::vector<double> tau(s.points.size(), 0.0);
    for (std::size_t i = 0; i < s.points.size(); ++i) {
        double t = thickness_from_field(g, s.points[i], s.normals[i], gamma);
        tau[i] = std::clamp(t, min_tau, max_tau);
    }
    return tau;
}

// Union as the voxelwise maximum.
inline VoxelVolume union_volumes(const std::vector<VoxelVolume>& vols) {
    if (vols.empty()) throw Error(ErrorCode::InvalidParam, "union of zero volumes");
    VoxelVolume out = vols.front();
    for (std::size_t s = 1; s < vols.size(); ++s) {
        if (!vols[s].spec.same_layout(out.spec))
            throw Error(ErrorCode::GridMismatch, "volume grids differ");
        for (std::size_t v = 0; v < out.values.size(); ++v)
            out.values[v] = std::max(out.values[v], vols[s].values[v]);
    }
    return out;
}

inline void union_into(VoxelVolume& acc, const VoxelVolume& v) {
    if (!v.spec.same_layout(acc.spec))
        throw Error(ErrorCode::GridMismatch, "volume grids differ");
    for (std::size_t i = 0; i < acc.values.size(); ++i)
        acc.values[i] = std::max(acc.values[i], v.values[i]);
}

// Fully solid field voxels become occupancy one; the tracer never enters
// them, so the splats alone would leave them empty.
inline VoxelVolume fill_solid_regions(const VoxelVolume& v, const FrameGrid& g) {
    VoxelVolume out = v;
    const GridSpec& spec = v.spec;
    for (int k = 0; k < spec.dims.z; ++k)
        for (int j = 0; j < spec.dims.y; ++j)
            for (int i = 0; i < spec.dims.x; ++i) {
                const Vec3 x = spec.voxel_center(i, j, k);
                if (!g.spec().contains(x)) continue;
                if (g.class_at(x) == VoxelClass::Solid) out.at(i, j, k) = 1.0f;
            }
    return out;
}

// Splat a whole collection and union the per-surface volumes. Surfaces are
// independent tasks; the max-union is order-independent, so the result is
// bit-equal to the sequential evaluation.
inline VoxelVolume splat_collection(const std::vector<StreamSurface>& surfaces,
                                    const FrameGrid& g, const GridSpec& grid, double gamma,
                                    double r, int threads = 1) {
    VoxelVolume acc = VoxelVolume::zeros(grid);
    const double min_tau = grid.spacing;
    const double max_tau = gamma;
    if (threads <= 1 || surfaces.size() < 2) {
        for (const StreamSurface& s : surfaces) {
            const auto tau = thickness_for_surface(g, s, gamma, min_tau, max_tau);
            union_into(acc, splat_surface(s, tau, grid, r));
        }
        return acc;
    }
    std::vector<std::thread> pool;
    std::vector<VoxelVolume> partial(threads, VoxelVolume::zeros(grid));
    std::atomic<std::size_t> next{0};
    for (int t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            for (std::size_t si = next.fetch_add(1); si < surfaces.size();
                 si = next.fetch_add(1)) {
                const auto tau = thickness_for_surface(g, surfaces[si], gamma, min_tau, max_tau);
                union_into(partial[t], splat_surface(surfaces[si], tau, grid, r));
            }
        });
    }
    for (auto& th : pool) th.join();
    for (const auto& p : partial) union_into(acc, p);
    return acc;
}

// .vvol: JSON header line + little-endian float32 payload, x-fastest.
inline void save_volume(const VoxelVolume& v, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(ErrorCode::IoError, "cannot open for write: " + path);
    nlohmann::json header = {
        {"dims", {v.spec.dims.x, v.spec.dims.y, v.spec.dims.z}},
        {"spacing", v.spec.spacing},
        {"origin", {v.spec.origin.x, v.spec.origin.y, v.spec.origin.z}},
        {"version", 1},
    };
    os << header.dump() << "\n";
    os.write(reinterpret_cast<const char*>(v.values.data()),
             std::streamsize(v.values.size() * sizeof(float)));
    if (!os) throw Error(ErrorCode::IoError, "short write: " + path);
}

inline VoxelVolume load_volume(const std::string& path) {
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
    VoxelVolume v;
    v.spec.dims = {header.at("dims")[0].get<int>(), header.at("dims")[1].get<int>(),
                   header.at("dims")[2].get<int>()};
    if (v.spec.dims.x <= 0 || v.spec.dims.y <= 0 || v.spec.dims.z <= 0)
        throw Error(ErrorCode::MalformedHeader, "non-positive dims");
    v.spec.spacing = header.at("spacing").get<double>();
    v.spec.origin = {header.at("origin")[0].get<double>(), header.at("origin")[1].get<double>(),
                     header.at("origin")[2].get<double>()};
    v.values.resize(v.spec.voxel_count());
    is.read(reinterpret_cast<char*>(v.values.data()),
            std::streamsize(v.values.size() * sizeof(float)));
    if (std::size_t(is.gcount()) != v.values.size() * sizeof(float))
        throw Error(ErrorCode::DimensionMismatch, "payload shorter than dims announce");
    return v;
}

}  // namespace lamina
