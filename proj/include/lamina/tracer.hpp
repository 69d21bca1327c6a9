#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <random>
#include <thread>
#include <vector>

#include "lamina/field.hpp"
#include "lamina/singularity.hpp"
#include "lamina/spatial_hash.hpp"

namespace lamina {

// Oriented point cloud everywhere tangent to two frame directions; normals
// store the frame vector the surface is locally perpendicular to. r is the
// Poisson-disk radius the cloud was generated with.
struct StreamSurface {
    int id = 0;
    std::vector<Vec3> points;
    std::vector<Vec3> normals;
    double r = 0.0;
};

struct TracerParams {
    int candidates_per_point = 30;
    std::size_t max_points = 200000;
    bool allow_mask_traversal = false;   // layer with near-constant normal may cross
    double traversal_angle_deg = 5.0;
    double eps_void = 0.01;
};

enum class RejectReason {
    Accepted,
    TooClose,        // existing point within r
    SpiralOverlap,   // 3r neighbor projects within r on the tangent plane
    Masked,          // voxel excluded by the singular mask
    Untraceable,     // zero-thickness layer or solid voxel
    OutOfBounds,
};

// Project d onto the tangent plane whose normal is the frame vector best
// aligned with n_ref at x, and renormalize.
inline Vec3 parallel_transport(const FrameGrid& g, const Vec3& x, const Vec3& d,
                               const Vec3& n_ref) {
    const Frame f = g.sample(x);  // throws OutOfBounds
    const Vec3 n = closest_frame_vector(f, n_ref).v;
    const Vec3 t = d - n * dot(d, n);
    const double len = norm(t);
    if (len < 1e-12)
        throw Error(ErrorCode::DegenerateProjection, "direction parallel to surface normal");
    return t / len;
}

// Fourth-order Runge-Kutta step of length delta from p0 in direction d0,
// re-transporting d0 onto the tangent plane at every evaluation point.
inline Vec3 rk4_step(const FrameGrid& g, const Vec3& p0, const Vec3& n0, const Vec3& d0,
                     double delta) {
    const Vec3 k1 = parallel_transport(g, p0, d0, n0) * delta;
    const Vec3 k2 = parallel_transport(g, p0 + k1 * 0.5, d0, n0) * delta;
    const Vec3 k3 = parallel_transport(g, p0 + k2 * 0.5, d0, n0) * delta;
    const Vec3 k4 = parallel_transport(g, p0 + k3, d0, n0) * delta;
    return p0 + (k1 + k2 * 2.0 + k3 * 2.0 + k4) / 6.0;
}

// Re-estimate p_n from every existing surface point within 2r by stepping
// from that point toward p_n, and average the estimates with p_n itself.
// Estimates that leave the domain or degenerate are skipped.
inline Vec3 refine_point(const FrameGrid& g, const Vec3& p_n, const StreamSurface& s,
                         const PDSIndex& idx, double r) {
    Vec3 acc = p_n;
    int cnt = 1;
    for (std::uint32_t q : idx.query(p_n, 2.0 * r)) {
        const Vec3& pq = s.points[q];
        const Vec3 to = p_n - pq;
        const double dist = norm(to);
        if (dist < 1e-12) continue;
        try {
            acc += rk4_step(g, pq, s.normals[q], to / dist, dist);
            ++cnt;
        } catch (const Error&) {
            // neighbor estimate unavailable; fall back to the others
        }
    }
    return acc / double(cnt);
}

namespace detail {

// Principal direction of the masked voxel centers near p; used to estimate
// the singular curve tangent for the traversal exception.
inline std::optional<Vec3> masked_region_tangent(const SingularMask& mask, const Vec3& p) {
    const GridSpec& spec = mask.spec;
    const int rad = 3;
    const Index3 c = spec.nearest_voxel(p);
    Vec3 mean{};
    int n = 0;
    std::vector<Vec3> pts;
    for (int dz = -rad; dz <= rad; ++dz)
        for (int dy = -rad; dy <= rad; ++dy)
            for (int dx = -rad; dx <= rad; ++dx) {
                const int i = c.x + dx, j = c.y + dy, k = c.z + dz;
                if (!spec.valid_index(i, j, k) || !mask.is_excluded(i, j, k)) continue;
                pts.push_back(spec.voxel_center(i, j, k));
                mean += pts.back();
                ++n;
            }
    if (n < 3) return std::nullopt;
    mean = mean / double(n);
    double cov[3][3] = {};
    for (const Vec3& q : pts) {
        const Vec3 d = q - mean;
        for (int a = 0; a < 3; ++a)
            for (int b = 0; b < 3; ++b) cov[a][b] += d[a] * d[b];
    }
    // power iteration for the dominant eigenvector
    Vec3 v{1.0, 0.7, 0.4};
    for (int it = 0; it < 32; ++it) {
        Vec3 w{cov[0][0] * v.x + cov[0][1] * v.y + cov[0][2] * v.z,
               cov[1][0] * v.x + cov[1][1] * v.y + cov[1][2] * v.z,
               cov[2][0] * v.x + cov[2][1] * v.y + cov[2][2] * v.z};
        const double len = norm(w);
        if (len < 1e-20) return std::nullopt;
        v = w / len;
    }
    return v;
}

}  // namespace detail

// Acceptance test for a refined candidate with tentative normal n_cand.
inline RejectReason accept_point(const FrameGrid& g, const SingularMask& mask,
                                 const StreamSurface& s, const PDSIndex& idx, const Vec3& cand,
                                 const Vec3& n_cand, double r, const TracerParams& params = {}) {
    if (!g.in_bounds(cand)) return RejectReason::OutOfBounds;
    if (idx.has_point_within(cand, r * (1.0 - 1e-9))) return RejectReason::TooClose;
    for (std::uint32_t q : idx.query(cand, 3.0 * r)) {
        const Vec3 d = s.points[q] - cand;
        const Vec3 in_plane = d - n_cand * dot(d, n_cand);
        if (norm(in_plane) < r * (1.0 - 1e-9)) return RejectReason::SpiralOverlap;
    }
    if (mask.is_excluded(cand)) {
        bool allowed = false;
        if (params.allow_mask_traversal) {
            if (auto tangent = detail::masked_region_tangent(mask, cand)) {
                const double cos_lim = std::cos(params.traversal_angle_deg * kPi / 180.0);
                allowed = std::abs(dot(*tangent, n_cand)) > cos_lim;
            }
        }
        if (!allowed) return RejectReason::Masked;
    }
    const Frame f = g.sample(cand);
    const ClosestVector cv = closest_frame_vector(f, n_cand);
    if (f.t[cv.axis] <= params.eps_void) return RejectReason::Untraceable;
    if (g.class_at(cand) == VoxelClass::Solid) return RejectReason::Untraceable;
    return RejectReason::Accepted;
}

// One full pass recomputing every point from its <= 2r neighbors
// (simultaneous update), then re-matching normals against the field.
inline StreamSurface smooth_surface(const FrameGrid& g, const StreamSurface& s) {
    StreamSurface out = s;
    PDSIndex idx(s.r);
    for (const Vec3& p : s.points) idx.insert(p);
    for (std::size_t i = 0; i < s.points.size(); ++i) {
        Vec3 acc = s.points[i];
        int cnt = 1;
        for (std::uint32_t q : idx.query(s.points[i], 2.0 * s.r)) {
            if (q == i) continue;
            const Vec3 to = s.points[i] - s.points[q];
            const double dist = norm(to);
            if (dist < 1e-12) continue;
            try {
                acc += rk4_step(g, s.points[q], s.normals[q], to / dist, dist);
                ++cnt;
            } catch (const Error&) {
            }
        }
        const Vec3 moved = acc / double(cnt);
        if (g.in_bounds(moved)) out.points[i] = moved;
    }
    for (std::size_t i = 0; i < out.points.size(); ++i)
        out.normals[i] = closest_frame_vector(g.sample(out.points[i]), s.normals[i]).v;
    return out;
}

namespace detail {

// Shared front-propagation loop: expands the queue of points starting at
// queue position `cursor`, generating candidates_per_point annulus samples
// per front point with inner radius r and outer radius 2r.
inline void propagate_front(const FrameGrid& g, const SingularMask& mask, StreamSurface& s,
                            PDSIndex& idx, std::size_t cursor, double r, std::mt19937_64& rng,
                            const TracerParams& params, const Vec3& seed_rot_origin) {
    std::uniform_real_distribution<double> angle_dist(0.0, 2.0 * kPi);
    std::uniform_real_distribution<double> radius_dist(r, 2.0 * r);
    while (cursor < s.points.size() && s.points.size() < params.max_points) {
        const Vec3 p0 = s.points[cursor];
        const Vec3 n0 = s.normals[cursor];
        // the annulus angle is uniform, so the rotational origin only fixes a
        // phase; any deterministic tangent vector works past the seed
        const Vec3 rot_origin = cursor == 0 ? seed_rot_origin : any_perpendicular(n0);
        for (int c = 0; c < params.candidates_per_point; ++c) {
            const double phi = angle_dist(rng);
            const double step = radius_dist(rng);
            if (s.points.size() >= params.max_points) break;
            Vec3 cand, n_cand;
            try {
                const Vec3 d0 = rotate_about(rot_origin, n0, phi);
                cand = rk4_step(g, p0, n0, d0, step);
                cand = refine_point(g, cand, s, idx, r);
                if (!g.in_bounds(cand)) continue;
                n_cand = closest_frame_vector(g.sample(cand), n0).v;
            } catch (const Error&) {
                continue;  // left the domain or degenerate projection
            }
            if (accept_point(g, mask, s, idx, cand, n_cand, r, params) != RejectReason::Accepted)
                continue;
            s.points.push_back(cand);
            s.normals.push_back(n_cand);
            idx.insert(cand);
        }
        ++cursor;
    }
}

}  // namespace detail

// Trace one stream surface from a seed. The surface normal is the seed
// frame's vector m[layer]; the rotational origin is the next frame vector.
// Candidate step lengths equal their annulus radial coordinate.
inline StreamSurface trace_surface(const FrameGrid& g, const SingularMask& mask, const Vec3& seed,
                                   int layer, double r, std::uint64_t rng_seed,
                                   const TracerParams& params = {}, bool smooth = true) {
    if (!g.in_bounds(seed))
        throw Error(ErrorCode::SeedRejected, "seed outside the frame grid");
    if (layer < 0 || layer > 2) throw Error(ErrorCode::InvalidParam, "layer must be 0, 1 or 2");
    const Frame f0 = g.sample(seed);
    if (mask.is_excluded(seed))
        throw Error(ErrorCode::SeedRejected, "seed inside the singular mask");
    if (f0.t[layer] <= params.eps_void || g.class_at(seed) == VoxelClass::Solid)
        throw Error(ErrorCode::SeedRejected, "seed layer not traceable");

    StreamSurface s;
    s.r = r;
    s.points.push_back(seed);
    s.normals.push_back(f0.m[layer]);
    PDSIndex idx(r);
    idx.insert(seed);

    std::mt19937_64 rng(rng_seed);
    const Vec3 seed_rot_origin = f0.m[(layer + 1) % 3];
    detail::propagate_front(g, mask, s, idx, 0, r, rng, params, seed_rot_origin);
    if (smooth) s = smooth_surface(g, s);
    return s;
}

// Continue the generation at a smaller radius: the original points seed the
// new Poisson-disk grid and the queue, so new points fill the gaps while the
// originals are retained.
inline StreamSurface supersample_surface(const FrameGrid& g, const SingularMask& mask,
                                         const StreamSurface& s, double r_fine,
                                         std::uint64_t rng_seed, const TracerParams& params = {}) {
    if (r_fine > s.r)
        throw Error(ErrorCode::InvalidParam, "supersample radius must not exceed the original");
    StreamSurface out = s;
    out.r = r_fine;
    PDSIndex idx(r_fine);
    for (const Vec3& p : out.points) idx.insert(p);
    std::mt19937_64 rng(hash_combine(rng_seed, 0x5u));
    const Vec3 rot0 = out.normals.empty() ? Vec3{1, 0, 0} : any_perpendicular(out.normals[0]);
    detail::propagate_front(g, mask, out, idx, 0, r_fine, rng, params, rot0);
    return out;
}

// Trace n_surfaces surfaces from uniformly sampled traceable seed voxels with
// uniformly chosen traceable layer normals. layer_pin in {0,1,2} restricts
// the normal choice; -1 draws per seed. Deterministic for a fixed rng_seed.
inline std::vector<StreamSurface> generate_surface_set(const FrameGrid& g,
                                                       const SingularMask& mask, int n_surfaces,
                                                       double r, std::uint64_t rng_seed,
                                                       const TracerParams& params = {},
                                                       int layer_pin = -1, int threads = 1) {
    if (n_surfaces < 1) throw Error(ErrorCode::InvalidParam, "n_surfaces must be >= 1");
    const GridSpec& spec = g.spec();
    std::vector<std::size_t> seedable;
    for (std::size_t v = 0; v < spec.voxel_count(); ++v) {
        if (mask.excluded[v]) continue;
        if (g.voxel_class(v) != VoxelClass::Intermediate) continue;
        const auto& t = g.at(v).t;
        bool any = false;
        for (int k = 0; k < 3; ++k)
            any = any || (t[k] > params.eps_void && (layer_pin < 0 || layer_pin == k));
        if (any) seedable.push_back(v);
    }
    if (seedable.empty())
        throw Error(ErrorCode::InsufficientDomain, "no traceable voxel to seed from");

    std::mt19937_64 rng(rng_seed);
    std::uniform_int_distribution<std::size_t> voxel_dist(0, seedable.size() - 1);
    struct SeedChoice {
        Vec3 p;
        int layer;
        std::uint64_t rng_seed;
    };
    std::vector<SeedChoice> seeds;
    seeds.reserve(n_surfaces);
    for (int i = 0; i < n_surfaces; ++i) {
        for (int attempt = 0;; ++attempt) {
            if (attempt > 1000)
                throw Error(ErrorCode::InsufficientDomain, "could not draw a traceable seed");
            const std::size_t v = seedable[voxel_dist(rng)];
            const int i0 = int(v % spec.dims.x);
            const int j0 = int((v / spec.dims.x) % spec.dims.y);
            const int k0 = int(v / (std::size_t(spec.dims.x) * spec.dims.y));
            const Vec3 p = spec.voxel_center(i0, j0, k0);
            std::vector<int> layers;
            for (int k = 0; k < 3; ++k)
                if (g.at(v).t[k] > params.eps_void && (layer_pin < 0 || layer_pin == k))
                    layers.push_back(k);
            if (layers.empty()) continue;
            std::uniform_int_distribution<std::size_t> layer_dist(0, layers.size() - 1);
            const int layer = layers[layer_dist(rng)];
            seeds.push_back({p, layer, hash_combine(rng_seed, std::uint64_t(i) + 1)});
            break;
        }
    }

    std::vector<StreamSurface> out(n_surfaces);
    auto trace_one = [&](int i) {
        out[i] = trace_surface(g, mask, seeds[i].p, seeds[i].layer, r, seeds[i].rng_seed, params);
        out[i].id = i;
    };
    if (threads <= 1 || n_surfaces < 2) {
        for (int i = 0; i < n_surfaces; ++i) trace_one(i);
    } else {
        std::atomic<int> next{0};
        std::vector<std::thread> pool;
        for (int t = 0; t < std::min(threads, n_surfaces); ++t)
            pool.emplace_back([&] {
                for (int i = next.fetch_add(1); i < n_surfaces; i = next.fetch_add(1))
                    trace_one(i);
            });
        for (auto& th : pool) th.join();
    }
    return out;
}

}  // namespace lamina
