#pragma once

#include <cmath>
#include <cstdint>
#include <unordered_map>
#include <vector>

#include "lamina/core.hpp"

namespace lamina {

// Uniform hash grid over points. With cell size r/sqrt(3) a cell's diagonal
// equals r, so the Poisson-disk property admits at most one point per cell;
// the same index answers radius and nearest-within-radius queries for any
// query radius.
class PDSIndex {
public:
    explicit PDSIndex(double r) : cell_(r / std::sqrt(3.0)), inv_cell_(1.0 / cell_) {}

    double cell_size() const { return cell_; }
    std::size_t size() const { return points_.size(); }
    const std::vector<Vec3>& points() const { return points_; }
    const Vec3& point(std::size_t i) const { return points_[i]; }

    std::size_t insert(const Vec3& p) {
        const std::size_t id = points_.size();
        points_.push_back(p);
        cells_[key_of(p)].push_back(std::uint32_t(id));
        return id;
    }

    void clear() {
        points_.clear();
        cells_.clear();
    }

    // Rebuild from scratch (after points move).
    void rebuild(const std::vector<Vec3>& pts) {
        clear();
        for (const Vec3& p : pts) insert(p);
    }

    // Indices of all points within distance rho of p (inclusive), in
    // ascending index order.
    std::vector<std::uint32_t> query(const Vec3& p, double rho) const {
        std::vector<std::uint32_t> out;
        const double rho2 = rho * rho;
        const int lo[3] = {coord(p.x - rho), coord(p.y - rho), coord(p.z - rho)};
        const int hi[3] = {coord(p.x + rho), coord(p.y + rho), coord(p.z + rho)};
        for (int cz = lo[2]; cz <= hi[2]; ++cz)
            for (int cy = lo[1]; cy <= hi[1]; ++cy)
                for (int cx = lo[0]; cx <= hi[0]; ++cx) {
                    const auto it = cells_.find(pack(cx, cy, cz));
                    if (it == cells_.end()) continue;
                    for (std::uint32_t id : it->second)
                        if (norm2(points_[id] - p) <= rho2) out.push_back(id);
                }
        std::sort(out.begin(), out.end());
        return out;
    }

    bool has_point_within(const Vec3& p, double rho) const {
        const double rho2 = rho * rho;
        const int lo[3] = {coord(p.x - rho), coord(p.y - rho), coord(p.z - rho)};
        const int hi[3] = {coord(p.x + rho), coord(p.y + rho), coord(p.z + rho)};
        for (int cz = lo[2]; cz <= hi[2]; ++cz)
            for (int cy = lo[1]; cy <= hi[1]; ++cy)
                for (int cx = lo[0]; cx <= hi[0]; ++cx) {
                    const auto it = cells_.find(pack(cx, cy, cz));
                    if (it == cells_.end()) continue;
                    for (std::uint32_t id : it->second)
                        if (norm2(points_[id] - p) <= rho2) return true;
                }
        return false;
    }

    // Nearest point within max_dist of p, or -1. Scans cell shells outward
    // and stops once no closer cell can exist.
    std::int64_t nearest_within(const Vec3& p, double max_dist, double* dist_out = nullptr) const {
        const int cx = coord(p.x), cy = coord(p.y), cz = coord(p.z);
        const int max_ring = int(max_dist * inv_cell_) + 1;
        const double cap2 = max_dist * max_dist;
        double found2 = std::numeric_limits<double>::infinity();
        std::int64_t best = -1;
        for (int ring = 0; ring <= max_ring; ++ring) {
            // closest possible squared distance from p to a cell in this ring
            if (ring > 0) {
                const double ring_min = (ring - 1) * cell_;
                if (ring_min * ring_min > std::min(cap2, found2)) break;
            }
            for (int dz = -ring; dz <= ring; ++dz)
                for (int dy = -ring; dy <= ring; ++dy)
                    for (int dx = -ring; dx <= ring; ++dx) {
                        if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) != ring) continue;
                        const auto it = cells_.find(pack(cx + dx, cy + dy, cz + dz));
                        if (it == cells_.end()) continue;
                        for (std::uint32_t id : it->second) {
                            const double d2 = norm2(points_[id] - p);
                            if (d2 > cap2) continue;
                            if (d2 < found2 || (d2 == found2 && (best < 0 || id < best))) {
                                found2 = d2;
                                best = id;
                            }
                        }
                    }
        }
        if (dist_out && best >= 0) *dist_out = std::sqrt(found2);
        return best;
    }

private:
    int coord(double x) const { return int(std::floor(x * inv_cell_)); }
    std::int64_t key_of(const Vec3& p) const { return pack(coord(p.x), coord(p.y), coord(p.z)); }
    static std::int64_t pack(int x, int y, int z) {
        constexpr std::int64_t off = 1 << 20;
        return ((std::int64_t(x) + off) << 42) | ((std::int64_t(y) + off) << 21) |
               (std::int64_t(z) + off);
    }

    double cell_;
    double inv_cell_;
    std::vector<Vec3> points_;
    std::unordered_map<std::int64_t, std::vector<std::uint32_t>> cells_;
};

}  // namespace lamina
