#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>

namespace lamina {

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    constexpr Vec3() = default;
    constexpr Vec3(double x_, double y_, double z_) : x(x_), y(y_), z(z_) {}

    double& operator[](int i) { return (&x)[i]; }
    double operator[](int i) const { return (&x)[i]; }

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3 operator-() const { return {-x, -y, -z}; }
    Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }
    bool operator==(const Vec3& o) const { return x == o.x && y == o.y && z == o.z; }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm2(const Vec3& v) { return dot(v, v); }
inline double norm(const Vec3& v) { return std::sqrt(dot(v, v)); }
inline Vec3 normalized(const Vec3& v) { return v / norm(v); }

inline std::ostream& operator<<(std::ostream& os, const Vec3& v) {
    return os << "(" << v.x << ", " << v.y << ", " << v.z << ")";
}

// Rotate v about unit axis by angle (Rodrigues).
inline Vec3 rotate_about(const Vec3& v, const Vec3& axis, double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    return v * c + cross(axis, v) * s + axis * (dot(axis, v) * (1.0 - c));
}

// Any unit vector perpendicular to unit n.
inline Vec3 any_perpendicular(const Vec3& n) {
    Vec3 ref = std::abs(n.x) < 0.9 ? Vec3{1, 0, 0} : Vec3{0, 1, 0};
    return normalized(cross(n, ref));
}

struct Mat3 {
    // column-major: columns are basis vectors
    std::array<Vec3, 3> col;

    static Mat3 identity() { return {{Vec3{1, 0, 0}, Vec3{0, 1, 0}, Vec3{0, 0, 1}}}; }
    static Mat3 from_cols(const Vec3& a, const Vec3& b, const Vec3& c) { return {{a, b, c}}; }

    Vec3 operator*(const Vec3& v) const { return col[0] * v.x + col[1] * v.y + col[2] * v.z; }
    Mat3 operator*(const Mat3& o) const {
        return from_cols((*this) * o.col[0], (*this) * o.col[1], (*this) * o.col[2]);
    }
    Mat3 transposed() const {
        return from_cols({col[0].x, col[1].x, col[2].x},
                         {col[0].y, col[1].y, col[2].y},
                         {col[0].z, col[1].z, col[2].z});
    }
    double det() const { return dot(col[0], cross(col[1], col[2])); }
    double trace() const { return col[0].x + col[1].y + col[2].z; }
};

// Rotation angle in radians of a proper rotation matrix.
inline double rotation_angle(const Mat3& R) {
    double c = (R.trace() - 1.0) * 0.5;
    c = std::clamp(c, -1.0, 1.0);
    return std::acos(c);
}

struct Index3 {
    int x = 0, y = 0, z = 0;
    bool operator==(const Index3& o) const { return x == o.x && y == o.y && z == o.z; }
};

// Dense 3D grid bookkeeping shared by fields, masks and volumes.
// Voxel (i,j,k) has its center at origin + (i,j,k)*spacing; the grid covers
// the half-voxel margin around the outermost centers.
struct GridSpec {
    Index3 dims;
    double spacing = 1.0;
    Vec3 origin;

    std::size_t voxel_count() const {
        return static_cast<std::size_t>(dims.x) * dims.y * dims.z;
    }
    std::size_t linear(int i, int j, int k) const {
        return (static_cast<std::size_t>(k) * dims.y + j) * dims.x + i;
    }
    Vec3 voxel_center(int i, int j, int k) const {
        return origin + Vec3{double(i), double(j), double(k)} * spacing;
    }
    bool valid_index(int i, int j, int k) const {
        return i >= 0 && i < dims.x && j >= 0 && j < dims.y && k >= 0 && k < dims.z;
    }
    bool contains(const Vec3& p) const {
        for (int a = 0; a < 3; ++a) {
            const double lo = origin[a] - 0.5 * spacing;
            const double hi = origin[a] + (dims_at(a) - 0.5) * spacing;
            if (p[a] < lo || p[a] > hi) return false;
        }
        return true;
    }
    int dims_at(int a) const { return a == 0 ? dims.x : (a == 1 ? dims.y : dims.z); }
    // Voxel whose center is nearest to p (indices clamped to the grid).
    Index3 nearest_voxel(const Vec3& p) const {
        Index3 v;
        v.x = std::clamp(int(std::lround((p.x - origin.x) / spacing)), 0, dims.x - 1);
        v.y = std::clamp(int(std::lround((p.y - origin.y) / spacing)), 0, dims.y - 1);
        v.z = std::clamp(int(std::lround((p.z - origin.z) / spacing)), 0, dims.z - 1);
        return v;
    }
    Vec3 min_corner() const { return origin - Vec3{0.5, 0.5, 0.5} * spacing; }
    Vec3 max_corner() const {
        return origin + Vec3{dims.x - 0.5, dims.y - 0.5, dims.z - 0.5} * spacing;
    }
    bool same_layout(const GridSpec& o) const {
        return dims == o.dims && spacing == o.spacing && origin == o.origin;
    }
};

// FNV-1a, used for content hashes in manifests.
inline std::uint64_t fnv1a(const void* data, std::size_t n, std::uint64_t seed = 1469598103934665603ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
    // splitmix-style mixing
    std::uint64_t x = a + 0x9e3779b97f4a7c15ull + (b << 6) + (b >> 2);
    x ^= x >> 30; x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 27; x *= 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

constexpr double kPi = 3.14159265358979323846;

}  // namespace lamina
