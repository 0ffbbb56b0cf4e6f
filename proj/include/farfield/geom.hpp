// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <vector>

#include "farfield/errors.hpp"

namespace farfield {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

// Directions live on S^2; the chart code projects to n-1 = 2 coordinates.
inline constexpr int kDim = 3;

struct Vec2 {
    double x = 0.0, y = 0.0;

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2 operator/(double s) const { return {x / s, y / s}; }
};

inline Vec2 operator*(double s, const Vec2& v) { return v * s; }
inline double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
inline double norm2(const Vec2& v) { return dot(v, v); }
inline double norm(const Vec2& v) { return std::sqrt(norm2(v)); }

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator/(double s) const { return {x / s, y / s, z / s}; }
    Vec3 operator-() const { return {-x, -y, -z}; }
};

inline Vec3 operator*(double s, const Vec3& v) { return v * s; }
inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm2(const Vec3& v) { return dot(v, v); }
inline double norm(const Vec3& v) { return std::sqrt(norm2(v)); }
inline Vec3 normalized(const Vec3& v) {
    const double n = norm(v);
    if (n == 0.0) throw GeometryError("cannot normalize zero vector");
    return v / n;
}

/// A direction is a unit vector; call sites that ingest external data should
/// validate with unit_or_throw.
using Direction = Vec3;

inline Direction unit_or_throw(const Vec3& v, double tol = 1e-12) {
    if (std::abs(norm(v) - 1.0) > tol)
        throw DomainError("direction is not unit length");
    return v;
}

/// Angle between two unit vectors, robust near 0 and pi.
inline double angle_between(const Vec3& a, const Vec3& b) {
    const double half_chord = std::min(1.0, 0.5 * norm(a - b));
    return 2.0 * std::asin(half_chord);
}

/// Orthonormal pair completing `n` to a right-handed frame (Duff et al.).
inline std::array<Vec3, 2> orthonormal_basis(const Vec3& n) {
    const double sign = std::copysign(1.0, n.z);
    const double a = -1.0 / (sign + n.z);
    const double b = n.x * n.y * a;
    return {Vec3{1.0 + sign * n.x * n.x * a, sign * b, -sign * n.x},
            Vec3{b, sign + n.y * n.y * a, -n.y}};
}

/// Compensated (Neumaier) accumulator; keeps quadrature sums stable to ~1e-16
/// regardless of summand count, so sharded reductions agree to 1e-12 relative.
class KahanSum {
public:
    void add(double v) {
        const double t = sum_ + v;
        if (std::abs(sum_) >= std::abs(v))
            comp_ += (sum_ - t) + v;
        else
            comp_ += (v - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// Geodesic cap on the unit sphere. Radius is kept strictly inside (0, pi/2)
/// so the cap fits an open hemisphere and the planar chart stays valid.
struct SphericalCap {
    Direction axis{0.0, 0.0, 1.0};
    double angular_radius = 0.0;

    double area() const { return kTwoPi * (1.0 - std::cos(angular_radius)); }
};

inline SphericalCap make_cap(const Vec3& axis, double angular_radius) {
    if (!(angular_radius > 0.0) || !(angular_radius < kPi / 2.0))
        throw ConfigError("cap angular_radius must lie in (0, pi/2)");
    return {unit_or_throw(axis, 1e-9), angular_radius};
}

/// Quadrature nodes with positive weights covering a cap.
struct QuadratureGrid {
    std::vector<Direction> nodes;
    std::vector<double> weights;
    SphericalCap cap;

    std::size_t size() const { return nodes.size(); }
};

inline constexpr int kMinGridNodes = 16;

/// Equal-area spiral grid on a cap: midpoint-stratified in the axis cosine,
/// golden-angle in azimuth, uniform weights summing exactly to the cap area.
/// Deterministic for fixed inputs.
inline QuadratureGrid build_grid(const SphericalCap& cap, int node_count) {
    if (node_count < kMinGridNodes)
        throw ConfigError("grid node_count must be at least 16");
    const double zmin = std::cos(cap.angular_radius);
    const double area = cap.area();
    const auto [e1, e2] = orthonormal_basis(cap.axis);

    QuadratureGrid grid;
    grid.cap = cap;
    grid.nodes.reserve(static_cast<std::size_t>(node_count));
    grid.weights.assign(static_cast<std::size_t>(node_count),
                        area / static_cast<double>(node_count));

    const double golden_angle = kPi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < node_count; ++i) {
        const double z = 1.0 - (1.0 - zmin) * (static_cast<double>(i) + 0.5) /
                                   static_cast<double>(node_count);
        const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        const double az = golden_angle * static_cast<double>(i);
        grid.nodes.push_back(r * std::cos(az) * e1 + r * std::sin(az) * e2 +
                             z * cap.axis);
    }
    return grid;
}

/// Orthogonal projection of an upper-hemisphere direction onto the chart plane.
inline Vec2 project_to_plane(const Direction& x) {
    if (!(x.z > 0.0))
        throw DomainError("projection requires a strictly positive third component");
    return {x.x, x.y};
}

/// Inverse of project_to_plane on the open unit disc.
inline Direction lift_to_sphere(const Vec2& p) {
    const double s = 1.0 - norm2(p);
    if (!(s > 0.0)) throw DomainError("chart point outside the open unit disc");
    return {p.x, p.y, std::sqrt(s)};
}

}  // namespace farfield
