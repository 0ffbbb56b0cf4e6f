// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include "farfield/solver.hpp"

namespace farfield {

// ---------------------------------------------------------------------------
// Forward ray trace and energy audit
// ---------------------------------------------------------------------------

struct TraceReport {
    double max_angle_error = 0.0;   // radians, over non-tie nodes
    double frac_within_1e9 = 1.0;   // fraction of non-tie nodes below 1e-9 rad
    std::vector<double> energy_delta;  // G_i - g_i (filled when f is supplied)
    double tie_fraction = 0.0;
};

/// Re-derive each node's refraction from the current envelope winner's normal
/// and measure the angle to the assigned target. Exact piecewise-quadric
/// envelopes refract to machine precision; a perturbed focal vector shows up
/// as nonzero angles wherever winners shifted against the frozen assignment.
inline TraceReport raytrace_verify(const RefractorSolution& sol,
                                   const QuadratureGrid& grid,
                                   const CellAssignment& assignment,
                                   const SourceDensity* f = nullptr,
                                   bool lossless = false) {
    if (assignment.size() != grid.size())
        throw ConfigError("cell assignment does not match the grid");
    TraceReport rep;
    rep.tie_fraction = assignment.tie_fraction();
    std::size_t counted = 0;
    std::size_t within = 0;
    for (std::size_t j = 0; j < grid.size(); ++j) {
        if (assignment.tie[j]) continue;
        const Direction& x = grid.nodes[j];
        const int current = envelope_radius(sol, x).winner;
        const Direction nu = quadric_normal(
            sol.targets.directions[static_cast<std::size_t>(current)], x,
            sol.medium.kappa);
        const Direction refracted = snell_refract(x, nu, sol.medium);
        const Direction& assigned =
            sol.targets.directions[static_cast<std::size_t>(assignment.winner[j])];
        const double err = angle_between(refracted, assigned);
        rep.max_angle_error = std::max(rep.max_angle_error, err);
        ++counted;
        if (err < 1e-9) ++within;
    }
    rep.frac_within_1e9 =
        counted == 0 ? 1.0
                     : static_cast<double>(within) / static_cast<double>(counted);
    if (f != nullptr) {
        const EnergyVector ev = refractor_measure(sol, *f, grid, assignment, lossless);
        rep.energy_delta.resize(sol.targets.size());
        for (std::size_t i = 0; i < sol.targets.size(); ++i)
            rep.energy_delta[i] = ev.per_target[i] - sol.targets.energies[i];
    }
    return rep;
}

struct EnergyAudit {
    double partition_gap = 0.0;      // |sum G_i - total transmitted| / total
    double max_residual = 0.0;       // max |G_i - g_i|/g_i over i >= 2
    double surplus_m1 = 0.0;         // G_1 - g_1
    double total_emitted = 0.0;
    double total_transmitted = 0.0;
    double transmission_floor = 0.0;  // (1 - C_eps) * emitted
    int subsets_checked = 0;
    int subsets_passed = 0;
    bool pass = false;
};

/// Independent recomputation of the transmitted-energy ledger plus the
/// subset inequality: every target subset must receive at least (1 - tol)
/// of its prescribed energy.
inline EnergyAudit energy_audit(const RefractorSolution& sol,
                                const SourceDensity& f,
                                const QuadratureGrid& grid,
                                const TargetMeasure& targets, double epsilon,
                                bool lossless = false, double tol = 1e-2,
                                std::uint64_t seed = 20240901,
                                int subset_count = 100) {
    const CellAssignment assignment = trace_cells(sol, grid);
    const EnergyVector ev = refractor_measure(sol, f, grid, assignment, lossless);
    const std::size_t l = targets.size();

    EnergyAudit audit;
    KahanSum regrouped;
    for (double gi : ev.per_target) regrouped.add(gi);
    audit.partition_gap = std::abs(regrouped.value() - ev.total_transmitted) /
                          std::max(1e-300, ev.total_transmitted);
    for (std::size_t i = 1; i < l; ++i)
        audit.max_residual = std::max(
            audit.max_residual,
            std::abs(ev.per_target[i] - targets.energies[i]) / targets.energies[i]);
    audit.surplus_m1 = ev.per_target[0] - targets.energies[0];
    audit.total_emitted = ev.total_emitted;
    audit.total_transmitted = ev.total_transmitted;
    const FresnelBounds bounds =
        lossless ? FresnelBounds{0.0} : fresnel_bound(sol.medium, epsilon);
    audit.transmission_floor = (1.0 - bounds.c_eps) * ev.total_emitted;

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> coin(0, 1);
    audit.subsets_checked = subset_count;
    for (int s = 0; s < subset_count; ++s) {
        double got = 0.0, want = 0.0;
        bool empty = true;
        for (std::size_t i = 0; i < l; ++i) {
            if (coin(rng)) {
                got += ev.per_target[i];
                want += targets.energies[i];
                empty = false;
            }
        }
        if (empty || got >= (1.0 - tol) * want) ++audit.subsets_passed;
    }

    audit.pass = audit.partition_gap <= 1e-10 && audit.max_residual <= tol &&
                 audit.surplus_m1 >= -tol * targets.energies[0] &&
                 audit.total_transmitted >= audit.transmission_floor - 1e-12 &&
                 audit.subsets_passed == audit.subsets_checked;
    return audit;
}

// ---------------------------------------------------------------------------
// Planar-chart Monge-Ampere diagnostics
// ---------------------------------------------------------------------------

struct Mat2 {
    double a = 0.0, b = 0.0;  // row 1
    double c = 0.0, d = 0.0;  // row 2

    Mat2 operator+(const Mat2& o) const { return {a + o.a, b + o.b, c + o.c, d + o.d}; }
    Mat2 operator-(const Mat2& o) const { return {a - o.a, b - o.b, c - o.c, d - o.d}; }
    Mat2 operator*(double s) const { return {a * s, b * s, c * s, d * s}; }
    Mat2 operator*(const Mat2& o) const {
        return {a * o.a + b * o.c, a * o.b + b * o.d,
                c * o.a + d * o.c, c * o.b + d * o.d};
    }
    double det() const { return a * d - b * c; }
    double frob() const { return std::sqrt(a * a + b * b + c * c + d * d); }
};

inline Mat2 operator*(double s, const Mat2& m) { return m * s; }
inline Mat2 identity2() { return {1.0, 0.0, 0.0, 1.0}; }
inline Mat2 outer(const Vec2& u, const Vec2& v) {
    return {u.x * v.x, u.x * v.y, u.y * v.x, u.y * v.y};
}

/// Radial function over the chart plane: field(x) is the surface radius above
/// the lifted direction (x, sqrt(1-|x|^2)).
using RadialField = std::function<double(const Vec2&)>;

/// Chart of a single supporting quadric.
struct QuadricChart {
    Direction m{0.0, 0.0, 1.0};
    double b = 1.0;
    double kappa = -2.0;

    double operator()(const Vec2& x) const {
        const Direction X = lift_to_sphere(x);
        return quadric_radius(m, b, X, kappa);
    }
};

/// Quadric modulated by a smooth multiplicative bump; still analytic, but its
/// refracted map is no longer constant.
struct PerturbedQuadricChart {
    QuadricChart base;
    double amplitude = 0.01;
    double w1 = 3.0, w2 = 2.5;
    double c1 = 0.4, c2 = -0.3;

    double operator()(const Vec2& x) const {
        const double bump = std::sin(w1 * x.x + c1) * std::cos(w2 * x.y + c2);
        return base(x) * (1.0 + amplitude * bump);
    }
};

/// Unit outer normal of the graph rho(x)*X(x) from chart values, oriented so
/// the incident direction satisfies X.nu > 0.
inline Direction normal_from_graph(const Vec2& x, double rho, const Vec2& drho) {
    const double u = rho + dot(drho, x);
    if (u == 0.0) throw SingularError("degenerate chart normal: rho + Drho.x = 0");
    const double q = rho * rho - dot(x, drho) * dot(x, drho) + norm2(drho);
    if (!(q > 0.0)) throw SingularError("degenerate chart normal: nonpositive radicand");
    const double inv = 1.0 / std::sqrt(q);
    const double xn = std::sqrt(std::max(0.0, 1.0 - norm2(x)));
    return {(u * x.x - drho.x) * inv, (u * x.y - drho.y) * inv, u * xn * inv};
}

namespace detail {

/// Scaled normal coefficient h(x, z, p): the Snell multiplier at incidence
/// cosine z/sqrt(z^2+|p|^2-(p.x)^2), divided by that same square root.
inline double ma_h(const Vec2& x, double z, const Vec2& p, double kappa) {
    const double q = z * z + norm2(p) - dot(p, x) * dot(p, x);
    if (!(q > 0.0)) throw SingularError("degenerate chart state in h");
    const double root = std::sqrt(q);
    return snell_multiplier(z / root, kappa) / root;
}

}  // namespace detail

/// Per-point state for the chart diagnostics: derivatives of the radial
/// field, the h/omega pair, and the B, C matrices with C's closed-form
/// determinant and rank-one inverse.
struct MAWorkspace {
    Vec2 x;
    double rho = 0.0;
    Vec2 Drho;
    Mat2 D2rho;
    double h = 0.0;
    double omega = 0.0;
    Vec2 Dxh;
    double hz = 0.0;
    Vec2 Dph;
    Mat2 B;
    Mat2 C;
    Mat2 Cinv;
    double detC = 0.0;         // closed form
    double detC_direct = 0.0;  // ad - bc of the assembled C
};

/// Assemble the workspace from raw chart values (no radial field needed);
/// D2rho is left zero. Partials of h use central differences with step
/// 1e-6 * (1 + |coordinate|).
inline MAWorkspace ma_point_state(const Vec2& x, double rho, const Vec2& drho,
                                  const MediumPair& medium) {
    const double kappa = medium.kappa;
    MAWorkspace ws;
    ws.x = x;
    ws.rho = rho;
    ws.Drho = drho;
    ws.h = detail::ma_h(x, rho, drho, kappa);
    const double u = rho + dot(drho, x);
    ws.omega = 1.0 - ws.h * u;

    const auto hs = [&](const Vec2& xx, double zz, const Vec2& pp) {
        return detail::ma_h(xx, zz, pp, kappa);
    };
    {
        const double s = 1e-6 * (1.0 + std::abs(x.x));
        ws.Dxh.x = (hs({x.x + s, x.y}, rho, drho) - hs({x.x - s, x.y}, rho, drho)) / (2 * s);
    }
    {
        const double s = 1e-6 * (1.0 + std::abs(x.y));
        ws.Dxh.y = (hs({x.x, x.y + s}, rho, drho) - hs({x.x, x.y - s}, rho, drho)) / (2 * s);
    }
    {
        const double s = 1e-6 * (1.0 + std::abs(rho));
        ws.hz = (hs(x, rho + s, drho) - hs(x, rho - s, drho)) / (2 * s);
    }
    {
        const double s = 1e-6 * (1.0 + std::abs(drho.x));
        ws.Dph.x = (hs(x, rho, {drho.x + s, drho.y}) - hs(x, rho, {drho.x - s, drho.y})) / (2 * s);
    }
    {
        const double s = 1e-6 * (1.0 + std::abs(drho.y));
        ws.Dph.y = (hs(x, rho, {drho.x, drho.y + s}) - hs(x, rho, {drho.x, drho.y - s})) / (2 * s);
    }

    ws.B = ws.omega * identity2() - outer(u * x - drho, ws.Dxh) -
           outer(x, (2.0 * ws.h + ws.hz * u) * drho) + ws.hz * outer(drho, drho);
    ws.C = outer(drho - u * x, ws.Dph) + ws.h * (identity2() - outer(x, x));

    const double disc = 1.0 - norm2(x);
    if (!(disc > 0.0)) throw DomainError("chart point outside the open unit disc");
    const Vec2 v = (rho / disc * x - drho) / ws.h;
    const double pivot = 1.0 - dot(v, ws.Dph);
    ws.detC = std::pow(ws.h, kDim - 1) * disc * pivot;
    ws.detC_direct = ws.C.det();
    if (std::abs(ws.detC) < 1e-12)
        throw SingularError("degenerate configuration: det C below 1e-12");
    if (std::abs(ws.detC - ws.detC_direct) > 1e-8 * std::abs(ws.detC))
        throw SingularError("det C closed form disagrees with the direct determinant");
    if (pivot == 0.0) throw SingularError("rank-one inverse pivot vanished");
    const Mat2 n = identity2() + outer(v, ws.Dph) * (1.0 / pivot);
    ws.Cinv = (1.0 / ws.h) * (n * (identity2() + outer(x, x) * (1.0 / disc)));
    return ws;
}

/// Full workspace from a radial field: rho, Drho, D2rho by central
/// differences with step fd_step, then the point state.
inline MAWorkspace build_ma_workspace(const Vec2& x, const RadialField& field,
                                      const MediumPair& medium, double fd_step) {
    if (!(fd_step > 0.0)) throw ConfigError("fd_step must be positive");
    const double s = fd_step;
    const double f00 = field(x);
    const double fpx = field({x.x + s, x.y});
    const double fmx = field({x.x - s, x.y});
    const double fpy = field({x.x, x.y + s});
    const double fmy = field({x.x, x.y - s});
    const Vec2 drho{(fpx - fmx) / (2 * s), (fpy - fmy) / (2 * s)};

    MAWorkspace ws = ma_point_state(x, f00, drho, medium);
    const double fpp = field({x.x + s, x.y + s});
    const double fpm = field({x.x + s, x.y - s});
    const double fmp = field({x.x - s, x.y + s});
    const double fmm = field({x.x - s, x.y - s});
    ws.D2rho.a = (fpx - 2 * f00 + fmx) / (s * s);
    ws.D2rho.d = (fpy - 2 * f00 + fmy) / (s * s);
    ws.D2rho.b = (fpp - fpm - fmp + fmm) / (4 * s * s);
    ws.D2rho.c = ws.D2rho.b;
    return ws;
}

/// Refracted direction of the chart map at x, from chart values.
inline Direction ma_refracted(const Vec2& x, double rho, const Vec2& drho,
                              const MediumPair& medium) {
    const double h = detail::ma_h(x, rho, drho, medium.kappa);
    const double omega = 1.0 - h * (rho + dot(drho, x));
    const double xn = std::sqrt(std::max(0.0, 1.0 - norm2(x)));
    return {(omega * x.x + h * drho.x) / medium.kappa,
            (omega * x.y + h * drho.y) / medium.kappa, omega * xn / medium.kappa};
}

namespace detail {

inline Vec2 field_gradient(const RadialField& field, const Vec2& x, double s) {
    return {(field({x.x + s, x.y}) - field({x.x - s, x.y})) / (2 * s),
            (field({x.x, x.y + s}) - field({x.x, x.y - s})) / (2 * s)};
}

/// Planar part of the refracted map, with Drho itself from differencing.
inline Vec2 map_y(const RadialField& field, const Vec2& x, double s,
                  const MediumPair& medium) {
    const double rho = field(x);
    const Vec2 drho = field_gradient(field, x, s);
    const Direction y = ma_refracted(x, rho, drho, medium);
    return {y.x, y.y};
}

}  // namespace detail

struct JacobianSample {
    Vec2 x;
    double lhs = 0.0;  // det Dy by differencing the refracted map
    double rhs = 0.0;  // det C * det(C^-1 B + D^2 rho) / kappa^(n-1)
    double rel = 0.0;
};

struct JacobianStats {
    double max_rel = 0.0;
    double mean_rel = 0.0;
    double p50_rel = 0.0;
    double p95_rel = 0.0;
    double max_abs = 0.0;
    std::size_t points = 0;
};

/// Compare det Dy computed two ways at each check point: central differences
/// of the explicit refracted map against the closed-form factorization
/// det C * det(C^-1 B + D^2 rho) / kappa^(n-1). Pass `samples` to keep the
/// per-point values for plotting.
inline JacobianStats ma_jacobian_check(const RadialField& field,
                                       const MediumPair& medium,
                                       const std::vector<Vec2>& points,
                                       double fd_step,
                                       std::vector<JacobianSample>* samples = nullptr) {
    JacobianStats stats;
    KahanSum rels;
    std::vector<double> all_rel;
    all_rel.reserve(points.size());
    for (const Vec2& x : points) {
        const double s = fd_step;
        const Vec2 ypx = detail::map_y(field, {x.x + s, x.y}, s, medium);
        const Vec2 ymx = detail::map_y(field, {x.x - s, x.y}, s, medium);
        const Vec2 ypy = detail::map_y(field, {x.x, x.y + s}, s, medium);
        const Vec2 ymy = detail::map_y(field, {x.x, x.y - s}, s, medium);
        Mat2 dy;
        dy.a = (ypx.x - ymx.x) / (2 * s);
        dy.b = (ypy.x - ymy.x) / (2 * s);
        dy.c = (ypx.y - ymx.y) / (2 * s);
        dy.d = (ypy.y - ymy.y) / (2 * s);
        const double lhs = dy.det();

        const MAWorkspace ws = build_ma_workspace(x, field, medium, fd_step);
        const Mat2 inner = ws.Cinv * ws.B + ws.D2rho;
        const double rhs = ws.detC * inner.det() /
                           std::pow(medium.kappa, kDim - 1);

        const double floor =
            1e-12 + 1e-6 * std::abs(ws.detC) *
                        (ws.D2rho.frob() + (ws.Cinv * ws.B).frob());
        const double rel = std::abs(lhs - rhs) / (std::abs(lhs) + std::abs(rhs) + floor);
        stats.max_rel = std::max(stats.max_rel, rel);
        stats.max_abs = std::max(stats.max_abs, std::abs(lhs - rhs));
        rels.add(rel);
        all_rel.push_back(rel);
        if (samples) samples->push_back({x, lhs, rhs, rel});
    }
    stats.points = points.size();
    if (stats.points > 0) {
        stats.mean_rel = rels.value() / static_cast<double>(stats.points);
        std::sort(all_rel.begin(), all_rel.end());
        stats.p50_rel = all_rel[all_rel.size() / 2];
        stats.p95_rel =
            all_rel[std::min(all_rel.size() - 1, (all_rel.size() * 95) / 100)];
    }
    return stats;
}

struct InequalityStats {
    double max_ratio = 0.0;    // lhs / rhs
    double min_ratio = 0.0;
    double mean_ratio = 0.0;
    std::size_t satisfied = 0;  // lhs <= rhs (with 1e-9 slack)
    std::size_t points = 0;
};

/// Residual of the transmitted-energy bound on the chart: compares
/// |det(D^2 rho + C^-1 B)| against f * t * |kappa|^(n-2) * |omega| /
/// (g(T(x)) * |det C|) pointwise. `g_at_refracted` evaluates the prescribed
/// target intensity at the refracted direction of x.
inline InequalityStats ma_inequality_check(
    const RadialField& field, const MediumPair& medium,
    const std::vector<Vec2>& points, double fd_step,
    const std::function<double(const Vec2&)>& f_source,
    const std::function<double(const Vec2&)>& g_at_refracted,
    bool lossless = false) {
    InequalityStats stats;
    stats.min_ratio = std::numeric_limits<double>::infinity();
    KahanSum ratios;
    for (const Vec2& x : points) {
        const MAWorkspace ws = build_ma_workspace(x, field, medium, fd_step);
        const Mat2 inner = ws.D2rho + ws.Cinv * ws.B;
        const double lhs = std::abs(inner.det());

        const Direction big_x = lift_to_sphere(x);
        const Direction y = ma_refracted(x, ws.rho, ws.Drho, medium);
        const double t = fresnel_transmittance(dot(big_x, y), medium, lossless);
        const double g = g_at_refracted(x);
        if (!(g > 0.0)) throw DomainError("prescribed intensity must be positive");
        const double rhs = f_source(x) * t *
                           std::pow(std::abs(medium.kappa), kDim - 2) *
                           std::abs(ws.omega) / (g * std::abs(ws.detC));

        const double ratio = lhs / rhs;
        stats.max_ratio = std::max(stats.max_ratio, ratio);
        stats.min_ratio = std::min(stats.min_ratio, ratio);
        if (lhs <= rhs * (1.0 + 1e-9)) ++stats.satisfied;
        ratios.add(ratio);
    }
    stats.points = points.size();
    if (stats.points > 0)
        stats.mean_ratio = ratios.value() / static_cast<double>(stats.points);
    return stats;
}

/// Interior check points on a centered disc of the given radius.
inline std::vector<Vec2> chart_points(double radius, int per_axis) {
    std::vector<Vec2> pts;
    for (int i = 0; i < per_axis; ++i)
        for (int j = 0; j < per_axis; ++j) {
            const Vec2 p{-radius + 2.0 * radius * (i + 0.5) / per_axis,
                         -radius + 2.0 * radius * (j + 0.5) / per_axis};
            if (norm2(p) < radius * radius) pts.push_back(p);
        }
    return pts;
}

}  // namespace farfield
