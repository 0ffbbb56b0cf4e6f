// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "farfield/geom.hpp"

namespace farfield {

/// The two refraction regimes for a negative relative index.
enum class Regime {
    HyperboloidMax,  // kappa < -1: envelope of hyperboloids, upper support
    EllipsoidMin,    // -1 < kappa < 0: envelope of ellipsoids, lower support
};

inline Regime regime_of(double kappa) {
    if (!(kappa < 0.0) || kappa == -1.0)
        throw ConfigError("relative index kappa must be negative and != -1");
    return kappa < -1.0 ? Regime::HyperboloidMax : Regime::EllipsoidMin;
}

/// Smallest admissible x.m for a given kappa (1/kappa or kappa by regime).
inline double admissibility_threshold(double kappa) {
    return regime_of(kappa) == Regime::HyperboloidMax ? 1.0 / kappa : kappa;
}

/// Material pair across the interface. Medium I has positive index n1,
/// medium II negative index n2; sigma = z2/z1 is the impedance ratio and
/// alpha/beta split the incident energy between polarizations.
struct MediumPair {
    double n1 = 1.0;
    double n2 = -1.0;
    double kappa = -1.0;  // n2 / n1
    double z1 = 1.0;
    double z2 = 1.0;
    double sigma = 1.0;  // z2 / z1
    double alpha = 0.5;  // parallel-polarization energy fraction
    double beta = 0.5;   // perpendicular fraction, alpha + beta = 1

    Regime regime() const { return regime_of(kappa); }
};

inline MediumPair make_medium(double n1, double n2, double z1, double z2,
                              double alpha) {
    if (!(n1 > 0.0)) throw ConfigError("n1 must be positive");
    if (!(n2 < 0.0)) throw ConfigError("n2 must be negative");
    if (!(z1 > 0.0) || !(z2 > 0.0)) throw ConfigError("impedances must be positive");
    if (!(alpha >= 0.0) || !(alpha <= 1.0))
        throw ConfigError("polarization fraction alpha must lie in [0,1]");
    MediumPair m;
    m.n1 = n1;
    m.n2 = n2;
    m.kappa = n2 / n1;
    regime_of(m.kappa);  // rejects kappa == -1
    m.z1 = z1;
    m.z2 = z2;
    m.sigma = z2 / z1;
    m.alpha = alpha;
    m.beta = 1.0 - alpha;
    return m;
}

inline MediumPair make_medium_kappa(double kappa, double sigma, double alpha) {
    if (!(sigma > 0.0)) throw ConfigError("impedance ratio sigma must be positive");
    return make_medium(1.0, kappa, 1.0, sigma, alpha);
}

/// Scalar coefficient lambda with x - kappa*m = lambda*nu, as a function of
/// the incidence cosine t = x.nu:  t + |kappa| sqrt(1 - (1 - t^2)/kappa^2).
/// A negative radicand means the incidence angle crossed the total-internal-
/// reflection threshold (only possible when -1 < kappa < 0).
inline double snell_multiplier(double t, double kappa) {
    const double radicand = 1.0 - (1.0 - t * t) / (kappa * kappa);
    if (radicand < 0.0)
        throw DomainError("incidence beyond the total-internal-reflection threshold");
    return t + std::abs(kappa) * std::sqrt(radicand);
}

/// Refract incident direction x at unit normal nu (pointing into medium II).
/// Returns the unit refracted direction m = (x - lambda*nu)/kappa; the
/// tangential parts satisfy P_tan(x) = kappa * P_tan(m).
inline Direction snell_refract(const Direction& x, const Direction& nu,
                               const MediumPair& medium) {
    const double t = dot(x, nu);
    if (!(t > 0.0)) throw GeometryError("ray strikes the surface from behind");
    const double lambda = snell_multiplier(t, medium.kappa);
    return (x - lambda * nu) / medium.kappa;
}

namespace detail {

/// Parallel-polarization amplitude ratio as a function of t = x.m.
inline double fresnel_p(double t, double kappa, double sigma) {
    const double den = sigma - kappa + (1.0 - kappa * sigma) * t;
    if (den == 0.0) throw SingularError("parallel Fresnel denominator vanished");
    return (sigma + kappa - (1.0 + kappa * sigma) * t) / den;
}

/// Perpendicular-polarization amplitude ratio.
inline double fresnel_q(double t, double kappa, double sigma) {
    const double den = 1.0 - kappa * sigma + (sigma - kappa) * t;
    if (den == 0.0) throw SingularError("perpendicular Fresnel denominator vanished");
    return (1.0 + kappa * sigma - (sigma + kappa) * t) / den;
}

}  // namespace detail

/// Reflected energy fraction for transmitted-direction cosine t = x.m.
inline double fresnel_reflectance(double t, const MediumPair& medium) {
    const double p = detail::fresnel_p(t, medium.kappa, medium.sigma);
    const double q = detail::fresnel_q(t, medium.kappa, medium.sigma);
    return medium.alpha * p * p + medium.beta * q * q;
}

/// Transmitted energy fraction; exactly 1 - fresnel_reflectance so that
/// reflectance + transmittance == 1 holds to machine precision.
inline double fresnel_transmittance(double t, const MediumPair& medium,
                                    bool lossless = false) {
    if (lossless) return 1.0;
    return 1.0 - fresnel_reflectance(t, medium);
}

inline double fresnel_transmittance(const Direction& x, const Direction& m,
                                    const MediumPair& medium,
                                    bool lossless = false) {
    return fresnel_transmittance(dot(x, m), medium, lossless);
}

/// Uniform upper bound on the reflectance over an admissible interval.
struct FresnelBounds {
    double c_eps = 0.0;  // in [0, 1)
};

/// Bound the reflectance over t in [threshold + epsilon, 1]. The building
/// blocks p, q are monotone there, so the endpoints dominate for small
/// epsilon; a dense scan plus local golden-section refinement guards larger
/// epsilon, where an interior maximum of the mixed sum can appear.
inline FresnelBounds fresnel_bound(const MediumPair& medium, double epsilon) {
    if (!(epsilon > 0.0)) throw ConfigError("admissibility margin must be positive");
    const double lo = admissibility_threshold(medium.kappa) + epsilon;
    if (lo > 1.0) throw ConfigError("admissible interval is empty");

    double c = std::max(fresnel_reflectance(lo, medium),
                        fresnel_reflectance(1.0, medium));
    if (lo < 1.0) {
        constexpr int kScan = 1024;
        double best_t = lo;
        double best = -1.0;
        for (int i = 0; i <= kScan; ++i) {
            const double t = lo + (1.0 - lo) * static_cast<double>(i) / kScan;
            const double v = fresnel_reflectance(t, medium);
            if (v > best) {
                best = v;
                best_t = t;
            }
        }
        // Polish the scan maximum so sampled psi values can never exceed it.
        const double step = (1.0 - lo) / kScan;
        double a = std::max(lo, best_t - step);
        double b = std::min(1.0, best_t + step);
        constexpr double kInvPhi = 0.6180339887498949;
        double x1 = b - kInvPhi * (b - a);
        double x2 = a + kInvPhi * (b - a);
        double f1 = fresnel_reflectance(x1, medium);
        double f2 = fresnel_reflectance(x2, medium);
        for (int it = 0; it < 80; ++it) {
            if (f1 > f2) {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - kInvPhi * (b - a);
                f1 = fresnel_reflectance(x1, medium);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + kInvPhi * (b - a);
                f2 = fresnel_reflectance(x2, medium);
            }
        }
        c = std::max({c, best, f1, f2});
    }
    if (!(c < 1.0))
        throw ConfigError("setup admits total reflection: reflectance bound >= 1");
    return {std::max(0.0, c)};
}

/// Source/target caps plus the margin the pair must satisfy.
struct AdmissibleSetup {
    MediumPair medium;
    SphericalCap source_cap;
    SphericalCap target_cap;
    double epsilon = 0.0;
};

struct AdmissibilityReport {
    double worst_dot = 0.0;   // closed-form min of x.m over the cap pair
    double threshold = 0.0;   // 1/kappa or kappa
    double margin = 0.0;      // worst_dot - threshold
    bool pass = false;
    Direction worst_x{0, 0, 1};
    Direction worst_m{0, 0, 1};
};

/// Closed-form worst case: the minimum of x.m over two caps is
/// cos(min(pi, angle(axes) + r1 + r2)).
inline AdmissibilityReport check_admissible(const AdmissibleSetup& setup) {
    const double axis_angle =
        angle_between(setup.source_cap.axis, setup.target_cap.axis);
    const double worst_angle = std::min(
        kPi, axis_angle + setup.source_cap.angular_radius +
                 setup.target_cap.angular_radius);

    AdmissibilityReport rep;
    rep.worst_dot = std::cos(worst_angle);
    rep.threshold = admissibility_threshold(setup.medium.kappa);
    rep.margin = rep.worst_dot - rep.threshold;
    rep.pass = rep.margin >= setup.epsilon;

    // Extremal pair: each boundary point walks away from the other axis along
    // the great circle through both axes.
    const Vec3 a = setup.source_cap.axis;
    const Vec3 b = setup.target_cap.axis;
    const double r1 = setup.source_cap.angular_radius;
    const double r2 = setup.target_cap.angular_radius;
    Vec3 toward_b = b - dot(a, b) * a;
    const double tb_len = norm(toward_b);
    toward_b = tb_len < 1e-14 ? orthonormal_basis(a)[0] : toward_b / tb_len;
    Vec3 toward_a = a - dot(a, b) * b;
    const double ta_len = norm(toward_a);
    toward_a = ta_len < 1e-14 ? -toward_b : toward_a / ta_len;
    rep.worst_x = normalized(std::cos(r1) * a - std::sin(r1) * toward_b);
    rep.worst_m = worst_angle >= kPi
                      ? -rep.worst_x
                      : normalized(std::cos(r2) * b - std::sin(r2) * toward_a);
    return rep;
}

inline void require_admissible(const AdmissibleSetup& setup) {
    const AdmissibilityReport rep = check_admissible(setup);
    if (!rep.pass)
        throw AdmissibilityError(
            "admissibility margin violated: min x.m over caps = " +
            std::to_string(rep.worst_dot) + ", need >= threshold " +
            std::to_string(rep.threshold) + " + epsilon " +
            std::to_string(setup.epsilon));
}

}  // namespace farfield
