// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "farfield/optics.hpp"

namespace farfield {

inline constexpr double kDefaultTieTol = 1e-9;

/// Semi-discrete target: directions m_i with prescribed energies g_i.
struct TargetMeasure {
    std::vector<Direction> directions;
    std::vector<double> energies;

    std::size_t size() const { return directions.size(); }
    double total() const {
        KahanSum s;
        for (double g : energies) s.add(g);
        return s.value();
    }
};

/// A single target direction is overdetermined; require two or more, all with
/// positive energy and pairwise distinct directions.
inline void validate_targets(const TargetMeasure& t,
                             double min_separation = 1e-9) {
    if (t.size() < 2) throw ConfigError("target measure needs at least 2 directions");
    if (t.energies.size() != t.directions.size())
        throw ConfigError("target directions/energies size mismatch");
    for (std::size_t i = 0; i < t.size(); ++i) {
        if (!(t.energies[i] > 0.0))
            throw ConfigError("target energy " + std::to_string(i) + " is not positive");
        unit_or_throw(t.directions[i], 1e-9);
        for (std::size_t j = i + 1; j < t.size(); ++j)
            if (angle_between(t.directions[i], t.directions[j]) <= min_separation)
                throw ConfigError("target directions " + std::to_string(i) + " and " +
                                  std::to_string(j) + " coincide");
    }
}

/// Piecewise-quadric refractor: regime plus the focal-parameter vector b.
/// b[0] is gauge-fixed to 1 by the solver; scaling b scales the surface.
struct RefractorSolution {
    Regime regime = Regime::HyperboloidMax;
    TargetMeasure targets;
    std::vector<double> b;
    MediumPair medium;
};

/// Radial function of the supporting quadric aimed at m: b / (1 - kappa m.x).
inline double quadric_radius(const Direction& m, double b, const Direction& x,
                             double kappa) {
    const double den = 1.0 - kappa * dot(m, x);
    if (!(den > 0.0)) throw GeometryError("inadmissible direction pair for quadric");
    return b / den;
}

/// Outward unit normal of the quadric aimed at m, at the surface point above x.
/// Independent of the focal parameter.
inline Direction quadric_normal(const Direction& m, const Direction& x,
                                double kappa) {
    return normalized(x - kappa * m);
}

struct EnvelopeSample {
    double rho = 0.0;
    int winner = 0;   // index of the supporting quadric
    bool tie = false; // a second quadric supports within tie_tol
    double margin = 0.0;  // |best - second|
};

/// Envelope over all targets: max of quadric radii in the hyperboloid regime,
/// min in the ellipsoid regime. Ties go to the lowest index and are flagged.
inline EnvelopeSample envelope_radius(const RefractorSolution& sol,
                                      const Direction& x,
                                      double tie_tol = kDefaultTieTol) {
    const bool take_max = sol.regime == Regime::HyperboloidMax;
    const std::size_t l = sol.targets.size();

    EnvelopeSample out;
    double best = 0.0;
    int best_idx = -1;
    for (std::size_t i = 0; i < l; ++i) {
        const double r =
            quadric_radius(sol.targets.directions[i], sol.b[i], x, sol.medium.kappa);
        if (best_idx < 0 || (take_max ? r > best : r < best)) {
            best = r;
            best_idx = static_cast<int>(i);
        }
    }
    double second = std::numeric_limits<double>::quiet_NaN();
    int second_idx = -1;
    for (std::size_t i = 0; i < l; ++i) {
        if (static_cast<int>(i) == best_idx) continue;
        const double r =
            quadric_radius(sol.targets.directions[i], sol.b[i], x, sol.medium.kappa);
        if (second_idx < 0 || (take_max ? r > second : r < second)) {
            second = r;
            second_idx = static_cast<int>(i);
        }
    }

    out.rho = best;
    out.winner = best_idx;
    if (second_idx >= 0) {
        out.margin = std::abs(best - second);
        if (out.margin <= tie_tol * best) {
            out.tie = true;
            for (std::size_t i = 0; i < l; ++i) {
                const double r = quadric_radius(sol.targets.directions[i], sol.b[i],
                                                x, sol.medium.kappa);
                if (std::abs(best - r) <= tie_tol * best) {
                    out.winner = static_cast<int>(i);
                    break;
                }
            }
        }
    } else {
        out.margin = best;
    }
    return out;
}

/// Per-node envelope winners over a grid. Tie-flagged nodes approximate the
/// singular set where two quadrics support the surface.
struct CellAssignment {
    std::vector<int> winner;
    std::vector<double> rho;
    std::vector<std::uint8_t> tie;
    std::vector<double> margin;

    std::size_t size() const { return winner.size(); }
    std::size_t tie_count() const {
        std::size_t n = 0;
        for (std::uint8_t t : tie) n += t;
        return n;
    }
    double tie_fraction() const {
        return winner.empty() ? 0.0
                              : static_cast<double>(tie_count()) /
                                    static_cast<double>(winner.size());
    }
};

inline CellAssignment trace_cells(const RefractorSolution& sol,
                                  const QuadratureGrid& grid,
                                  double tie_tol = kDefaultTieTol) {
    CellAssignment out;
    const std::size_t n = grid.size();
    out.winner.resize(n);
    out.rho.resize(n);
    out.tie.resize(n);
    out.margin.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
        const EnvelopeSample s = envelope_radius(sol, grid.nodes[j], tie_tol);
        out.winner[j] = s.winner;
        out.rho[j] = s.rho;
        out.tie[j] = s.tie ? 1 : 0;
        out.margin[j] = s.margin;
    }
    return out;
}

}  // namespace farfield
