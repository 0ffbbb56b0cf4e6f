// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "farfield/refractor.hpp"

namespace farfield {

/// Emitted intensity on the source cap (or prescribed intensity on the target
/// cap). Strictly positive on its cap. Tabulated densities are aligned to a
/// backing grid and evaluate by nearest node.
class SourceDensity {
public:
    enum class Kind { Uniform, CosinePower, Tabulated };

    static SourceDensity uniform(double value = 1.0) {
        if (!(value > 0.0)) throw ConfigError("uniform density must be positive");
        SourceDensity d;
        d.kind_ = Kind::Uniform;
        d.scale_ = value;
        return d;
    }

    static SourceDensity cosine_power(const Direction& axis, double exponent,
                                      double scale = 1.0) {
        if (!(scale > 0.0)) throw ConfigError("density scale must be positive");
        if (!(exponent >= 0.0)) throw ConfigError("cosine exponent must be >= 0");
        SourceDensity d;
        d.kind_ = Kind::CosinePower;
        d.axis_ = unit_or_throw(axis, 1e-9);
        d.exponent_ = exponent;
        d.scale_ = scale;
        return d;
    }

    static SourceDensity tabulated(QuadratureGrid backing,
                                   std::vector<double> values) {
        if (values.size() != backing.size())
            throw ConfigError("tabulated density does not match its grid manifest");
        for (double v : values)
            if (!(v > 0.0)) throw ConfigError("tabulated density has a nonpositive value");
        SourceDensity d;
        d.kind_ = Kind::Tabulated;
        d.backing_ = std::move(backing);
        d.values_ = std::move(values);
        return d;
    }

    Kind kind() const { return kind_; }

    double operator()(const Direction& x) const {
        switch (kind_) {
            case Kind::Uniform:
                return scale_;
            case Kind::CosinePower: {
                const double c = dot(x, axis_);
                if (!(c > 0.0))
                    throw DomainError("cosine-power density sampled outside its hemisphere");
                return scale_ * std::pow(c, exponent_);
            }
            case Kind::Tabulated: {
                std::size_t best = 0;
                double best_dot = -2.0;
                for (std::size_t j = 0; j < backing_.size(); ++j) {
                    const double d = dot(x, backing_.nodes[j]);
                    if (d > best_dot) {
                        best_dot = d;
                        best = j;
                    }
                }
                return values_[best];
            }
        }
        throw ConfigError("unreachable density kind");
    }

private:
    Kind kind_ = Kind::Uniform;
    double scale_ = 1.0;
    Direction axis_{0.0, 0.0, 1.0};
    double exponent_ = 0.0;
    QuadratureGrid backing_;
    std::vector<double> values_;
};

/// Density samples at grid nodes, validated positive.
inline std::vector<double> sample_density(const SourceDensity& f,
                                          const QuadratureGrid& grid) {
    std::vector<double> out(grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j) {
        out[j] = f(grid.nodes[j]);
        if (!(out[j] > 0.0))
            throw DomainError("density is not strictly positive on the grid");
    }
    return out;
}

/// Quadrature total of the density over the grid.
inline double total_energy(const SourceDensity& f, const QuadratureGrid& grid) {
    const std::vector<double> fx = sample_density(f, grid);
    KahanSum s;
    for (std::size_t j = 0; j < grid.size(); ++j) s.add(fx[j] * grid.weights[j]);
    return s.value();
}

/// Transmitted energy per target cell plus emitted/transmitted totals.
struct EnergyVector {
    std::vector<double> per_target;
    double total_emitted = 0.0;
    double total_transmitted = 0.0;
};

/// Transmitted-energy measure of the traced cells: cell i collects
/// f(x) * t(x.m_i) * w over its nodes. Tie-flagged nodes stay with their
/// assigned (lowest tied index) cell; their share vanishes under refinement.
inline EnergyVector refractor_measure(const RefractorSolution& sol,
                                      const SourceDensity& f,
                                      const QuadratureGrid& grid,
                                      const CellAssignment& assignment,
                                      bool lossless = false) {
    if (assignment.size() != grid.size())
        throw ConfigError("cell assignment does not match the grid");
    const std::vector<double> fx = sample_density(f, grid);
    const std::size_t l = sol.targets.size();

    std::vector<KahanSum> cells(l);
    KahanSum emitted;
    KahanSum transmitted;
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const double fw = fx[j] * grid.weights[j];
        emitted.add(fw);
        const int i = assignment.winner[j];
        const double t = fresnel_transmittance(
            dot(grid.nodes[j], sol.targets.directions[static_cast<std::size_t>(i)]),
            sol.medium, lossless);
        cells[static_cast<std::size_t>(i)].add(fw * t);
        transmitted.add(fw * t);
    }

    EnergyVector out;
    out.per_target.resize(l);
    for (std::size_t i = 0; i < l; ++i) out.per_target[i] = cells[i].value();
    out.total_emitted = emitted.value();
    out.total_transmitted = transmitted.value();
    return out;
}

struct BudgetReport {
    double supply = 0.0;    // quadrature total of f
    double required = 0.0;  // mu_total / (1 - C_eps)
    double slack = 0.0;     // supply - required
    bool pass = false;
};

/// The existence hypothesis: emitted energy must cover the target total even
/// after worst-case reflection loss.
inline BudgetReport check_energy_budget(const SourceDensity& f,
                                        const QuadratureGrid& grid,
                                        double mu_total,
                                        const FresnelBounds& bounds) {
    BudgetReport rep;
    rep.supply = total_energy(f, grid);
    rep.required = mu_total / (1.0 - bounds.c_eps);
    rep.slack = rep.supply - rep.required;
    rep.pass = rep.supply >= rep.required;
    return rep;
}

inline void require_energy_budget(const SourceDensity& f, const QuadratureGrid& grid,
                                  double mu_total, const FresnelBounds& bounds) {
    const BudgetReport rep = check_energy_budget(f, grid, mu_total, bounds);
    if (!rep.pass)
        throw BudgetError("energy budget violated: emitted total " +
                          std::to_string(rep.supply) + " is below mu_total/(1-C_eps) = " +
                          std::to_string(rep.required));
}

/// Partition a continuous target density into l cells and collapse each to a
/// point mass at its energy centroid. Cells come from a weighted Lloyd
/// iteration on a fine grid seeded along the spiral, so representatives are
/// stable under refinement and cell diameters shrink as l grows.
inline TargetMeasure discretize_target(const SourceDensity& g,
                                       const SphericalCap& cap, int cell_count,
                                       int fine_nodes = 16384) {
    if (cell_count < 2) throw ConfigError("cell_count must be at least 2");
    if (cell_count > fine_nodes)
        throw ResolutionError("cell_count exceeds the fine-grid resolution");
    const QuadratureGrid fine = build_grid(cap, fine_nodes);
    const std::vector<double> gx = sample_density(g, fine);
    std::vector<double> node_energy(fine.size());
    for (std::size_t j = 0; j < fine.size(); ++j)
        node_energy[j] = gx[j] * fine.weights[j];

    const std::size_t l = static_cast<std::size_t>(cell_count);
    std::vector<Direction> reps(l);
    for (std::size_t i = 0; i < l; ++i) {
        // Stratified seeds along the spiral cover the cap evenly.
        const std::size_t idx =
            std::min(fine.size() - 1,
                     static_cast<std::size_t>((static_cast<double>(i) + 0.5) *
                                              static_cast<double>(fine.size()) /
                                              static_cast<double>(l)));
        reps[i] = fine.nodes[idx];
    }

    std::vector<int> owner(fine.size(), 0);
    constexpr int kLloydIters = 30;
    for (int it = 0; it < kLloydIters; ++it) {
        bool changed = false;
        for (std::size_t j = 0; j < fine.size(); ++j) {
            int best = 0;
            double best_dot = -2.0;
            for (std::size_t i = 0; i < l; ++i) {
                const double d = dot(fine.nodes[j], reps[i]);
                if (d > best_dot) {
                    best_dot = d;
                    best = static_cast<int>(i);
                }
            }
            if (owner[j] != best) {
                owner[j] = best;
                changed = true;
            }
        }
        std::vector<Vec3> centroid(l, Vec3{0, 0, 0});
        std::vector<double> mass(l, 0.0);
        for (std::size_t j = 0; j < fine.size(); ++j) {
            centroid[static_cast<std::size_t>(owner[j])] =
                centroid[static_cast<std::size_t>(owner[j])] +
                node_energy[j] * fine.nodes[j];
            mass[static_cast<std::size_t>(owner[j])] += node_energy[j];
        }
        for (std::size_t i = 0; i < l; ++i) {
            if (mass[i] <= 0.0)
                throw ResolutionError("empty cell during target discretization; "
                                      "reduce cell_count or refine the fine grid");
            reps[i] = normalized(centroid[i]);
        }
        if (!changed && it > 0) break;
    }

    TargetMeasure out;
    out.directions = reps;
    out.energies.assign(l, 0.0);
    std::vector<KahanSum> sums(l);
    for (std::size_t j = 0; j < fine.size(); ++j)
        sums[static_cast<std::size_t>(owner[j])].add(node_energy[j]);
    for (std::size_t i = 0; i < l; ++i) out.energies[i] = sums[i].value();
    validate_targets(out);
    return out;
}

}  // namespace farfield
