// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "farfield/transport.hpp"

namespace farfield {

struct SolverConfig {
    double rel_tol = 1e-2;
    int max_sweeps = 200;
    int bisection_steps = 60;
    bool auto_refine = true;
    double epsilon = 0.05;  // admissibility margin; also sets the focal brackets
    bool lossless = false;
};

struct SolveReport {
    bool converged = false;
    std::vector<double> residuals;  // (G_i - g_i)/g_i, all targets
    double surplus_m1 = 0.0;        // G_1 - g_1
    int sweeps = 0;
    std::size_t grid_nodes = 0;
    double tie_fraction = 0.0;
    int refinements = 0;
    double max_abs_residual = 0.0;  // over targets i >= 2
};

struct SolveResult {
    RefractorSolution solution;
    SolveReport report;
    QuadratureGrid grid;  // final grid, after any refinement
};

namespace detail {

/// Focal-parameter interval licensed by the feasible-set bounds.
inline std::pair<double, double> focal_bracket(Regime regime, double kappa,
                                               double epsilon) {
    if (regime == Regime::HyperboloidMax)
        return {0.0, (1.0 - kappa) / (-epsilon * kappa)};
    return {1.0 + kappa, 1.0 / (1.0 + kappa)};
}

/// Starting vector: b_1 = 1, every other coordinate parked where its cell is
/// provably empty (below the hyperboloid cut-in threshold, or at the ellipsoid
/// bracket endpoint), so the sweep starts inside the feasible set.
inline std::vector<double> initial_b(Regime regime, double kappa, double epsilon,
                                     std::size_t l) {
    std::vector<double> b(l, 1.0);
    const double park = regime == Regime::HyperboloidMax
                            ? 0.9 * (-kappa * epsilon) / (1.0 - kappa)
                            : 1.0 / (1.0 + kappa);
    for (std::size_t i = 1; i < l; ++i) b[i] = park;
    return b;
}

/// Frozen-competitor view used while bisecting one coordinate: for each node,
/// the cut-in value of b_i at which quadric i matches the best competitor,
/// and the node's transmitted energy if quadric i wins it.
struct CoordinateSlice {
    std::vector<double> cut_in;     // sorted ascending
    std::vector<double> prefix;     // prefix[k] = energy of the k smallest cut-ins
    bool take_max = false;

    // Hyperboloid regime: nodes with cut_in < b belong to cell i.
    // Ellipsoid regime: nodes with cut_in > b belong to cell i.
    double cell_energy(double b) const {
        const auto it = std::lower_bound(cut_in.begin(), cut_in.end(), b);
        const std::size_t k = static_cast<std::size_t>(it - cut_in.begin());
        return take_max ? prefix[k] : prefix[cut_in.size()] - prefix[k];
    }
};

inline CoordinateSlice make_slice(const RefractorSolution& sol, std::size_t coord,
                                  const QuadratureGrid& grid,
                                  const std::vector<double>& fx, bool lossless) {
    const bool take_max = sol.regime == Regime::HyperboloidMax;
    const std::size_t l = sol.targets.size();
    const double kappa = sol.medium.kappa;
    const Direction mi = sol.targets.directions[coord];

    std::vector<std::pair<double, double>> items;  // (cut_in, energy)
    items.reserve(grid.size());
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const Direction& x = grid.nodes[j];
        double best = 0.0;
        bool first = true;
        for (std::size_t k = 0; k < l; ++k) {
            if (k == coord) continue;
            const double r = quadric_radius(sol.targets.directions[k], sol.b[k], x, kappa);
            if (first || (take_max ? r > best : r < best)) {
                best = r;
                first = false;
            }
        }
        const double denom = 1.0 - kappa * dot(mi, x);
        if (!(denom > 0.0)) throw GeometryError("inadmissible node/target pair");
        const double t = fresnel_transmittance(dot(x, mi), sol.medium, lossless);
        items.emplace_back(best * denom, fx[j] * grid.weights[j] * t);
    }
    std::sort(items.begin(), items.end());

    CoordinateSlice slice;
    slice.take_max = take_max;
    slice.cut_in.resize(items.size());
    slice.prefix.resize(items.size() + 1);
    KahanSum running;
    slice.prefix[0] = 0.0;
    for (std::size_t j = 0; j < items.size(); ++j) {
        slice.cut_in[j] = items[j].first;
        running.add(items[j].second);
        slice.prefix[j + 1] = running.value();
    }
    return slice;
}

/// Bisect one coordinate over the full focal bracket. The cell energy is a
/// monotone step function of b (nondecreasing in b for hyperboloids,
/// nonincreasing for ellipsoids); the returned b is the bracket endpoint whose
/// energy is closest to the goal.
inline double bisect_coordinate(const CoordinateSlice& slice, double goal,
                                std::pair<double, double> bracket, int steps,
                                std::size_t coord) {
    const bool rising = slice.take_max;
    double lo = bracket.first;
    double hi = bracket.second;
    const double eval_near = rising ? hi * (1.0 - 1e-12) : lo * (1.0 + 1e-12);
    const double reachable = slice.cell_energy(eval_near);
    if (reachable < goal)
        throw InfeasibleError("target " + std::to_string(coord + 1) +
                              " unreachable within its focal bracket (max cell "
                              "energy " + std::to_string(reachable) + " < " +
                              std::to_string(goal) + ")");
    // Invariant: the goal is met at the `hit` end, missed at the `miss` end.
    double hit = eval_near;
    double miss = rising ? lo : hi;
    for (int s = 0; s < steps; ++s) {
        const double mid = 0.5 * (hit + miss);
        if (slice.cell_energy(mid) >= goal)
            hit = mid;
        else
            miss = mid;
    }
    const double err_hit = std::abs(slice.cell_energy(hit) - goal);
    const double err_miss = std::abs(slice.cell_energy(miss) - goal);
    double chosen = err_miss < err_hit ? miss : hit;
    if (!(chosen > bracket.first) || !(chosen < bracket.second))
        chosen = hit;  // stay strictly inside the open bracket
    return chosen;
}

}  // namespace detail

/// Gauss-Seidel sweep over the focal parameters: each pass pushes every
/// coordinate i >= 2 to the value where its cell's transmitted energy matches
/// g_i, with the rest frozen. The first target is never adjusted and absorbs
/// the reflection surplus. Deterministic: fixed sweep order, fixed bisection.
inline SolveResult solve_discrete(const SourceDensity& f, QuadratureGrid grid,
                                  const TargetMeasure& targets,
                                  const MediumPair& medium,
                                  const SolverConfig& config) {
    validate_targets(targets);
    if (!(config.rel_tol > 0.0)) throw ConfigError("rel_tol must be positive");
    if (config.max_sweeps < 1) throw ConfigError("max_sweeps must be at least 1");
    if (!(config.epsilon > 0.0)) throw ConfigError("epsilon must be positive");
    const Regime regime = regime_of(medium.kappa);
    const std::size_t l = targets.size();

    // Hypothesis guards: every node/target pair must clear the admissibility
    // margin, and the emitted energy must cover the target total after
    // worst-case reflection loss.
    const double threshold = admissibility_threshold(medium.kappa);
    double worst = 2.0;
    for (const Direction& x : grid.nodes)
        for (const Direction& m : targets.directions)
            worst = std::min(worst, dot(x, m));
    if (worst < threshold + config.epsilon)
        throw AdmissibilityError("grid/target pair below admissibility margin: "
                                 "min x.m = " + std::to_string(worst));
    const FresnelBounds bounds = fresnel_bound(medium, config.epsilon);
    require_energy_budget(f, grid, targets.total(), bounds);

    const double min_g =
        *std::min_element(targets.energies.begin(), targets.energies.end());

    // Granularity: the bisection can only land within one node flip of the
    // goal, so single-node energies must sit below rel_tol * min g.
    int refinements = 0;
    std::vector<double> fx = sample_density(f, grid);
    if (config.auto_refine) {
        constexpr std::size_t kMaxNodes = 4'200'000;
        for (;;) {
            double max_node = 0.0;
            for (std::size_t j = 0; j < grid.size(); ++j)
                max_node = std::max(max_node, fx[j] * grid.weights[j]);
            if (max_node <= config.rel_tol * min_g) break;
            const std::size_t next = grid.size() * 4;
            if (next > kMaxNodes)
                throw ResolutionError("grid refinement exceeded the node budget "
                                      "before reaching the requested tolerance");
            grid = build_grid(grid.cap, static_cast<int>(next));
            fx = sample_density(f, grid);
            ++refinements;
        }
    }

    RefractorSolution sol;
    sol.regime = regime;
    sol.targets = targets;
    sol.medium = medium;
    sol.b = detail::initial_b(regime, medium.kappa, config.epsilon, l);
    const auto bracket = detail::focal_bracket(regime, medium.kappa, config.epsilon);

    SolveReport report;
    report.refinements = refinements;
    report.grid_nodes = grid.size();

    EnergyVector energies;
    CellAssignment assignment;
    for (int sweep = 1; sweep <= config.max_sweeps; ++sweep) {
        for (std::size_t i = 1; i < l; ++i) {
            const detail::CoordinateSlice slice =
                detail::make_slice(sol, i, grid, fx, config.lossless);
            sol.b[i] = detail::bisect_coordinate(slice, targets.energies[i], bracket,
                                                 config.bisection_steps, i);
        }
        report.sweeps = sweep;

        assignment = trace_cells(sol, grid);
        energies = refractor_measure(sol, f, grid, assignment, config.lossless);
        report.max_abs_residual = 0.0;
        for (std::size_t i = 1; i < l; ++i)
            report.max_abs_residual =
                std::max(report.max_abs_residual,
                         std::abs(energies.per_target[i] - targets.energies[i]) /
                             targets.energies[i]);
        const bool head_ok = energies.per_target[0] >=
                             targets.energies[0] * (1.0 - config.rel_tol);
        if (report.max_abs_residual <= config.rel_tol && head_ok) {
            report.converged = true;
            break;
        }
    }

    report.residuals.resize(l);
    for (std::size_t i = 0; i < l; ++i)
        report.residuals[i] =
            (energies.per_target[i] - targets.energies[i]) / targets.energies[i];
    report.surplus_m1 = energies.per_target[0] - targets.energies[0];
    report.tie_fraction = assignment.tie_fraction();

    SolveResult result;
    result.solution = std::move(sol);
    result.report = std::move(report);
    result.grid = std::move(grid);
    return result;
}

enum class NormalizeMode {
    MinRadiusOne,  // scale so the smallest grid radius is 1
    GaugeB1,       // scale so b_1 = 1
};

/// Rescale the focal vector; winners and tie flags are scale invariant.
inline RefractorSolution normalize_solution(const RefractorSolution& sol,
                                            const QuadratureGrid& grid,
                                            NormalizeMode mode) {
    double scale = 1.0;
    if (mode == NormalizeMode::GaugeB1) {
        scale = 1.0 / sol.b.at(0);
    } else {
        double min_rho = std::numeric_limits<double>::infinity();
        for (const Direction& x : grid.nodes)
            min_rho = std::min(min_rho, envelope_radius(sol, x).rho);
        scale = 1.0 / min_rho;
    }
    RefractorSolution out = sol;
    for (double& bi : out.b) bi *= scale;
    return out;
}

}  // namespace farfield
