// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <random>

#include "farfield/refractor.hpp"

using namespace farfield;

namespace {

// Unit vector with a prescribed dot product against (0,0,1).
Direction with_polar_cos(double c, double azimuth = 0.0) {
    const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
    return {s * std::cos(azimuth), s * std::sin(azimuth), c};
}

RefractorSolution two_target_solution(double kappa, double b2 = 1.0,
                                      double half_angle = 0.25) {
    RefractorSolution sol;
    sol.medium = make_medium_kappa(kappa, 1.0, 0.5);
    sol.regime = sol.medium.regime();
    sol.targets.directions = {with_polar_cos(std::cos(half_angle), 0.0),
                              with_polar_cos(std::cos(half_angle), kPi)};
    sol.targets.energies = {1.0, 1.0};
    sol.b = {1.0, b2};
    return sol;
}

}  // namespace

TEST_CASE("quadric radius worked values") {
    const Direction z{0, 0, 1};
    CHECK(quadric_radius(z, 1.0, z, -2.0) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(quadric_radius(z, 1.0, z, -0.5) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
    const Direction x = with_polar_cos(0.8);
    CHECK(quadric_radius(z, 2.0, x, -2.0) == doctest::Approx(2.0 / 2.6).epsilon(1e-14));
}

TEST_CASE("quadric radius rejects a nonpositive denominator") {
    // 1 - kappa m.x <= 0 requires m.x < -1/|kappa| in the steep regime.
    const Direction z{0, 0, 1};
    CHECK_THROWS_AS(quadric_radius(z, 1.0, with_polar_cos(-0.6), -2.0), GeometryError);
}

TEST_CASE("quadric normal worked values") {
    const Direction z{0, 0, 1};
    CHECK(norm(quadric_normal(z, z, -2.0) - z) < 1e-15);
    CHECK(norm(quadric_normal(z, z, -0.5) - z) < 1e-15);
    const Direction m{1, 0, 0};  // orthogonal pair
    const Vec3 expected = normalized(Vec3{2.0, 0.0, 1.0});  // (x + 2m)/sqrt(5)
    CHECK(norm(quadric_normal(m, z, -2.0) - expected) < 1e-15);
}

TEST_CASE("envelope winner selection by regime") {
    const Direction x{0, 0, 1};
    RefractorSolution sol;
    sol.targets.directions = {with_polar_cos(0.9), with_polar_cos(0.8)};
    sol.targets.energies = {1.0, 1.0};
    sol.b = {1.0, 1.0};

    sol.medium = make_medium_kappa(-2.0, 1.0, 0.5);
    sol.regime = Regime::HyperboloidMax;
    EnvelopeSample smax = envelope_radius(sol, x);
    CHECK(smax.winner == 1);  // 1/2.6 > 1/2.8: the max regime favors smaller m.x
    CHECK(smax.rho == doctest::Approx(1.0 / 2.6).epsilon(1e-14));
    CHECK_FALSE(smax.tie);

    sol.medium = make_medium_kappa(-0.5, 1.0, 0.5);
    sol.regime = Regime::EllipsoidMin;
    EnvelopeSample smin = envelope_radius(sol, x);
    CHECK(smin.winner == 0);  // 1/1.45 < 1/1.4: the min regime favors larger m.x
    CHECK(smin.rho == doctest::Approx(1.0 / 1.45).epsilon(1e-14));
}

TEST_CASE("single-quadric envelope equals the quadric") {
    RefractorSolution sol;
    sol.medium = make_medium_kappa(-2.0, 1.0, 0.5);
    sol.regime = Regime::HyperboloidMax;
    sol.targets.directions = {Direction{0, 0, 1}};
    sol.targets.energies = {1.0};
    sol.b = {0.7};
    const Direction x = with_polar_cos(0.95, 1.1);
    const EnvelopeSample s = envelope_radius(sol, x);
    CHECK(s.rho == doctest::Approx(quadric_radius({0, 0, 1}, 0.7, x, -2.0)));
    CHECK(s.winner == 0);
    CHECK_FALSE(s.tie);
}

TEST_CASE("coincident quadrics tie to the lowest index") {
    RefractorSolution sol = two_target_solution(-2.0);
    sol.targets.directions[1] = sol.targets.directions[0];
    const QuadratureGrid grid = build_grid(make_cap({0, 0, 1}, 0.4), 128);
    const CellAssignment cells = trace_cells(sol, grid);
    for (std::size_t j = 0; j < grid.size(); ++j) {
        CHECK(cells.winner[j] == 0);
        CHECK(cells.tie[j] == 1);
    }
}

TEST_CASE("mirror-symmetric targets split the grid about evenly") {
    for (double kappa : {-2.0, -0.5}) {
        const RefractorSolution sol = two_target_solution(kappa);
        const QuadratureGrid grid = build_grid(make_cap({0, 0, 1}, 0.4), 20000);
        const CellAssignment cells = trace_cells(sol, grid);
        std::size_t c0 = 0, c1 = 0;
        for (std::size_t j = 0; j < grid.size(); ++j)
            (cells.winner[j] == 0 ? c0 : c1)++;
        const double imbalance =
            std::abs(double(c0) - double(c1)) / double(grid.size());
        CHECK(imbalance < 0.02);
        CHECK(cells.tie_fraction() < 0.01);
    }
}

TEST_CASE("winner is the plane of equal dot products for equal b") {
    const RefractorSolution sol = two_target_solution(-2.0);
    const QuadratureGrid grid = build_grid(make_cap({0, 0, 1}, 0.4), 4000);
    const CellAssignment cells = trace_cells(sol, grid);
    for (std::size_t j = 0; j < grid.size(); ++j) {
        if (cells.tie[j]) continue;
        const double d0 = dot(grid.nodes[j], sol.targets.directions[0]);
        const double d1 = dot(grid.nodes[j], sol.targets.directions[1]);
        // Max regime with equal b: the winner has the smaller dot.
        CHECK(cells.winner[j] == (d0 < d1 ? 0 : 1));
    }
}

TEST_CASE("scaling the focal vector preserves the assignment exactly") {
    for (double kappa : {-2.0, -0.5}) {
        RefractorSolution sol = two_target_solution(kappa, 1.07);
        const QuadratureGrid grid = build_grid(make_cap({0, 0, 1}, 0.4), 5000);
        const CellAssignment base = trace_cells(sol, grid);
        RefractorSolution doubled = sol;
        for (double& b : doubled.b) b *= 2.0;
        const CellAssignment scaled = trace_cells(doubled, grid);
        for (std::size_t j = 0; j < grid.size(); ++j) {
            REQUIRE(scaled.winner[j] == base.winner[j]);
            REQUIRE(scaled.tie[j] == base.tie[j]);
            REQUIRE(scaled.rho[j] == 2.0 * base.rho[j]);  // exact in binary
        }
    }
}

TEST_CASE("envelope support consistency at non-tie nodes") {
    std::mt19937_64 rng(4242);
    std::uniform_real_distribution<double> ub(0.5, 1.5);
    for (double kappa : {-1.7, -0.6}) {
        RefractorSolution sol;
        sol.medium = make_medium_kappa(kappa, 1.2, 0.5);
        sol.regime = sol.medium.regime();
        const bool take_max = sol.regime == Regime::HyperboloidMax;
        for (int i = 0; i < 5; ++i) {
            sol.targets.directions.push_back(with_polar_cos(0.96 + 0.007 * i, 1.3 * i));
            sol.targets.energies.push_back(1.0);
            sol.b.push_back(take_max ? 0.3 * ub(rng) : 1.4 + 0.2 * ub(rng));
        }
        const QuadratureGrid grid = build_grid(make_cap({0, 0, 1}, 0.35), 3000);
        const CellAssignment cells = trace_cells(sol, grid);
        for (std::size_t j = 0; j < grid.size(); ++j) {
            if (cells.tie[j]) continue;
            const double rw = quadric_radius(
                sol.targets.directions[static_cast<std::size_t>(cells.winner[j])],
                sol.b[static_cast<std::size_t>(cells.winner[j])], grid.nodes[j], kappa);
            REQUIRE(cells.rho[j] == doctest::Approx(rw).epsilon(1e-14));
            for (std::size_t i = 0; i < sol.targets.size(); ++i) {
                const double ri = quadric_radius(sol.targets.directions[i], sol.b[i],
                                                 grid.nodes[j], kappa);
                if (take_max)
                    REQUIRE(cells.rho[j] >= ri - 1e-14);
                else
                    REQUIRE(cells.rho[j] <= ri + 1e-14);
            }
        }
    }
}

TEST_CASE("lipschitz difference quotients respect the regime constant") {
    // After normalizing so min rho = 1, quotients stay below M/(eps^2 |kappa|)
    // in the steep regime and M |kappa| / (1 - kappa^2) otherwise.
    std::mt19937_64 rng(2024);
    for (double kappa : {-1.5, -0.5}) {
        RefractorSolution sol = two_target_solution(kappa, 1.1);
        const QuadratureGrid grid = build_grid(make_cap({0, 0, 1}, 0.4), 4000);
        CellAssignment cells = trace_cells(sol, grid);
        double min_rho = 1e300, max_rho = 0.0;
        for (double r : cells.rho) {
            min_rho = std::min(min_rho, r);
            max_rho = std::max(max_rho, r);
        }
        const double eps = 0.1;
        const double m_over = max_rho / min_rho;
        const double bound = kappa < -1.0
                                 ? m_over / (eps * eps * std::abs(kappa))
                                 : m_over * std::abs(kappa) / (1.0 - kappa * kappa);
        std::uniform_int_distribution<std::size_t> pick(0, grid.size() - 1);
        for (int trial = 0; trial < 20000; ++trial) {
            const std::size_t a = pick(rng), b = pick(rng);
            if (a == b) continue;
            const double dr = std::abs(cells.rho[a] - cells.rho[b]) / min_rho;
            const double dx = norm(grid.nodes[a] - grid.nodes[b]);
            REQUIRE(dr <= bound * dx * 1.05);
        }
    }
}

TEST_CASE("target validation rejects degenerate measures") {
    TargetMeasure t;
    t.directions = {Direction{0, 0, 1}};
    t.energies = {1.0};
    CHECK_THROWS_AS(validate_targets(t), ConfigError);
    t.directions.push_back(Direction{0, 0, 1});
    t.energies.push_back(0.5);
    CHECK_THROWS_AS(validate_targets(t), ConfigError);  // coincident directions
    t.directions[1] = with_polar_cos(0.95);
    t.energies[1] = 0.0;
    CHECK_THROWS_AS(validate_targets(t), ConfigError);  // nonpositive energy
    t.energies[1] = 0.5;
    CHECK_NOTHROW(validate_targets(t));
}
