// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "farfield/io.hpp"

using namespace farfield;
namespace fs = std::filesystem;

namespace {

Json minimal_config() {
    return Json::parse(R"({
      "medium": {"kappa": -1.5, "sigma": 1.2, "alpha": 0.5},
      "epsilon": 0.1,
      "source": {"cap": {"axis": [0,0,1], "radius": 0.4}, "grid_size": 1000},
      "target": {"cap": {"axis": [0,0,1], "radius": 0.3},
                 "points": [
                   {"direction": [0.0993347, 0.0, 0.995004], "energy": 0.05},
                   {"direction": [-0.0993347, 0.0, 0.995004], "energy": 0.05}
                 ]}
    })");
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("farfield_io_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("solution json round trip is bit identical") {
    RefractorSolution sol;
    sol.medium = make_medium(1.0, -1.5, 1.0, 1.2, 0.5);
    sol.regime = sol.medium.regime();
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.2, 3.0);
    for (int i = 0; i < 9; ++i) {
        const double a = 0.05 + 0.02 * i;
        sol.targets.directions.push_back(
            {std::sin(a) * std::cos(1.7 * i), std::sin(a) * std::sin(1.7 * i),
             std::cos(a)});
        sol.targets.energies.push_back(u(rng));
        sol.b.push_back(i == 0 ? 1.0 : u(rng));
    }

    const Json j = solution_to_json(sol, "gauge_b1", 20000, 0.1, false);
    const std::string text = j.dump();  // through the serializer and back
    const StoredSolution back = solution_from_json(Json::parse(text));

    CHECK(back.solution.regime == sol.regime);
    CHECK(back.grid_size == 20000);
    CHECK(back.normalization == "gauge_b1");
    REQUIRE(back.solution.b.size() == sol.b.size());
    for (std::size_t i = 0; i < sol.b.size(); ++i) {
        CHECK(back.solution.b[i] == sol.b[i]);  // bit identical
        CHECK(back.solution.targets.energies[i] == sol.targets.energies[i]);
        CHECK(back.solution.targets.directions[i].x == sol.targets.directions[i].x);
    }
}

TEST_CASE("stored solution consistency checks") {
    RefractorSolution sol;
    sol.medium = make_medium_kappa(-1.5, 1.0, 0.5);
    sol.regime = sol.medium.regime();
    sol.targets.directions = {{0, 0, 1}, {0.1, 0, 0.99498743710662}};
    sol.targets.energies = {1.0, 1.0};
    sol.b = {1.0, 1.0};
    Json j = solution_to_json(sol, "gauge_b1", 100, 0.1, false);

    Json bad_kappa = j;
    bad_kappa["kappa"] = -2.0;
    CHECK_THROWS_AS(solution_from_json(bad_kappa), ConfigError);

    Json bad_regime = j;
    bad_regime["regime"] = "ellipsoid_min";
    CHECK_THROWS_AS(solution_from_json(bad_regime), ConfigError);

    Json bad_b = j;
    bad_b["b"] = {1.0};
    CHECK_THROWS_AS(solution_from_json(bad_b), ConfigError);
}

TEST_CASE("config parsing accepts indices or kappa") {
    Json j = minimal_config();
    RunConfig cfg = parse_config(j);
    CHECK(cfg.medium.kappa == doctest::Approx(-1.5));
    CHECK(cfg.medium.sigma == doctest::Approx(1.2));
    CHECK(cfg.explicit_targets.has_value());
    CHECK(cfg.solver.epsilon == doctest::Approx(0.1));

    Json j2 = minimal_config();
    j2["medium"] = {{"n1", 1.0}, {"n2", -1.5}, {"z1", 1.0}, {"z2", 1.2},
                    {"alpha", 0.5}};
    CHECK(parse_config(j2).medium.kappa == doctest::Approx(-1.5));

    Json j3 = minimal_config();
    j3["medium"]["n1"] = 1.0;
    j3["medium"]["n2"] = -1.5;  // consistent with kappa -1.5
    CHECK_NOTHROW(parse_config(j3));
    j3["medium"]["n2"] = -2.0;  // now inconsistent
    CHECK_THROWS_AS(parse_config(j3), ConfigError);
}

TEST_CASE("config rejects bad blocks") {
    Json base = minimal_config();

    Json no_medium = base;
    no_medium.erase("medium");
    CHECK_THROWS_AS(parse_config(no_medium), ConfigError);

    Json both_targets = base;
    both_targets["target"]["density"] = {{"kind", "uniform"}};
    CHECK_THROWS_AS(parse_config(both_targets), ConfigError);

    Json no_targets = base;
    no_targets["target"].erase("points");
    CHECK_THROWS_AS(parse_config(no_targets), ConfigError);

    Json one_point = base;
    one_point["target"]["points"] = {{{"direction", {0.0, 0.0, 1.0}},
                                      {"energy", 0.05}}};
    CHECK_THROWS_AS(parse_config(one_point), ConfigError);

    Json bad_eps = base;
    bad_eps["epsilon"] = -0.1;
    CHECK_THROWS_AS(parse_config(bad_eps), ConfigError);

    Json positive_kappa = base;
    positive_kappa["medium"]["kappa"] = 1.5;
    CHECK_THROWS_AS(parse_config(positive_kappa), ConfigError);

    Json mismatched_regime = base;
    mismatched_regime["regime"] = "ellipsoid_min";  // kappa is -1.5
    CHECK_THROWS_AS(parse_config(mismatched_regime), ConfigError);
    mismatched_regime["regime"] = "hyperboloid_max";
    CHECK_NOTHROW(parse_config(mismatched_regime));
}

TEST_CASE("tabulated density reads an indexed csv") {
    TempDir tmp;
    const fs::path csv = tmp.path / "density.csv";
    {
        std::ofstream out(csv);
        out << "# node,value\n";
        const QuadratureGrid grid = build_grid(make_cap({0, 0, 1}, 0.4), 32);
        for (std::size_t j = 0; j < grid.size(); ++j)
            out << j << "," << (1.0 + 0.1 * double(j)) << "\n";
    }
    Json j = minimal_config();
    j["source"]["grid_size"] = 32;
    j["source"]["density"] = {{"kind", "tabulated"}, {"path", csv.string()}};
    const RunConfig cfg = parse_config(j);
    const QuadratureGrid grid = build_grid(cfg.source_cap, 32);
    CHECK(cfg.source_density(grid.nodes[5]) == doctest::Approx(1.5));

    // A missing row is an error.
    {
        std::ofstream out(csv);
        out << "0,1.0\n";
    }
    CHECK_THROWS_AS(parse_config(j), IoError);
}

TEST_CASE("surface export writes vertices and rows") {
    TempDir tmp;
    RefractorSolution sol;
    sol.medium = make_medium_kappa(-1.5, 1.0, 0.5);
    sol.regime = sol.medium.regime();
    sol.targets.directions = {{0, 0, 1}, {0.0993347, 0.0, 0.995004}};
    sol.targets.energies = {1.0, 1.0};
    sol.b = {1.0, 0.9};
    const QuadratureGrid grid = build_grid(make_cap({0, 0, 1}, 0.4), 100);
    const CellAssignment cells = trace_cells(sol, grid);

    const std::string obj = (tmp.path / "surface.obj").string();
    const std::string csv = (tmp.path / "surface.csv").string();
    write_surface_obj(grid, cells, obj);
    write_surface_csv(grid, cells, csv);

    std::ifstream obj_in(obj);
    std::string line;
    std::size_t vertices = 0;
    while (std::getline(obj_in, line))
        if (line.rfind("v ", 0) == 0) ++vertices;
    CHECK(vertices == grid.size());

    std::ifstream csv_in(csv);
    std::size_t rows = 0;
    std::getline(csv_in, line);
    CHECK(line == "x1,x2,x3,rho,winner,tie_flag");
    while (std::getline(csv_in, line)) ++rows;
    CHECK(rows == grid.size());
}

TEST_CASE("target measure json round trip") {
    TargetMeasure tm;
    tm.directions = {{0, 0, 1}, {0.0993347, 0.0, 0.995004}};
    tm.energies = {0.25, 0.5};
    const TargetMeasure back = targets_from_json(targets_to_json(tm));
    REQUIRE(back.size() == 2);
    CHECK(back.energies[0] == tm.energies[0]);
    CHECK(back.directions[1].x == tm.directions[1].x);
}
