// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "farfield/verify.hpp"

namespace farfield {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

struct FieldSpec {
    enum class Kind { Quadric, PerturbedQuadric };
    Kind kind = Kind::Quadric;
    Direction direction{0.0, 0.0, 1.0};
    double b = 1.0;
    double amplitude = 0.01;
    double w1 = 3.0, w2 = 2.5;
    double c1 = 0.4, c2 = -0.3;
};

struct MaSpec {
    double fd_step = 1e-4;
    double disc_radius = 0.35;
    int points_per_axis = 16;
    bool per_cell = false;
};

struct RunConfig {
    MediumPair medium;
    double epsilon = 0.05;
    bool lossless = false;
    SphericalCap source_cap;
    SourceDensity source_density = SourceDensity::uniform();
    int grid_size = 20000;
    SphericalCap target_cap;
    std::optional<TargetMeasure> explicit_targets;
    std::optional<SourceDensity> target_density;
    int target_cell_count = 0;
    SolverConfig solver;
    std::optional<Regime> declared_regime;
    std::optional<FieldSpec> field;
    MaSpec ma;
};

namespace detail {

inline Vec3 parse_vec3(const Json& j, const char* what) {
    if (!j.is_array() || j.size() != 3)
        throw ConfigError(std::string(what) + " must be a 3-element array");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline SphericalCap parse_cap(const Json& j) {
    if (!j.contains("axis") || !j.contains("radius"))
        throw ConfigError("cap needs \"axis\" and \"radius\"");
    return make_cap(normalized(parse_vec3(j["axis"], "cap axis")),
                    j["radius"].get<double>());
}

inline std::vector<double> read_csv_values(const std::string& path,
                                           std::size_t expected) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open tabulated density file: " + path);
    std::vector<double> values(expected, 0.0);
    std::vector<bool> seen(expected, false);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string idx_s, val_s;
        if (!std::getline(ss, idx_s, ',') || !std::getline(ss, val_s))
            throw IoError("malformed tabulated density row: " + line);
        const std::size_t idx = static_cast<std::size_t>(std::stoul(idx_s));
        if (idx >= expected)
            throw IoError("tabulated density index out of range: " + idx_s);
        values[idx] = std::stod(val_s);
        seen[idx] = true;
    }
    for (std::size_t j = 0; j < expected; ++j)
        if (!seen[j])
            throw IoError("tabulated density is missing node " + std::to_string(j));
    return values;
}

inline SourceDensity parse_density(const Json& j, const SphericalCap& cap,
                                   int grid_size) {
    const std::string kind = j.value("kind", "uniform");
    if (kind == "uniform") return SourceDensity::uniform(j.value("value", 1.0));
    if (kind == "cosine_power") {
        const Vec3 axis = j.contains("axis") ? parse_vec3(j["axis"], "density axis")
                                             : cap.axis;
        return SourceDensity::cosine_power(normalized(axis),
                                           j.value("exponent", 1.0),
                                           j.value("scale", 1.0));
    }
    if (kind == "tabulated") {
        if (!j.contains("path")) throw ConfigError("tabulated density needs \"path\"");
        QuadratureGrid manifest = build_grid(cap, grid_size);
        std::vector<double> values =
            read_csv_values(j["path"].get<std::string>(), manifest.size());
        return SourceDensity::tabulated(std::move(manifest), std::move(values));
    }
    throw ConfigError("unknown density kind: " + kind);
}

}  // namespace detail

inline const char* regime_name(Regime r) {
    return r == Regime::HyperboloidMax ? "hyperboloid_max" : "ellipsoid_min";
}

inline Regime regime_from_name(const std::string& s) {
    if (s == "hyperboloid_max") return Regime::HyperboloidMax;
    if (s == "ellipsoid_min") return Regime::EllipsoidMin;
    throw ConfigError("unknown regime name: " + s);
}

inline RunConfig parse_config(const Json& j) {
    RunConfig cfg;
    if (!j.contains("medium")) throw ConfigError("config needs a \"medium\" block");
    const Json& jm = j["medium"];
    const double alpha = jm.value("alpha", 0.5);
    if (jm.contains("n1") || jm.contains("n2")) {
        if (!jm.contains("n1") || !jm.contains("n2"))
            throw ConfigError("medium needs both n1 and n2 when indices are given");
        cfg.medium = make_medium(jm["n1"].get<double>(), jm["n2"].get<double>(),
                                 jm.value("z1", 1.0), jm.value("z2", 1.0), alpha);
        if (jm.contains("kappa") &&
            std::abs(jm["kappa"].get<double>() - cfg.medium.kappa) > 1e-12)
            throw ConfigError("medium kappa is inconsistent with n2/n1");
    } else if (jm.contains("kappa")) {
        cfg.medium = make_medium_kappa(jm["kappa"].get<double>(),
                                       jm.value("sigma", 1.0), alpha);
    } else {
        throw ConfigError("medium needs either (n1, n2) or kappa");
    }

    cfg.epsilon = j.value("epsilon", 0.05);
    if (!(cfg.epsilon > 0.0)) throw ConfigError("epsilon must be positive");
    cfg.lossless = j.value("lossless", false);

    if (!j.contains("source")) throw ConfigError("config needs a \"source\" block");
    const Json& js = j["source"];
    if (!js.contains("cap")) throw ConfigError("source needs a \"cap\"");
    cfg.source_cap = detail::parse_cap(js["cap"]);
    cfg.grid_size = js.value("grid_size", 20000);
    if (cfg.grid_size < kMinGridNodes) throw ConfigError("source grid_size too small");
    cfg.source_density = js.contains("density")
                             ? detail::parse_density(js["density"], cfg.source_cap,
                                                     cfg.grid_size)
                             : SourceDensity::uniform();

    if (!j.contains("target")) throw ConfigError("config needs a \"target\" block");
    const Json& jt = j["target"];
    if (!jt.contains("cap")) throw ConfigError("target needs a \"cap\"");
    cfg.target_cap = detail::parse_cap(jt["cap"]);
    const bool has_points = jt.contains("points") || jt.contains("points_file");
    const bool has_density = jt.contains("density");
    if (has_points == has_density)
        throw ConfigError("target needs exactly one of \"points\"/\"points_file\" "
                          "or \"density\"");
    if (has_points) {
        Json points;
        if (jt.contains("points_file")) {
            std::ifstream in(jt["points_file"].get<std::string>());
            if (!in)
                throw IoError("cannot open target points file: " +
                              jt["points_file"].get<std::string>());
            in >> points;
        } else {
            points = jt["points"];
        }
        TargetMeasure tm;
        for (const Json& p : points) {
            tm.directions.push_back(
                normalized(detail::parse_vec3(p.at("direction"), "target direction")));
            tm.energies.push_back(p.at("energy").get<double>());
        }
        validate_targets(tm);
        cfg.explicit_targets = std::move(tm);
    } else {
        cfg.target_density =
            detail::parse_density(jt["density"], cfg.target_cap, 16384);
        cfg.target_cell_count = jt.value("cell_count", 0);
        if (cfg.target_cell_count < 2)
            throw ConfigError("continuous target needs cell_count >= 2");
    }

    if (j.contains("solver")) {
        const Json& jo = j["solver"];
        cfg.solver.rel_tol = jo.value("rel_tol", cfg.solver.rel_tol);
        cfg.solver.max_sweeps = jo.value("max_sweeps", cfg.solver.max_sweeps);
        cfg.solver.bisection_steps =
            jo.value("bisection_steps", cfg.solver.bisection_steps);
        cfg.solver.auto_refine = jo.value("auto_refine", cfg.solver.auto_refine);
    }
    cfg.solver.epsilon = cfg.epsilon;
    cfg.solver.lossless = cfg.lossless;

    if (j.contains("regime")) {
        const std::string r = j["regime"].get<std::string>();
        if (r != "auto") {
            cfg.declared_regime = regime_from_name(r);
            if (*cfg.declared_regime != cfg.medium.regime())
                throw ConfigError("declared regime does not match the sign regime "
                                  "of kappa = " + std::to_string(cfg.medium.kappa));
        }
    }

    if (j.contains("field")) {
        const Json& jf = j["field"];
        FieldSpec fs;
        const std::string kind = jf.value("kind", "quadric");
        if (kind == "quadric")
            fs.kind = FieldSpec::Kind::Quadric;
        else if (kind == "perturbed_quadric")
            fs.kind = FieldSpec::Kind::PerturbedQuadric;
        else
            throw ConfigError("unknown field kind: " + kind);
        if (jf.contains("direction"))
            fs.direction = normalized(detail::parse_vec3(jf["direction"], "field direction"));
        fs.b = jf.value("b", 1.0);
        fs.amplitude = jf.value("amplitude", 0.01);
        fs.w1 = jf.value("w1", 3.0);
        fs.w2 = jf.value("w2", 2.5);
        fs.c1 = jf.value("c1", 0.4);
        fs.c2 = jf.value("c2", -0.3);
        cfg.field = fs;
    }
    if (j.contains("ma")) {
        const Json& ja = j["ma"];
        cfg.ma.fd_step = ja.value("fd_step", 1e-4);
        cfg.ma.disc_radius = ja.value("disc_radius", 0.35);
        cfg.ma.points_per_axis = ja.value("points_per_axis", 16);
        cfg.ma.per_cell = ja.value("per_cell", false);
    }
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file: " + path);
    Json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return parse_config(j);
}

// ---------------------------------------------------------------------------
// Solution and report serialization
// ---------------------------------------------------------------------------

inline Json targets_to_json(const TargetMeasure& t) {
    Json arr = Json::array();
    for (std::size_t i = 0; i < t.size(); ++i)
        arr.push_back({{"direction", {t.directions[i].x, t.directions[i].y,
                                      t.directions[i].z}},
                       {"energy", t.energies[i]}});
    return arr;
}

inline TargetMeasure targets_from_json(const Json& arr) {
    TargetMeasure t;
    for (const Json& p : arr) {
        t.directions.push_back(detail::parse_vec3(p.at("direction"), "target direction"));
        t.energies.push_back(p.at("energy").get<double>());
    }
    return t;
}

inline Json solution_to_json(const RefractorSolution& sol,
                             const std::string& normalization,
                             std::size_t grid_size, double epsilon,
                             bool lossless) {
    Json j;
    j["regime"] = regime_name(sol.regime);
    j["kappa"] = sol.medium.kappa;
    j["medium"] = {{"n1", sol.medium.n1}, {"n2", sol.medium.n2},
                   {"z1", sol.medium.z1}, {"z2", sol.medium.z2},
                   {"alpha", sol.medium.alpha}};
    j["targets"] = targets_to_json(sol.targets);
    j["b"] = sol.b;
    j["normalization"] = normalization;
    j["grid_size"] = grid_size;
    j["epsilon"] = epsilon;
    j["lossless"] = lossless;
    return j;
}

struct StoredSolution {
    RefractorSolution solution;
    std::string normalization;
    std::size_t grid_size = 0;
    double epsilon = 0.05;
    bool lossless = false;
};

inline StoredSolution solution_from_json(const Json& j) {
    StoredSolution out;
    out.solution.regime = regime_from_name(j.at("regime").get<std::string>());
    const Json& jm = j.at("medium");
    out.solution.medium =
        make_medium(jm.at("n1").get<double>(), jm.at("n2").get<double>(),
                    jm.at("z1").get<double>(), jm.at("z2").get<double>(),
                    jm.at("alpha").get<double>());
    if (std::abs(out.solution.medium.kappa - j.at("kappa").get<double>()) > 1e-12)
        throw ConfigError("stored kappa is inconsistent with the stored medium");
    if (out.solution.regime != out.solution.medium.regime())
        throw ConfigError("stored regime does not match the stored kappa");
    out.solution.targets = targets_from_json(j.at("targets"));
    out.solution.b = j.at("b").get<std::vector<double>>();
    if (out.solution.b.size() != out.solution.targets.size())
        throw ConfigError("stored focal vector does not match the target count");
    out.normalization = j.value("normalization", "gauge_b1");
    out.grid_size = j.value("grid_size", std::size_t{0});
    out.epsilon = j.value("epsilon", 0.05);
    out.lossless = j.value("lossless", false);
    return out;
}

inline Json report_to_json(const SolveReport& r) {
    Json j;
    j["converged"] = r.converged;
    j["residuals"] = r.residuals;
    j["surplus_m1"] = r.surplus_m1;
    j["sweeps"] = r.sweeps;
    j["grid_nodes"] = r.grid_nodes;
    j["tie_fraction"] = r.tie_fraction;
    j["refinements"] = r.refinements;
    j["max_abs_residual"] = r.max_abs_residual;
    return j;
}

inline void write_json_file(const Json& j, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write file: " + path);
    out << j.dump(2) << "\n";
}

inline Json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open file: " + path);
    Json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw IoError(std::string("file is not valid JSON: ") + path + ": " + e.what());
    }
    return j;
}

// ---------------------------------------------------------------------------
// Mesh export
// ---------------------------------------------------------------------------

/// Vertex-only Wavefront OBJ of the sampled surface rho(x) x.
inline void write_surface_obj(const QuadratureGrid& grid,
                              const CellAssignment& assignment,
                              const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write file: " + path);
    out << "# piecewise-quadric refractor surface, " << grid.size()
        << " sample points\n";
    out.precision(17);
    for (std::size_t j = 0; j < grid.size(); ++j) {
        const Vec3 p = assignment.rho[j] * grid.nodes[j];
        out << "v " << p.x << " " << p.y << " " << p.z << "\n";
    }
}

/// CSV rows: x1,x2,x3,rho,winner,tie_flag.
inline void write_surface_csv(const QuadratureGrid& grid,
                              const CellAssignment& assignment,
                              const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write file: " + path);
    out << "x1,x2,x3,rho,winner,tie_flag\n";
    out.precision(17);
    for (std::size_t j = 0; j < grid.size(); ++j) {
        out << grid.nodes[j].x << "," << grid.nodes[j].y << ","
            << grid.nodes[j].z << "," << assignment.rho[j] << ","
            << assignment.winner[j] << "," << int(assignment.tie[j]) << "\n";
    }
}

}  // namespace farfield
