// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: solve a far-field refractor design problem for a
// negative-index medium, verify a stored solution by forward ray tracing and
// energy audit, run the chart diagnostics, discretize continuous targets,
// and export sampled surfaces.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "farfield/io.hpp"

namespace fs = std::filesystem;
using namespace farfield;

namespace {

// Exit codes, one per violated hypothesis class.
constexpr int kOk = 0;
constexpr int kUsage = 2;         // config/usage rejection
constexpr int kInadmissible = 3;  // admissibility margin violated
constexpr int kBudget = 4;        // energy budget violated
constexpr int kSolver = 5;        // non-convergence or infeasible target
constexpr int kVerifyFail = 6;    // stored solution failed verification
constexpr int kIo = 7;            // unreadable/unwritable files
constexpr int kNumerics = 8;      // resolution/degeneracy in diagnostics

struct CommonOpts {
    std::string config_path;
    std::string out_dir = ".";
    int grid_size_override = 0;
    bool lossless_override = false;
    std::uint64_t seed = 20240901;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "run configuration (JSON)")
        ->required();
    cmd->add_option("--out", opts.out_dir, "output directory");
    cmd->add_option("--grid-size", opts.grid_size_override,
                    "override the source grid node count");
    cmd->add_flag("--lossless", opts.lossless_override,
                  "force unit transmittance (no reflection loss)");
    cmd->add_option("--seed", opts.seed, "seed for randomized audit subsets");
}

RunConfig load_and_override(const CommonOpts& opts) {
    RunConfig cfg = load_config(opts.config_path);
    if (opts.grid_size_override > 0) cfg.grid_size = opts.grid_size_override;
    if (opts.lossless_override) {
        cfg.lossless = true;
        cfg.solver.lossless = true;
    }
    return cfg;
}

TargetMeasure resolve_targets(const RunConfig& cfg) {
    if (cfg.explicit_targets) return *cfg.explicit_targets;
    return discretize_target(*cfg.target_density, cfg.target_cap,
                             cfg.target_cell_count);
}

int cmd_solve(const CommonOpts& opts) {
    const RunConfig cfg = load_and_override(opts);

    const AdmissibleSetup setup{cfg.medium, cfg.source_cap, cfg.target_cap,
                                cfg.epsilon};
    const AdmissibilityReport adm = check_admissible(setup);
    if (!adm.pass) {
        std::cerr << "admissibility hypothesis violated: min x.m over the caps is "
                  << adm.worst_dot << ", threshold " << adm.threshold
                  << ", margin " << adm.margin << " < epsilon " << cfg.epsilon
                  << "\n";
        return kInadmissible;
    }

    const QuadratureGrid grid = build_grid(cfg.source_cap, cfg.grid_size);
    const TargetMeasure targets = resolve_targets(cfg);
    const FresnelBounds bounds =
        cfg.lossless ? FresnelBounds{0.0} : fresnel_bound(cfg.medium, cfg.epsilon);
    const BudgetReport budget =
        check_energy_budget(cfg.source_density, grid, targets.total(), bounds);
    if (!budget.pass) {
        std::cerr << "energy budget hypothesis violated: emitted total "
                  << budget.supply << " is below mu_total/(1-C_eps) = "
                  << budget.required << " (C_eps = " << bounds.c_eps << ")\n";
        return kBudget;
    }

    const SolveResult res =
        solve_discrete(cfg.source_density, grid, targets, cfg.medium, cfg.solver);

    fs::create_directories(opts.out_dir);
    const CellAssignment cells = trace_cells(res.solution, res.grid);
    write_json_file(solution_to_json(res.solution, "gauge_b1",
                                     res.report.grid_nodes, cfg.epsilon,
                                     cfg.lossless),
                    opts.out_dir + "/solution.json");
    write_json_file(report_to_json(res.report), opts.out_dir + "/report.json");
    write_surface_obj(res.grid, cells, opts.out_dir + "/surface.obj");
    write_surface_csv(res.grid, cells, opts.out_dir + "/surface.csv");

    std::cout << (res.report.converged ? "converged" : "NOT converged")
              << " after " << res.report.sweeps << " sweeps; max residual "
              << res.report.max_abs_residual << "; surplus on m1 "
              << res.report.surplus_m1 << "; grid " << res.report.grid_nodes
              << " nodes\n";
    return res.report.converged ? kOk : kSolver;
}

int cmd_verify(const std::string& solution_path, const CommonOpts& opts) {
    const RunConfig cfg = load_and_override(opts);
    const StoredSolution stored = solution_from_json(read_json_file(solution_path));

    int grid_size = cfg.grid_size;
    if (opts.grid_size_override > 0)
        grid_size = opts.grid_size_override;
    else if (stored.grid_size > 0)
        grid_size = static_cast<int>(stored.grid_size);
    const QuadratureGrid grid = build_grid(cfg.source_cap, grid_size);
    const bool lossless = cfg.lossless || stored.lossless;

    const CellAssignment cells = trace_cells(stored.solution, grid);
    const TraceReport trace = raytrace_verify(stored.solution, grid, cells,
                                              &cfg.source_density, lossless);
    const EnergyAudit audit =
        energy_audit(stored.solution, cfg.source_density, grid,
                     stored.solution.targets, stored.epsilon, lossless,
                     cfg.solver.rel_tol, opts.seed);

    Json rep;
    rep["max_angle_error"] = trace.max_angle_error;
    rep["frac_within_1e9"] = trace.frac_within_1e9;
    rep["tie_fraction"] = trace.tie_fraction;
    rep["energy_delta"] = trace.energy_delta;
    rep["audit"] = {{"partition_gap", audit.partition_gap},
                    {"max_residual", audit.max_residual},
                    {"surplus_m1", audit.surplus_m1},
                    {"total_emitted", audit.total_emitted},
                    {"total_transmitted", audit.total_transmitted},
                    {"transmission_floor", audit.transmission_floor},
                    {"subsets_checked", audit.subsets_checked},
                    {"subsets_passed", audit.subsets_passed},
                    {"pass", audit.pass}};
    fs::create_directories(opts.out_dir);
    write_json_file(rep, opts.out_dir + "/verify_report.json");

    const bool ok = trace.max_angle_error < 1e-9 && audit.pass;
    std::cout << (ok ? "verified" : "verification FAILED")
              << ": max ray-trace angle error " << trace.max_angle_error
              << " rad; max energy residual " << audit.max_residual << "\n";
    return ok ? kOk : kVerifyFail;
}

RadialField make_field(const FieldSpec& spec, double kappa) {
    if (spec.kind == FieldSpec::Kind::Quadric)
        return QuadricChart{spec.direction, spec.b, kappa};
    PerturbedQuadricChart f;
    f.base = QuadricChart{spec.direction, spec.b, kappa};
    f.amplitude = spec.amplitude;
    f.w1 = spec.w1;
    f.w2 = spec.w2;
    f.c1 = spec.c1;
    f.c2 = spec.c2;
    return f;
}

void dump_samples_csv(const std::vector<JacobianSample>& samples,
                      const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write file: " + path);
    out << "x1,x2,det_dy_fd,det_dy_closed,rel_discrepancy\n";
    out.precision(17);
    for (const JacobianSample& s : samples)
        out << s.x.x << "," << s.x.y << "," << s.lhs << "," << s.rhs << ","
            << s.rel << "\n";
}

int cmd_ma_residual(const std::string& solution_path, bool per_cell_flag,
                    bool dump_points, const CommonOpts& opts) {
    const RunConfig cfg = load_and_override(opts);
    const bool per_cell = per_cell_flag || cfg.ma.per_cell;
    Json rep;
    double worst = 0.0;
    std::vector<JacobianSample> samples;
    std::vector<JacobianSample>* sink = dump_points ? &samples : nullptr;

    if (!solution_path.empty()) {
        if (!per_cell) {
            std::cerr << "a traced envelope is only piecewise smooth; pass "
                         "--per-cell (or set ma.per_cell) to run the chart "
                         "diagnostics cell by cell\n";
            return kUsage;
        }
        const StoredSolution stored =
            solution_from_json(read_json_file(solution_path));
        const int grid_size = stored.grid_size > 0
                                  ? static_cast<int>(stored.grid_size)
                                  : cfg.grid_size;
        const QuadratureGrid grid = build_grid(cfg.source_cap, grid_size);
        const CellAssignment cells = trace_cells(stored.solution, grid);

        Json per_cell_stats = Json::array();
        for (std::size_t i = 0; i < stored.solution.targets.size(); ++i) {
            std::vector<Vec2> pts;
            for (std::size_t j = 0; j < grid.size(); ++j) {
                if (cells.tie[j] || cells.winner[j] != static_cast<int>(i)) continue;
                const Direction& n = grid.nodes[j];
                if (n.z < 0.2) continue;  // chart needs the upper hemisphere
                const Vec2 p = project_to_plane(n);
                if (norm2(p) > 0.9) continue;
                pts.push_back(p);
                if (pts.size() >= 200) break;
            }
            if (pts.empty()) continue;
            const QuadricChart field{stored.solution.targets.directions[i],
                                     stored.solution.b[i],
                                     stored.solution.medium.kappa};
            const JacobianStats stats = ma_jacobian_check(
                field, stored.solution.medium, pts, cfg.ma.fd_step, sink);
            worst = std::max(worst, stats.max_rel);
            per_cell_stats.push_back({{"cell", i},
                                      {"points", stats.points},
                                      {"max_rel", stats.max_rel},
                                      {"mean_rel", stats.mean_rel},
                                      {"p50_rel", stats.p50_rel},
                                      {"p95_rel", stats.p95_rel}});
        }
        rep["per_cell"] = per_cell_stats;
    } else {
        if (!cfg.field) {
            std::cerr << "ma-residual needs either a solution (with --per-cell) "
                         "or a \"field\" block in the config\n";
            return kUsage;
        }
        const RadialField field = make_field(*cfg.field, cfg.medium.kappa);
        const std::vector<Vec2> pts =
            chart_points(cfg.ma.disc_radius, cfg.ma.points_per_axis);
        const JacobianStats stats =
            ma_jacobian_check(field, cfg.medium, pts, cfg.ma.fd_step, sink);
        worst = stats.max_rel;
        rep["points"] = stats.points;
        rep["max_rel"] = stats.max_rel;
        rep["mean_rel"] = stats.mean_rel;
        rep["p50_rel"] = stats.p50_rel;
        rep["p95_rel"] = stats.p95_rel;
        rep["max_abs"] = stats.max_abs;
        rep["fd_step"] = cfg.ma.fd_step;
    }

    rep["pass"] = worst < 1e-4;
    fs::create_directories(opts.out_dir);
    write_json_file(rep, opts.out_dir + "/ma_report.json");
    if (dump_points) dump_samples_csv(samples, opts.out_dir + "/ma_points.csv");
    std::cout << "jacobian identity max relative discrepancy " << worst << "\n";
    return worst < 1e-4 ? kOk : kVerifyFail;
}

int cmd_discretize(const CommonOpts& opts) {
    const RunConfig cfg = load_and_override(opts);
    if (!cfg.target_density) {
        std::cerr << "discretize-target needs a continuous target density with "
                     "cell_count\n";
        return kUsage;
    }
    const TargetMeasure tm = discretize_target(*cfg.target_density, cfg.target_cap,
                                               cfg.target_cell_count);
    fs::create_directories(opts.out_dir);
    write_json_file(targets_to_json(tm), opts.out_dir + "/targets.json");
    std::cout << "wrote " << tm.size() << " point masses, total energy "
              << tm.total() << "\n";
    return kOk;
}

int cmd_export_mesh(const std::string& solution_path, const CommonOpts& opts) {
    const RunConfig cfg = load_and_override(opts);
    const StoredSolution stored = solution_from_json(read_json_file(solution_path));
    int grid_size = cfg.grid_size;
    if (opts.grid_size_override > 0)
        grid_size = opts.grid_size_override;
    else if (stored.grid_size > 0)
        grid_size = static_cast<int>(stored.grid_size);
    const QuadratureGrid grid = build_grid(cfg.source_cap, grid_size);
    const CellAssignment cells = trace_cells(stored.solution, grid);
    fs::create_directories(opts.out_dir);
    write_surface_obj(grid, cells, opts.out_dir + "/surface.obj");
    write_surface_csv(grid, cells, opts.out_dir + "/surface.csv");
    std::cout << "wrote surface.obj and surface.csv (" << grid.size()
              << " vertices)\n";
    return kOk;
}

int dispatch(int argc, char** argv) {
    CLI::App app{"far-field refractor design for negative-index media"};
    app.require_subcommand(1);

    CommonOpts solve_opts, verify_opts, ma_opts, disc_opts, mesh_opts;
    std::string verify_solution, ma_solution, mesh_solution;
    bool ma_per_cell = false;
    bool ma_dump = false;

    CLI::App* solve = app.add_subcommand("solve", "synthesize a refractor");
    add_common(solve, solve_opts);

    CLI::App* verify = app.add_subcommand("verify", "ray-trace and audit a solution");
    verify->add_option("solution", verify_solution, "solution.json from solve")
        ->required();
    add_common(verify, verify_opts);

    CLI::App* ma = app.add_subcommand("ma-residual", "chart operator diagnostics");
    ma->add_option("solution", ma_solution, "solution.json (requires --per-cell)");
    ma->add_flag("--per-cell", ma_per_cell,
                 "evaluate each cell's quadric chart separately");
    ma->add_flag("--dump-points", ma_dump,
                 "write the per-point values to ma_points.csv");
    add_common(ma, ma_opts);

    CLI::App* disc = app.add_subcommand(
        "discretize-target", "collapse a continuous target to point masses");
    add_common(disc, disc_opts);

    CLI::App* mesh = app.add_subcommand("export-mesh", "sample a stored surface");
    mesh->add_option("solution", mesh_solution, "solution.json from solve")
        ->required();
    add_common(mesh, mesh_opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kOk : kUsage;
    }

    if (solve->parsed()) return cmd_solve(solve_opts);
    if (verify->parsed()) return cmd_verify(verify_solution, verify_opts);
    if (ma->parsed())
        return cmd_ma_residual(ma_solution, ma_per_cell, ma_dump, ma_opts);
    if (disc->parsed()) return cmd_discretize(disc_opts);
    if (mesh->parsed()) return cmd_export_mesh(mesh_solution, mesh_opts);
    return kUsage;
}

}  // namespace

int main(int argc, char** argv) {
    try {
        return dispatch(argc, argv);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kUsage;
    } catch (const AdmissibilityError& e) {
        std::cerr << "admissibility hypothesis violated: " << e.what() << "\n";
        return kInadmissible;
    } catch (const BudgetError& e) {
        std::cerr << "energy budget hypothesis violated: " << e.what() << "\n";
        return kBudget;
    } catch (const InfeasibleError& e) {
        std::cerr << "solver infeasibility: " << e.what() << "\n";
        return kSolver;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return kIo;
    } catch (const Error& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kNumerics;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kNumerics;
    }
}
