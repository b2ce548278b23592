#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <omp.h>

#include "ksmf/kernel.hpp"
#include "ksmf/metrics.hpp"
#include "ksmf/runio.hpp"
#include "ksmf/sweep.hpp"

namespace {

namespace fs = std::filesystem;
using namespace ksmf;

struct CommonOptions {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> replicas;
    int threads = 0;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
    cmd->add_option("--config", opts.config_path, "configuration file path");
    cmd->add_option("--seed", opts.seed, "override the master seed");
    cmd->add_option("--out", opts.out, "override the output directory");
    cmd->add_option("--replicas", opts.replicas, "override replicas per cell");
    cmd->add_option("--threads", opts.threads,
                    "worker threads (0 = library default)");
}

ExperimentConfig resolve_config(const CommonOptions& opts) {
    ExperimentConfig config = opts.config_path.empty()
                                  ? ExperimentConfig{}
                                  : load_config(opts.config_path);
    if (opts.seed) config.seed = *opts.seed;
    if (opts.out) config.out_dir = *opts.out;
    if (opts.replicas) config.replicas = *opts.replicas;
    config.validate();
    if (opts.threads > 0) omp_set_num_threads(opts.threads);
    return config;
}

// First sweep cell of the configuration (single-cell commands).
struct CellSetup {
    int n;
    double chi;
    double alpha;
    CutoffSpec spec;
    double step;
};

CellSetup first_cell(const ExperimentConfig& config) {
    CellSetup cell;
    cell.n = config.n_list.front();
    cell.chi = config.chi_list.front();
    cell.alpha = config.alpha_list.front();
    cell.spec = CutoffSpec::for_particles(cell.alpha, cell.n);
    cell.step =
        config.step > 0.0 ? config.step : default_step_size(cell.spec);
    return cell;
}

int cmd_simulate_pde(const CommonOptions& opts) {
    const auto config = resolve_config(opts);
    const auto cell = first_cell(config);
    fs::create_directories(config.out_dir);

    PdeSolver solver(init_density(config.initial_density(),
                                  config.box_half_width, config.grid_n),
                     cell.spec, cell.chi);
    std::vector<EnergyReport> energies{solver.energy_report()};
    const std::int64_t macro_steps =
        std::llround(config.horizon / cell.step);
    const int snap_every =
        config.field_snapshots > 0
            ? std::max<std::int64_t>(1, macro_steps / config.field_snapshots)
            : 0;
    for (std::int64_t k = 0; k < macro_steps; ++k) {
        solver.advance_to((k + 1) * cell.step, cell.step);
        if ((k + 1) % config.energy_every == 0 || k + 1 == macro_steps)
            energies.push_back(solver.energy_report());
        if (snap_every && (k + 1) % snap_every == 0)
            write_field_binary((fs::path(config.out_dir) /
                                ("field_" + std::to_string(k + 1) + ".bin"))
                                   .string(),
                               solver.field());
    }
    write_energy_csv(
        (fs::path(config.out_dir) / "pde_energy.csv").string(), energies);
    std::cout << "pde run: chi = " << cell.chi << ", T = " << config.horizon
              << ", final m2 = " << energies.back().second_moment
              << ", mass drift = " << solver.max_mass_drift() << "\n";
    if (solver.resolution_flag())
        std::cout << "note: density reached the cutoff resolution scale\n";
    return 0;
}

int cmd_couple(const CommonOptions& opts) {
    ExperimentConfig config = resolve_config(opts);
    const auto cell = first_cell(config);
    fs::create_directories(config.out_dir);

    FieldSequence fields(config.box_half_width, config.grid_n, cell.chi);
    PdeSolver solver(init_density(config.initial_density(),
                                  config.box_half_width, config.grid_n),
                     cell.spec, cell.chi);
    const std::int64_t macro_steps =
        std::llround(config.horizon / cell.step);
    solver.refresh_force();
    if (macro_steps == 0)
        fields.append(solver.field());
    else
        for (std::int64_t k = 0; k < macro_steps; ++k)
            solver.advance_to((k + 1) * cell.step, cell.step, &fields);

    for (int r = 0; r < config.replicas; ++r) {
        CoupledRunConfig run;
        run.n = cell.n;
        run.chi = cell.chi;
        run.spec = cell.spec;
        run.horizon = config.horizon;
        run.step = cell.step;
        run.init = config.initial_density();
        run.seed = derive_seed(config.seed, 0, static_cast<std::uint64_t>(r));
        run.replica = static_cast<std::uint32_t>(r);
        run.fields = &fields;
        run.with_intermediates = config.z_diagnostics;
        run.z_grid_points = config.z_grid_points;
        const auto record = run_coupled(run);
        char name[40];
        std::snprintf(name, sizeof name, "replica_%03d.csv", r);
        const std::string csv_path = (fs::path(config.out_dir) / name).string();
        write_run_csv(csv_path, record);
        std::snprintf(name, sizeof name, "replica_%03d.json", r);
        write_run_manifest((fs::path(config.out_dir) / name).string(), record,
                           csv_path);
        if (config.z_diagnostics) {
            std::snprintf(name, sizeof name, "zdiag_%03d.csv", r);
            write_zdiag_csv((fs::path(config.out_dir) / name).string(), record);
        }
        std::cout << "replica " << r << ": sup distance "
                  << record.final_sup()
                  << (record.failed ? " [FAILED: " + record.error + "]" : "")
                  << "\n";
    }
    return 0;
}

int cmd_sweep(const CommonOptions& opts) {
    const auto config = resolve_config(opts);
    const auto result = run_sweep(config);
    std::cout << "sweep complete: " << result.cells.size()
              << " cells, outputs under " << config.out_dir << "\n";
    for (const auto& cell : result.cells)
        std::cout << "  N=" << cell.n << " chi=" << cell.chi
                  << " alpha=" << cell.alpha << ": median sup "
                  << cell.median_sup << ", tail " << cell.tail.estimate
                  << (cell.cell_failed ? " [cell failed]" : "") << "\n";
    return 0;
}

int cmd_metrics(const CommonOptions& opts) {
    ExperimentConfig config = resolve_config(opts);
    const auto cell = first_cell(config);
    fs::create_directories(config.out_dir);

    FieldSequence fields(config.box_half_width, config.grid_n, cell.chi);
    PdeSolver solver(init_density(config.initial_density(),
                                  config.box_half_width, config.grid_n),
                     cell.spec, cell.chi);
    const std::int64_t macro_steps =
        std::llround(config.horizon / cell.step);
    solver.refresh_force();
    if (macro_steps == 0)
        fields.append(solver.field());
    else
        for (std::int64_t k = 0; k < macro_steps; ++k)
            solver.advance_to((k + 1) * cell.step, cell.step, &fields);
    solver.refresh_force();

    std::vector<MetricRow> rows;

    // LoLN deviations over redraws from the terminal density.
    std::optional<double> nu2;
    if (config.split_diagnostics) {
        const double candidate =
            config.nu2 > 0.0 ? config.nu2 : default_split_rate(cell.n);
        if (candidate < cell.spec.nu) nu2 = candidate;
    }
    const LolnProbe probe(solver.field(), cell.spec, cell.chi, nu2);
    for (int r = 0; r < config.loln_redraws; ++r) {
        const NoisePlan plan(derive_seed(config.seed, 7, r), cell.step, 0);
        ParticleEnsemble draw;
        draw.positions = draw_from_field(solver.field(), cell.n, plan, 0);
        const auto stat = probe.statistic(draw);
        rows.push_back({"loln_k", cell.n, cell.chi, cell.alpha, r,
                        config.horizon, stat.k_deviation});
        rows.push_back({"loln_l", cell.n, cell.chi, cell.alpha, r,
                        config.horizon, stat.l_deviation});
        if (stat.has_split) {
            rows.push_back({"loln_l2", cell.n, cell.chi, cell.alpha, r,
                            config.horizon, stat.l2_deviation});
            rows.push_back({"loln_k1", cell.n, cell.chi, cell.alpha, r,
                            config.horizon, stat.k1_deviation});
        }
    }

    // Same-law W1 control at the configured sample size.
    if (config.metric_w1) {
        const NoisePlan plan(derive_seed(config.seed, 8, 0), cell.step, 0);
        const auto control =
            marginal_w1_control(solver.field(), std::min(config.w1_samples, cell.n),
                                plan, config.w1_repeats);
        for (std::size_t i = 0; i < control.values.size(); ++i)
            rows.push_back({"marginal_w1_control", cell.n, cell.chi,
                            cell.alpha, static_cast<int>(i), config.horizon,
                            control.values[i]});
    }
    write_metrics_csv((fs::path(config.out_dir) / "metrics.csv").string(),
                      rows);

    // Heat-kernel norm table (the proof-apparatus oracle).
    {
        std::ofstream out(fs::path(config.out_dir) / "heat_kernel.csv",
                          std::ios::binary);
        out << "t,p,g_norm,grad_norm\n";
        for (double t : {0.01, 0.0316, 0.1, 0.316, 1.0}) {
            for (double p :
                 {1.0, 1.5, 3.0, std::numeric_limits<double>::infinity()}) {
                const auto norms = heat_kernel_norms(t, p);
                out << format_double(t) << ','
                    << (std::isinf(p) ? "inf" : format_double(p)) << ','
                    << format_double(norms.g_norm) << ','
                    << format_double(norms.grad_norm) << '\n';
            }
        }
    }

    // J process from one Z-instrumented coupled replica.
    if (config.z_diagnostics) {
        CoupledRunConfig run;
        run.n = cell.n;
        run.chi = cell.chi;
        run.spec = cell.spec;
        run.horizon = config.horizon;
        run.step = cell.step;
        run.init = config.initial_density();
        run.seed = derive_seed(config.seed, 9, 0);
        run.fields = &fields;
        run.with_intermediates = true;
        run.z_grid_points = config.z_grid_points;
        const auto record = run_coupled(run);
        const JSchedule schedule{static_cast<double>(cell.n), cell.alpha};
        const auto series = j_process(record, schedule, config.horizon);
        std::ofstream out(fs::path(config.out_dir) / "j_series.csv",
                          std::ios::binary);
        out << "t,j\n";
        for (std::size_t i = 0; i < series.times.size(); ++i)
            out << format_double(series.times[i]) << ','
                << format_double(series.values[i]) << '\n';
    }
    std::cout << "metrics written under " << config.out_dir << "\n";
    return 0;
}

int cmd_kernel_dump(const std::string& out_path, double nu, int points) {
    const auto spec = CutoffSpec::with_rate(nu);
    const auto& profile = RadialProfile::instance();
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + out_path + "'");
    out << "r,s,phi,k,measured_hessian_norm\n";
    for (int i = 1; i <= points; ++i) {
        const double r = 3.0 * i / (points * nu);
        const double jac = profile.force_jacobian_max(nu * r) * nu * nu;
        out << format_double(r) << ',' << format_double(RadialProfile::s(nu * r))
            << ',' << format_double(potential({r, 0.0}, spec)) << ','
            << format_double(force({r, 0.0}, spec).norm()) << ','
            << format_double(jac) << '\n';
    }
    std::cout << "profile table written to " << out_path << " (C_H = "
              << profile.hessian_constant() << ")\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "Interacting-particle and mean-field Keller-Segel simulation lab"};
    app.require_subcommand(0, 1);
    bool print_defaults = false;
    app.add_flag("--print-defaults", print_defaults,
                 "print the default configuration and exit");

    CommonOptions pde_opts, couple_opts, sweep_opts, metrics_opts;
    auto* pde = app.add_subcommand("simulate-pde",
                                   "solve the regularized density equation");
    add_common(pde, pde_opts);
    auto* couple = app.add_subcommand(
        "couple", "coupled real / mean-field trajectories on shared noise");
    add_common(couple, couple_opts);
    auto* sweep =
        app.add_subcommand("sweep", "full experiment over (N, chi, alpha)");
    add_common(sweep, sweep_opts);
    auto* metrics =
        app.add_subcommand("metrics", "standalone metric probes for one cell");
    add_common(metrics, metrics_opts);

    auto* dump = app.add_subcommand("kernel-dump",
                                    "radial profile table as CSV (debug)");
    std::string dump_out = "kernel_profile.csv";
    double dump_nu = 1.0;
    int dump_points = 2048;
    dump->add_option("--out", dump_out, "output CSV path");
    dump->add_option("--nu", dump_nu, "cutoff rate nu");
    dump->add_option("--points", dump_points, "table rows");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (print_defaults) {
            print_default_config(std::cout);
            return 0;
        }
        if (pde->parsed()) return cmd_simulate_pde(pde_opts);
        if (couple->parsed()) return cmd_couple(couple_opts);
        if (sweep->parsed()) return cmd_sweep(sweep_opts);
        if (metrics->parsed()) return cmd_metrics(metrics_opts);
        if (dump->parsed())
            return cmd_kernel_dump(dump_out, dump_nu, dump_points);
        std::cout << app.help();
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime failure: " << e.what() << "\n";
        return 2;
    }
}
