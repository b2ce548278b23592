#include "ksmf/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace ksmf {

LinearFit fit_linear(const std::vector<double>& x,
                     const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("fit_linear: need >= 2 aligned points");
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
    }
    if (sxx == 0.0) throw std::invalid_argument("fit_linear: degenerate x");
    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    double rss = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double r = y[i] - (fit.intercept + fit.slope * x[i]);
        rss += r * r;
    }
    fit.stderr_slope =
        x.size() > 2 ? std::sqrt(rss / (n - 2.0) / sxx) : 0.0;
    return fit;
}

LinearFit fit_rate(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() < 3)
        throw std::invalid_argument("fit_rate: need >= 3 points");
    std::vector<double> lx(x.size()), ly(y.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0))
            throw std::invalid_argument("fit_rate: values must be positive");
        lx[i] = std::log(x[i]);
        ly[i] = std::log(y[i]);
    }
    return fit_linear(lx, ly);
}

double median(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("median: empty sample");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2]
                 : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

MedianCi median_rank_ci(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("median_rank_ci: empty");
    std::sort(values.begin(), values.end());
    MedianCi ci;
    const std::size_t n = values.size();
    ci.median = n % 2 ? values[n / 2]
                      : 0.5 * (values[n / 2 - 1] + values[n / 2]);
    // Largest k with P(Bin(n, 1/2) < k) <= 0.025; the interval
    // [x_(k+1), x_(n-k)] then has >= 95% coverage.
    double term = std::pow(0.5, static_cast<double>(n));  // P(X = 0)
    double cdf = 0.0;
    std::size_t k = 0;
    for (std::size_t i = 0; i < n; ++i) {
        cdf += term;
        if (cdf > 0.025) break;
        k = i + 1;
        term *= static_cast<double>(n - i) / static_cast<double>(i + 1);
    }
    ci.low = values[std::min(k, n - 1)];
    ci.high = values[n - 1 - std::min(k, n - 1)];
    if (ci.low > ci.high) std::swap(ci.low, ci.high);
    return ci;
}

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string cell_tag(int n, double chi, double alpha) {
    std::ostringstream tag;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", chi);
    std::string chi_s = buf;
    std::snprintf(buf, sizeof buf, "%.6g", alpha);
    std::string alpha_s = buf;
    for (auto* s : {&chi_s, &alpha_s})
        for (auto& c : *s)
            if (c == '.') c = 'p';
    tag << "N" << n << "_chi" << chi_s << "_a" << alpha_s;
    return tag.str();
}

std::string replica_name(int r) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "replica_%03d.csv", r);
    return buf;
}

} // namespace

SweepResult run_sweep(const ExperimentConfig& config) {
    config.validate();
    const fs::path out_root(config.out_dir);
    fs::create_directories(out_root / "cells");

    SweepResult result;
    result.config_hash = sha256_hex(config.canonical_text());

    std::vector<MetricRow> metric_rows;
    json manifest;
    manifest["schema_version"] = 1;
    manifest["config_hash"] = result.config_hash;
    manifest["seed"] = config.seed;
    manifest["config_text"] = config.canonical_text();
    manifest["cells"] = json::array();

    const InitialDensitySpec init = config.initial_density();

    int cell_index = 0;
    for (double alpha : config.alpha_list) {
        for (double chi : config.chi_list) {
            for (int n : config.n_list) {
                CellResult cell;
                cell.index = cell_index;
                cell.n = n;
                cell.chi = chi;
                cell.alpha = alpha;
                cell.replicas_requested = config.replicas;

                const CutoffSpec spec = CutoffSpec::for_particles(alpha, n);
                cell.nu = spec.nu;
                const double h =
                    config.step > 0.0 ? config.step : default_step_size(spec);
                cell.step = h;
                const std::string tag = cell_tag(n, chi, alpha);
                const fs::path cell_dir = out_root / "cells" / tag;
                fs::create_directories(cell_dir);
                cell.dir = (fs::path("cells") / tag).string();

                // --- PDE solve, stored force fields, energy series ---
                FieldSequence fields(config.box_half_width, config.grid_n, chi);
                std::vector<EnergyReport> energies;
                PdeSolver solver(
                    init_density(init, config.box_half_width, config.grid_n),
                    spec, chi);
                energies.push_back(solver.energy_report());
                const std::int64_t macro_steps =
                    std::llround(config.horizon / h);
                const int snap_every =
                    config.field_snapshots > 0
                        ? std::max<std::int64_t>(
                              1, macro_steps / config.field_snapshots)
                        : 0;
                solver.refresh_force();
                if (macro_steps == 0) {
                    fields.append(solver.field());
                } else {
                    for (std::int64_t k = 0; k < macro_steps; ++k) {
                        solver.advance_to((k + 1) * h, h, &fields);
                        if ((k + 1) % config.energy_every == 0 ||
                            k + 1 == macro_steps)
                            energies.push_back(solver.energy_report());
                        if (snap_every && ((k + 1) % snap_every == 0))
                            write_field_binary(
                                (cell_dir /
                                 ("field_" + std::to_string(k + 1) + ".bin"))
                                    .string(),
                                solver.field());
                    }
                }
                write_energy_csv((cell_dir / "pde_energy.csv").string(),
                                 energies);
                for (std::size_t e = 1; e < energies.size(); ++e) {
                    if (energies[e].free_energy >
                        energies[e - 1].free_energy +
                            1e-3 * std::abs(energies[e - 1].free_energy))
                        cell.free_energy_monotone = false;
                }
                cell.max_mass_drift = solver.max_mass_drift();
                cell.pde_resolution_flag = solver.resolution_flag();
                cell.pde_domain_flag = solver.domain_flag();
                solver.refresh_force();
                const DensityField& terminal_field = solver.field();

                // --- replicas ---
                std::vector<RunRecord> records(config.replicas);
                std::vector<MarginalW1> w1_results(config.replicas);
                std::vector<char> w1_done(config.replicas, 0);
                cell.replica_seeds.resize(config.replicas);
                const int m_w1 = std::min(config.w1_samples, n);

#pragma omp parallel for schedule(dynamic) if (config.replicas > 1)
                for (int r = 0; r < config.replicas; ++r) {
                    const std::uint64_t seed_r = derive_seed(
                        config.seed, static_cast<std::uint64_t>(cell.index),
                        static_cast<std::uint64_t>(r));
                    cell.replica_seeds[r] = seed_r;
                    CoupledRunConfig run;
                    run.n = n;
                    run.chi = chi;
                    run.spec = spec;
                    run.horizon = config.horizon;
                    run.step = h;
                    run.init = init;
                    run.seed = seed_r;
                    run.replica = static_cast<std::uint32_t>(r);
                    run.fields = &fields;
                    run.with_intermediates = config.z_diagnostics;
                    run.z_grid_points = config.z_grid_points;
                    try {
                        records[r] = run_coupled(run);
                        if (!records[r].failed && config.metric_w1) {
                            ParticleEnsemble terminal;
                            terminal.positions = records[r].final_positions;
                            terminal.time = config.horizon;
                            const NoisePlan plan(seed_r, h,
                                                 static_cast<std::uint32_t>(r));
                            w1_results[r] =
                                marginal_w1(terminal, terminal_field, m_w1,
                                            plan, config.w1_repeats);
                            w1_done[r] = 1;
                        }
                    } catch (const std::exception& e) {
                        records[r].failed = true;
                        records[r].error = e.what();
                    }
                }

                for (int r = 0; r < config.replicas; ++r) {
                    const auto& record = records[r];
                    const std::string csv_path =
                        (cell_dir / replica_name(r)).string();
                    write_run_csv(csv_path, record);
                    std::string manifest_path = csv_path;
                    manifest_path.replace(manifest_path.size() - 4, 4, ".json");
                    write_run_manifest(manifest_path, record, csv_path);
                    if (config.z_diagnostics && !record.z_times.empty())
                        write_zdiag_csv(
                            (cell_dir / ("zdiag_" + std::to_string(r) + ".csv"))
                                .string(),
                            record);
                    if (record.failed) continue;
                    ++cell.replicas_succeeded;
                    cell.sup_distances.push_back(record.final_sup());
                    metric_rows.push_back({"sup_dist", n, chi, alpha, r,
                                           config.horizon,
                                           record.final_sup()});
                    if (record.times.size() >= 3) {
                        const auto fit =
                            fit_linear(record.times, record.mean_sq_radius);
                        cell.m2_slopes.push_back(fit.slope);
                        metric_rows.push_back({"m2_slope", n, chi, alpha, r,
                                               config.horizon, fit.slope});
                    }
                    if (w1_done[r]) {
                        cell.w1_means.push_back(w1_results[r].mean);
                        metric_rows.push_back({"marginal_w1", n, chi, alpha, r,
                                               config.horizon,
                                               w1_results[r].mean});
                    }
                }
                const int failed =
                    config.replicas - cell.replicas_succeeded;
                cell.cell_failed = failed * 5 > config.replicas;  // > 20%

                if (!cell.sup_distances.empty()) {
                    cell.tail = tail_probability(cell.sup_distances,
                                                 std::pow(n, -alpha));
                    cell.median_sup = median(cell.sup_distances);
                }
                if (!cell.w1_means.empty())
                    cell.median_w1 = median(cell.w1_means);
                if (!cell.m2_slopes.empty()) {
                    double sum = 0, sum2 = 0;
                    for (double s : cell.m2_slopes) {
                        sum += s;
                        sum2 += s * s;
                    }
                    const double k = cell.m2_slopes.size();
                    cell.m2_slope_mean = sum / k;
                    cell.m2_slope_se =
                        k > 1 ? std::sqrt((sum2 / k -
                                           cell.m2_slope_mean *
                                               cell.m2_slope_mean) /
                                          (k - 1))
                              : 0.0;
                }

                if (config.metric_w1 && config.w1_control) {
                    const NoisePlan plan(
                        derive_seed(config.seed,
                                    static_cast<std::uint64_t>(cell.index),
                                    0xC0117801u),
                        h, 0);
                    cell.w1_control = marginal_w1_control(
                        terminal_field, m_w1, plan,
                        config.w1_control_repeats);
                    for (std::size_t i = 0; i < cell.w1_control->values.size();
                         ++i)
                        metric_rows.push_back(
                            {"marginal_w1_control", n, chi, alpha,
                             static_cast<int>(i), config.horizon,
                             cell.w1_control->values[i]});
                }

                if (config.metric_loln) {
                    std::optional<double> nu2;
                    if (config.split_diagnostics) {
                        const double candidate = config.nu2 > 0.0
                                                     ? config.nu2
                                                     : default_split_rate(n);
                        if (candidate < spec.nu) nu2 = candidate;
                    }
                    const LolnProbe probe(terminal_field, spec, chi, nu2);
                    std::vector<LolnStatistic> stats(config.loln_redraws);
#pragma omp parallel for schedule(dynamic) if (config.loln_redraws > 1)
                    for (int r = 0; r < config.loln_redraws; ++r) {
                        const NoisePlan plan(
                            derive_seed(config.seed,
                                        static_cast<std::uint64_t>(cell.index),
                                        0x10105000u + r),
                            h, 0);
                        ParticleEnsemble draw;
                        draw.positions =
                            draw_from_field(terminal_field, n, plan, 0);
                        draw.time = config.horizon;
                        stats[r] = probe.statistic(draw);
                    }
                    for (int r = 0; r < config.loln_redraws; ++r) {
                        cell.loln_k_deviations.push_back(stats[r].k_deviation);
                        metric_rows.push_back({"loln_k", n, chi, alpha, r,
                                               config.horizon,
                                               stats[r].k_deviation});
                    }
                    cell.loln_median_k = median(cell.loln_k_deviations);
                    cell.exceptional =
                        exceptional_set_frequencies(stats, n, alpha);
                    cell.loln_exceed_fraction = cell.exceptional.k_exceed;
                }

                json jcell;
                jcell["index"] = cell.index;
                jcell["n"] = n;
                jcell["chi"] = chi;
                jcell["alpha"] = alpha;
                jcell["nu"] = cell.nu;
                jcell["step"] = cell.step;
                jcell["dir"] = cell.dir;
                jcell["replica_seeds"] = cell.replica_seeds;
                manifest["cells"].push_back(jcell);

                result.cells.push_back(std::move(cell));
                ++cell_index;
            }
        }
    }

    write_metrics_csv((out_root / "metrics.csv").string(), metric_rows);

    {
        std::ofstream out(out_root / "manifest.json", std::ios::binary);
        out << manifest.dump(2) << '\n';
    }
    {
        json summary;
        summary["schema_version"] = 1;
        summary["config_hash"] = result.config_hash;
        summary["cells"] = json::array();
        for (const auto& cell : result.cells) {
            json jc;
            jc["index"] = cell.index;
            jc["n"] = cell.n;
            jc["chi"] = cell.chi;
            jc["alpha"] = cell.alpha;
            jc["replicas_requested"] = cell.replicas_requested;
            jc["replicas_succeeded"] = cell.replicas_succeeded;
            jc["cell_failed"] = cell.cell_failed;
            jc["median_sup_distance"] = cell.median_sup;
            jc["tail"] = {{"threshold", cell.tail.threshold},
                          {"exceedances", cell.tail.exceedances},
                          {"estimate", cell.tail.estimate},
                          {"ci_low", cell.tail.ci_low},
                          {"ci_high", cell.tail.ci_high}};
            jc["median_marginal_w1"] = cell.median_w1;
            if (cell.w1_control)
                jc["control_w1_mean"] = cell.w1_control->mean;
            jc["m2_slope_mean"] = cell.m2_slope_mean;
            jc["m2_slope_se"] = cell.m2_slope_se;
            jc["free_energy_monotone"] = cell.free_energy_monotone;
            jc["max_mass_drift"] = cell.max_mass_drift;
            jc["pde_resolution_flag"] = cell.pde_resolution_flag;
            jc["pde_domain_flag"] = cell.pde_domain_flag;
            jc["loln_median_k_deviation"] = cell.loln_median_k;
            jc["loln_exceed_fraction"] = cell.loln_exceed_fraction;
            jc["exceptional_frequencies"] = {
                {"k", cell.exceptional.k_exceed},
                {"l", cell.exceptional.l_exceed},
                {"l2", cell.exceptional.l2_exceed},
                {"k1", cell.exceptional.k1_exceed}};
            summary["cells"].push_back(jc);
        }
        std::ofstream out(out_root / "sweep_summary.json", std::ios::binary);
        out << summary.dump(2) << '\n';
    }
    return result;
}

} // namespace ksmf
