#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ksmf/config.hpp"
#include "ksmf/metrics.hpp"
#include "ksmf/runio.hpp"

namespace ksmf {

struct LinearFit {
    double slope = 0.0;
    double stderr_slope = 0.0;
    double intercept = 0.0;
};

/// Ordinary least squares y on x; stderr from the residual variance.
LinearFit fit_linear(const std::vector<double>& x, const std::vector<double>& y);

/// Log-log decay fit: y ~ c x^e. Needs >= 3 points, all positive.
LinearFit fit_rate(const std::vector<double>& x, const std::vector<double>& y);

double median(std::vector<double> values);

/// Distribution-free 95% confidence interval for the median from order
/// statistics (binomial ranks).
struct MedianCi {
    double median = 0.0;
    double low = 0.0;
    double high = 0.0;
};
MedianCi median_rank_ci(std::vector<double> values);

/// Per-cell aggregates; vectors hold one entry per successful replica.
struct CellResult {
    int index = 0;
    int n = 0;
    double chi = 0.0;
    double alpha = 0.0;
    double nu = 0.0;
    double step = 0.0;
    std::string dir;

    int replicas_requested = 0;
    int replicas_succeeded = 0;
    bool cell_failed = false;  ///< more than 20% of replicas failed

    std::vector<double> sup_distances;
    std::vector<double> m2_slopes;
    std::vector<double> w1_means;
    std::vector<std::uint64_t> replica_seeds;

    TailEstimate tail;           // threshold N^-alpha
    double median_sup = 0.0;
    double median_w1 = 0.0;
    std::optional<MarginalW1> w1_control;

    double m2_slope_mean = 0.0;
    double m2_slope_se = 0.0;

    bool free_energy_monotone = true;
    double max_mass_drift = 0.0;
    bool pde_resolution_flag = false;
    bool pde_domain_flag = false;

    std::vector<double> loln_k_deviations;
    double loln_median_k = 0.0;
    double loln_exceed_fraction = 0.0;  // of N^-(alpha+delta)
    ExceptionalSetFrequencies exceptional;
};

struct SweepResult {
    std::string config_hash;
    std::vector<CellResult> cells;
};

/// Full experiment: per cell solve the PDE once, run the coupled replicas
/// on it, evaluate the selected metrics, and persist CSV/JSON artifacts
/// under config.out_dir (manifest.json, sweep_summary.json, metrics.csv,
/// cells/<tag>/...). Deterministic for a fixed (config, seed) at any
/// thread count. Per-replica failures never abort the sweep; a cell is
/// marked failed when more than 20% of its replicas fail.
SweepResult run_sweep(const ExperimentConfig& config);

} // namespace ksmf
