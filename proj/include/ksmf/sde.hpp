#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ksmf/initial.hpp"
#include "ksmf/kernel.hpp"
#include "ksmf/noise.hpp"
#include "ksmf/pde.hpp"

namespace ksmf {

/// Real trajectories X, mean-field trajectories Y, and the intermediate
/// Z processes born from X at chosen times, all on one shared clock.
struct CoupledState {
    ParticleEnsemble x;
    ParticleEnsemble y;
    struct Intermediate {
        double birth = 0.0;
        ParticleEnsemble z;
    };
    std::vector<Intermediate> zs;
};

/// Default Euler-Maruyama step: the nu^-2 cap keeps the drift increment
/// below the cutoff scale where the force Lipschitz constant is nu^2.
double default_step_size(const CutoffSpec& spec);

/// One Euler-Maruyama step of the interacting system:
/// X_i += K^N_i(X) h + sqrt(2h) xi_i. Throws ReplicaFailure when a
/// position leaves the finite range (step size too large for nu).
void step_real(ParticleEnsemble& ens, double chi, const CutoffSpec& spec,
               const NoisePlan& noise, std::uint64_t step_index);

/// One Euler-Maruyama step with the mean-field drift -chi (k^N * rho_t),
/// consuming the same noise addresses as step_real. A null field is the
/// chi = 0 convention: exactly zero drift.
void step_meanfield(ParticleEnsemble& ens, const FieldSequence* fields,
                    const NoisePlan& noise, std::uint64_t step_index);

/// Append a Z process born now: Z(s) = X(s) bitwise.
void spawn_intermediate(CoupledState& state, double s);

struct ReplicaFailure : std::runtime_error {
    explicit ReplicaFailure(const std::string& what)
        : std::runtime_error(what) {}
};

/// Unordered pairs closer than the Coulomb radius 2/nu.
std::int64_t count_close_pairs(std::span<const Vec2> positions,
                               const CutoffSpec& spec);

struct CoupledRunConfig {
    int n = 256;
    double chi = 4.0 * 3.14159265358979323846;
    CutoffSpec spec;
    double horizon = 0.5;
    double step = 1e-3;
    InitialDensitySpec init;
    std::uint64_t seed = 0;
    std::uint32_t replica = 0;
    const FieldSequence* fields = nullptr;  // required when chi > 0
    bool with_intermediates = false;        // Z diagnostics on a coarse grid
    int z_grid_points = 32;
};

/// Per-replica time series with full seed provenance.
struct RunRecord {
    std::uint64_t seed = 0;
    std::uint32_t replica = 0;
    int n = 0;
    double chi = 0.0;
    double alpha = 0.0;
    double step = 0.0;

    std::vector<double> times;
    std::vector<double> inst_dist;      ///< |X_t - Y_t|_inf per step
    std::vector<double> sup_dist;       ///< running sup of inst_dist
    std::vector<double> mean_sq_radius; ///< (1/N) sum |X_i|^2
    std::vector<std::int64_t> pairs_in_cutoff;

    /// Z diagnostics: z_dist[si][ti] = |Z_{s,s} - Z_{s,tau}|_inf for
    /// s = z_times[si], tau = z_times[ti], ti <= si; NaN marks pairs
    /// outside the per-s tau budget.
    std::vector<double> z_times;
    std::vector<std::vector<double>> z_dist;

    /// Terminal X positions (for marginal metrics at t = T).
    std::vector<Vec2> final_positions;

    bool failed = false;
    std::string error;

    double final_sup() const { return sup_dist.empty() ? 0.0 : sup_dist.back(); }
};

/// Geometric diagnostic grid {0} U {T q^k} snapped to step boundaries.
std::vector<double> make_diagnostic_grid(double horizon, double step,
                                         int max_points);

/// Advance X (pairwise forces) and Y (mean-field drift) on the shared
/// noise plan over [0, T]; record the coupling series and optional Z
/// diagnostics. Failures surface as a partial record with the flag set.
RunRecord run_coupled(const CoupledRunConfig& config);

/// X only: the interacting system without its mean-field shadow (the
/// Y-related columns are zero). Same record layout and noise addresses.
RunRecord run_particles(const CoupledRunConfig& config);

} // namespace ksmf
