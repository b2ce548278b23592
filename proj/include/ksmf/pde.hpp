#pragma once

#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "ksmf/field.hpp"

namespace ksmf {

struct EnergyReport {
    double time = 0.0;
    double mass = 0.0;
    double second_moment = 0.0;
    double entropy = 0.0;      ///< int rho log rho
    double interaction = 0.0;  ///< -(chi/2) int rho (phi * rho), bare phi
    double free_energy = 0.0;  ///< entropy + interaction
};

struct CflViolation : std::runtime_error {
    CflViolation(double vmax_, double dt_, double dt_max_);
    double vmax;
    double dt;
    double dt_max;
};

/// Stored mean-field force snapshots (k^nu * rho at cell centers) on a
/// uniform time grid, bilinear in space and linear in time between them.
/// Queries outside the box fall back to the unit-mass monopole form.
class FieldSequence {
public:
    FieldSequence(double box_half_width, int grid_n, double chi);

    void append(const DensityField& field);  ///< requires field.has_force

    double chi() const { return chi_; }
    std::size_t size() const { return times_.size(); }
    double time_front() const { return times_.front(); }
    double time_back() const { return times_.back(); }

    /// Interpolated (k^nu * rho)(x) at time t (clamped to the stored range).
    Vec2 convolved_force_at(Vec2 x, double t) const;
    /// Mean-field drift -chi (k^nu * rho)(x).
    Vec2 drift_at(Vec2 x, double t) const {
        return -chi_ * convolved_force_at(x, t);
    }

private:
    Vec2 sample(std::size_t snap, Vec2 x) const;

    double L_;
    int n_;
    double chi_;
    std::vector<double> times_;
    std::vector<std::vector<double>> fx_, fy_;
};

/// Regularized Keller-Segel solver: Strang splitting with second-order
/// upwinded finite-volume advection (velocity -chi k^nu * rho, zero-flux
/// walls) around an exact spectral heat step for generator Lap.
class PdeSolver {
public:
    PdeSolver(DensityField initial, const CutoffSpec& spec, double chi);
    ~PdeSolver();
    PdeSolver(PdeSolver&&) noexcept;

    const DensityField& field() const { return field_; }
    double time() const { return field_.time; }
    double chi() const { return chi_; }

    /// Largest stable step 0.4 cell / |v|_inf for the current velocity.
    double cfl_limit();

    /// One Strang step. Throws CflViolation when dt exceeds the limit.
    void step(double dt);

    /// Advance to target time in macro-steps of at most dt_macro,
    /// sub-stepping adaptively under the CFL bound. Appends a force
    /// snapshot per macro-step boundary when store is given.
    void advance_to(double t_target, double dt_macro,
                    FieldSequence* store = nullptr);

    EnergyReport energy_report();

    double clipped_mass_total() const { return clipped_mass_; }
    double max_mass_drift() const { return max_mass_drift_; }
    /// rho_max reached the cutoff-scale saturation level nu^2 / (4 pi),
    /// or the regularization zone is not resolved by the grid.
    bool resolution_flag() const;
    /// Boundary mass fraction exceeded 1e-4 at some visited time.
    bool domain_flag() const { return domain_flag_; }

    /// Ensure field.force_x/y hold k^nu * rho for the current density.
    void refresh_force();

private:
    void advect(double dt, const std::vector<double>& vx,
                const std::vector<double>& vy);
    void diffuse(double dt);
    void clip_negatives(double target_mass);

    DensityField field_;
    CutoffSpec spec_;
    double chi_;
    ForceConvolver force_conv_;
    std::unique_ptr<class SpectralDiffusion> diffusion_;
    std::optional<PlanarConvolver> log_conv_;  // built on first energy report
    double clipped_mass_ = 0.0;
    double max_mass_drift_ = 0.0;
    bool domain_flag_ = false;
    bool force_fresh_ = false;
    std::vector<double> vx_, vy_, flux_x_, flux_y_, scratch_;
};

} // namespace ksmf
