#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "ksmf/cutoff.hpp"
#include "ksmf/initial.hpp"
#include "ksmf/vec2.hpp"

namespace ksmf {

/// Gridded density rho on the truncated square [-L, L]^2, cell-centered,
/// row-major (iy * n + ix). Immutable by convention once stamped: stepping
/// produces a new field state.
struct DensityField {
    double box_half_width = 10.0;
    int grid_n = 128;
    double time = 0.0;
    std::vector<double> rho;
    // Cached k^nu * rho per cell (filled by ForceConvolver::apply).
    std::vector<double> force_x, force_y;
    bool has_force = false;
    double renorm_factor = 1.0;

    double cell_size() const { return 2.0 * box_half_width / grid_n; }
    double cell_x(int ix) const {
        return -box_half_width + (ix + 0.5) * cell_size();
    }
    double cell_y(int iy) const {
        return -box_half_width + (iy + 0.5) * cell_size();
    }
    std::size_t idx(int ix, int iy) const {
        return static_cast<std::size_t>(iy) * grid_n + ix;
    }

    double mass() const;
    double second_moment() const;
    double max_density() const;
    double min_density() const;
    /// Mass fraction in cells whose center lies within 5% of the edge.
    double boundary_mass_fraction() const;
};

/// Zero-padded (linear, non-periodic) convolution of a cell grid with a
/// fixed kernel sampled at cell-center offsets, via FFT on the doubled
/// grid. Periodic images would corrupt the far field of a Coulomb-type
/// kernel, hence the padding. One instance per (kernel, grid); apply() is
/// not re-entrant, distinct instances are independent.
class PlanarConvolver {
public:
    PlanarConvolver(double box_half_width, int grid_n,
                    const std::function<double(Vec2)>& kernel);
    ~PlanarConvolver();
    PlanarConvolver(PlanarConvolver&&) noexcept;
    PlanarConvolver& operator=(PlanarConvolver&&) noexcept;
    PlanarConvolver(const PlanarConvolver&) = delete;
    PlanarConvolver& operator=(const PlanarConvolver&) = delete;

    /// out[a] = sum_b kernel(x_a - x_b) rho[b] * cell_area.
    void apply(const std::vector<double>& rho, std::vector<double>& out);

    double box_half_width() const;
    int grid_n() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Both components of k^nu * rho in one pass (shared forward transform).
class ForceConvolver {
public:
    ForceConvolver(double box_half_width, int grid_n, const CutoffSpec& spec);
    /// Fills field.force_x / force_y and sets has_force.
    void apply(DensityField& field);

private:
    PlanarConvolver kx_, ky_;
};

/// Cell-averaged rho_0 on the grid, renormalized to exact unit mass.
/// Rejects the grid when the boundary-mass invariant already fails at
/// t = 0, suggesting a larger box.
DensityField init_density(const InitialDensitySpec& spec, double box_half_width,
                          int grid_n);

} // namespace ksmf
