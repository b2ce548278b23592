#pragma once

#include <vector>

#include "ksmf/noise.hpp"
#include "ksmf/vec2.hpp"

namespace ksmf {

/// Analytic initial density rho_0: unit mass, finite second moment,
/// bounded, finite entropy. All four properties hold in closed form for
/// the supported kinds.
struct InitialDensitySpec {
    enum class Kind { Gaussian, UniformDisc, Mixture };

    struct Component {
        Vec2 mean{};
        double sigma = 1.0;
        double weight = 1.0;
    };

    Kind kind = Kind::Gaussian;
    Vec2 center{};
    double sigma = 1.0;   // Gaussian
    double radius = 1.0;  // UniformDisc
    std::vector<Component> components;  // Mixture

    static InitialDensitySpec gaussian(Vec2 mean, double sigma);
    static InitialDensitySpec uniform_disc(Vec2 center, double radius);
    static InitialDensitySpec mixture(std::vector<Component> components);

    void validate() const;  ///< throws std::invalid_argument

    double density(Vec2 x) const;
    double second_moment() const;          ///< E|X|^2, closed form
    double max_density() const;            ///< sup rho_0 (bound for mixtures)
    bool has_closed_entropy() const;
    double entropy_integral() const;       ///< int rho log rho, closed form

    /// Mean cell value over [x0,x1] x [y0,y1]: erf products for Gaussian
    /// kinds, chord-length quadrature for the disc.
    double cell_average(double x0, double x1, double y0, double y1) const;
};

/// Positions of N planar particles plus the simulation clock.
struct ParticleEnsemble {
    std::vector<Vec2> positions;
    double time = 0.0;

    int n() const { return static_cast<int>(positions.size()); }
    double mean_sq_radius() const;
    bool finite() const;
};

/// N i.i.d. draws from rho_0; deterministic given the plan's (seed, replica).
ParticleEnsemble sample_initial(const InitialDensitySpec& spec, int n,
                                const NoisePlan& noise);

} // namespace ksmf
