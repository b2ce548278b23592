#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ksmf/cutoff.hpp"
#include "ksmf/vec2.hpp"

namespace ksmf {

/// Mollified Coulomb potential phi^nu(x) = phi1(nu x): exactly
/// -(1/2pi) log(nu |x|) for |x| >= 2/nu and 0 for |x| <= 1/nu.
double potential(Vec2 x, const CutoffSpec& spec);

/// Scalar c(|x|^2) with k^nu(x) = c * x. Zero inside the dead zone,
/// 1/(2 pi |x|^2) outside 2/nu, profile blend on the annulus.
double force_coefficient(double r2, const CutoffSpec& spec);

/// Regularized force k^nu(x) = -grad phi^nu(x).
Vec2 force(Vec2 x, const CutoffSpec& spec);

/// Local Lipschitz majorant l^nu(y): 16/|y|^2 for |y| >= 4/nu, nu^2 inside.
double lipschitz_majorant(Vec2 y, const CutoffSpec& spec);

/// K^N_i = -(chi/N) sum_{j != i} k^nu(x_i - x_j), N = positions.size().
Vec2 n_body_force(std::span<const Vec2> positions, std::size_t i, double chi,
                  const CutoffSpec& spec);

/// All N force components in one O(N^2) pass. Each component accumulates
/// over ascending j against the read-only snapshot, so the result is
/// bitwise independent of the number of threads. Optionally counts the
/// unordered pairs closer than the Coulomb radius 2/nu.
void ensemble_forces(std::span<const Vec2> positions, double chi,
                     const CutoffSpec& spec, std::span<Vec2> out,
                     std::int64_t* pairs_in_cutoff = nullptr);

/// |L^nu_i| = (chi/N) sum_{j != i} l^nu(x_i - x_j). The paper carries a
/// minus sign on L; only the magnitude is consumed.
double n_body_lipschitz(std::span<const Vec2> positions, std::size_t i,
                        double chi, const CutoffSpec& spec);

void ensemble_lipschitz(std::span<const Vec2> positions, double chi,
                        const CutoffSpec& spec, std::span<double> out);

struct SplitForces {
    std::vector<Vec2> k1;  ///< short-range remainder, support |x| <= 2/nu2
    std::vector<Vec2> k2;  ///< wider-cutoff force K^{nu2}
};

/// Split K^N = K1 + K2 with k2 = k^{nu2}, k1 = k^nu - k^{nu2}.
/// Requires nu2 < nu (wider cutoff radius for the K2 part).
SplitForces split_force(std::span<const Vec2> positions, double chi,
                        const CutoffSpec& spec, double nu2);

/// (K1)_i alone, for the law-of-large-numbers diagnostics on k1.
void ensemble_split_k1(std::span<const Vec2> positions, double chi,
                       const CutoffSpec& spec, double nu2,
                       std::span<Vec2> out);

} // namespace ksmf
