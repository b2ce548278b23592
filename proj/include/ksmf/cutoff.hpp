#pragma once

#include <cstddef>
#include <vector>

namespace ksmf {

/// Radial switch profile s and the base (nu = 1) potential built from it.
///
/// s is the quintic smoothstep in (r - 1) on [1, 2]: s = 0 for r <= 1,
/// s = 1 for r >= 2, smooth and non-decreasing in between. Monotonicity
/// gives -lap(phi1) = s'(r)/(2 pi r) >= 0 exactly.
///
/// The base potential phi1 is 0 for r <= 1 and -(1/2pi) log r for r >= 2.
/// On the annulus it integrates psi'(r) = -s(r)/(2 pi r) (adaptive
/// quadrature, tolerance 1e-12, dense Hermite table) and is shifted so
/// psi(2) = -(1/2pi) log 2. The two advertised branch values and the
/// gradient bound |grad phi1| <= (2 pi r)^-1 cannot all hold with a
/// continuous junction at r = 1; the shift constant (the resulting jump
/// at r = 1) is recorded in annulus_shift().
class RadialProfile {
public:
    /// Shared immutable instance (thread-safe construction on first use).
    static const RadialProfile& instance();

    /// Switch function: 0 for r <= 1, 1 for r >= 2, quintic in between.
    static double s(double r);
    static double s_prime(double r);

    /// Base potential phi1(r).
    double phi1(double r) const;

    /// Largest Jacobian entry of the base force at radius r, max over
    /// directions: max |d_i k1_j(x)| for |x| = r.
    double force_jacobian_max(double r) const;

    /// Measured Hessian-bound constant: sup over r > 1 of
    /// pi r^2 * max |d_i k1_j|. The paper-style budget would be 1; the
    /// smoothstep transition overshoots it, so tests consume this value.
    double hessian_constant() const { return hessian_constant_; }

    /// Additive constant applied to the annulus piece so that the log
    /// branch is met exactly at r = 2. Equals the jump of phi1 at r = 1.
    double annulus_shift() const { return shift_; }

    std::size_t table_size() const { return psi_.size(); }

private:
    RadialProfile();

    std::vector<double> psi_;   // annulus potential at nodes r_i = 1 + i/M
    double shift_ = 0.0;
    double hessian_constant_ = 0.0;
    static constexpr std::size_t kNodes = 4096;
};

/// Regularization parameters defining k^nu and its majorants.
struct CutoffSpec {
    double alpha = 0.25;     ///< exponent in (0, 1/2)
    int n_particles = 1;     ///< N
    double nu = 1.0;         ///< cutoff rate; dead zone |x| <= 1/nu
    double hessian_slack = 1.0;  ///< measured C_H for the shared profile

    /// nu = N^alpha, the paper's coupling of cutoff to particle count.
    static CutoffSpec for_particles(double alpha, int n_particles);
    /// Explicit cutoff rate (ensemble size recorded separately).
    static CutoffSpec with_rate(double nu, int n_particles = 1,
                                double alpha = 0.25);

    void validate() const;  ///< throws std::invalid_argument on violation

    double inner_radius() const { return 1.0 / nu; }   // force is 0 inside
    double outer_radius() const { return 2.0 / nu; }   // pure Coulomb outside
};

/// Default split rate for K = K1 + K2: cutoff radius (log N)^(-3/2),
/// i.e. nu2 = (log N)^(3/2). Valid for the split only while nu2 < nu.
double default_split_rate(int n_particles);

} // namespace ksmf
