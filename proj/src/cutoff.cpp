#include "ksmf/cutoff.hpp"

#include <cmath>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "ksmf/vec2.hpp"

namespace ksmf {

namespace {

constexpr double kTableLo = 1.0;
constexpr double kTableHi = 2.0;

double smoothstep5(double u) {
    return u * u * u * (u * (6.0 * u - 15.0) + 10.0);
}

double smoothstep5_prime(double u) {
    const double v = u * (u - 1.0);
    return 30.0 * v * v;
}

} // namespace

double RadialProfile::s(double r) {
    if (r <= 1.0) return 0.0;
    if (r >= 2.0) return 1.0;
    return smoothstep5(r - 1.0);
}

double RadialProfile::s_prime(double r) {
    if (r <= 1.0 || r >= 2.0) return 0.0;
    return smoothstep5_prime(r - 1.0);
}

const RadialProfile& RadialProfile::instance() {
    static const RadialProfile profile;
    return profile;
}

RadialProfile::RadialProfile() {
    using quad = boost::math::quadrature::gauss_kronrod<double, 31>;
    const auto integrand = [](double u) { return -s(u) / (two_pi * u); };

    // Cumulative psi over the annulus nodes; each panel is smooth so the
    // quadrature is exact to well under the 1e-12 target.
    psi_.resize(kNodes + 1);
    psi_[0] = 0.0;
    const double dr = (kTableHi - kTableLo) / kNodes;
    for (std::size_t i = 1; i <= kNodes; ++i) {
        const double a = kTableLo + (i - 1) * dr;
        const double b = kTableLo + i * dr;
        psi_[i] = psi_[i - 1] + quad::integrate(integrand, a, b, 10, 1e-14);
    }
    shift_ = -std::log(2.0) / two_pi - psi_[kNodes];
    for (auto& v : psi_) v += shift_;

    // Measure the Hessian constant on a dense radial grid. Outside the
    // annulus the exact Coulomb Jacobian gives pi r^2 max|entry| = 1/2.
    double worst = 0.5;
    const std::size_t samples = 200000;
    for (std::size_t i = 0; i <= samples; ++i) {
        const double r = kTableLo + (kTableHi - kTableLo) * i / samples;
        const double ratio = force_jacobian_max(r) * M_PI * r * r;
        if (ratio > worst) worst = ratio;
    }
    hessian_constant_ = worst;
}

double RadialProfile::phi1(double r) const {
    if (r <= kTableLo) return 0.0;
    if (r >= kTableHi) return -std::log(r) / two_pi;
    // Cubic Hermite between table nodes; derivatives -s(r)/(2 pi r) are
    // exact, so the interpolation error is O(dr^4) ~ 1e-14.
    const double dr = (kTableHi - kTableLo) / kNodes;
    double pos = (r - kTableLo) / dr;
    std::size_t i = static_cast<std::size_t>(pos);
    if (i >= kNodes) i = kNodes - 1;
    const double t = pos - static_cast<double>(i);
    const double r0 = kTableLo + i * dr;
    const double r1 = r0 + dr;
    const double y0 = psi_[i], y1 = psi_[i + 1];
    const double d0 = -s(r0) / (two_pi * r0);
    const double d1 = -s(r1) / (two_pi * r1);
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + t) * dr * d0 +
           (-2 * t3 + 3 * t2) * y1 + (t3 - t2) * dr * d1;
}

double RadialProfile::force_jacobian_max(double r) const {
    if (r <= kTableLo) return 0.0;
    // k1(x) = g(r) x with g = s/(2 pi r^2). Jacobian entries over all
    // directions: diagonal spans g .. g + g' r, off-diagonal peaks |g' r|/2.
    const double g = s(r) / (two_pi * r * r);
    const double gp = (s_prime(r) * r - 2.0 * s(r)) / (two_pi * r * r * r);
    const double diag = std::max(std::abs(g), std::abs(g + gp * r));
    return std::max(diag, std::abs(gp * r) / 2.0);
}

CutoffSpec CutoffSpec::for_particles(double alpha, int n_particles) {
    CutoffSpec spec;
    spec.alpha = alpha;
    spec.n_particles = n_particles;
    spec.nu = std::pow(static_cast<double>(n_particles), alpha);
    spec.hessian_slack = RadialProfile::instance().hessian_constant();
    spec.validate();
    return spec;
}

CutoffSpec CutoffSpec::with_rate(double nu, int n_particles, double alpha) {
    CutoffSpec spec;
    spec.alpha = alpha;
    spec.n_particles = n_particles;
    spec.nu = nu;
    spec.hessian_slack = RadialProfile::instance().hessian_constant();
    spec.validate();
    return spec;
}

void CutoffSpec::validate() const {
    if (!(alpha > 0.0 && alpha < 0.5))
        throw std::invalid_argument("CutoffSpec: alpha must lie in (0, 1/2)");
    if (!(nu > 0.0))
        throw std::invalid_argument("CutoffSpec: cutoff rate nu must be positive");
    if (n_particles < 1)
        throw std::invalid_argument("CutoffSpec: n_particles must be positive");
    if (hessian_slack < 1.0)
        throw std::invalid_argument("CutoffSpec: hessian_slack must be >= 1");
}

double default_split_rate(int n_particles) {
    const double ln = std::log(static_cast<double>(n_particles));
    return std::pow(ln, 1.5);
}

} // namespace ksmf
