#include "ksmf/kernel.hpp"

#include <cmath>
#include <stdexcept>

namespace ksmf {

double potential(Vec2 x, const CutoffSpec& spec) {
    return RadialProfile::instance().phi1(spec.nu * x.norm());
}

double force_coefficient(double r2, const CutoffSpec& spec) {
    const double r_out = spec.outer_radius();
    if (r2 >= r_out * r_out) return 1.0 / (two_pi * r2);
    const double r_in = spec.inner_radius();
    if (r2 <= r_in * r_in) return 0.0;
    const double r = std::sqrt(r2);
    return RadialProfile::s(spec.nu * r) / (two_pi * r2);
}

Vec2 force(Vec2 x, const CutoffSpec& spec) {
    const double c = force_coefficient(x.norm2(), spec);
    return {c * x.x, c * x.y};
}

double lipschitz_majorant(Vec2 y, const CutoffSpec& spec) {
    const double r2 = y.norm2();
    const double r_far = 4.0 / spec.nu;
    if (r2 >= r_far * r_far) return 16.0 / r2;
    return spec.nu * spec.nu;
}

Vec2 n_body_force(std::span<const Vec2> positions, std::size_t i, double chi,
                  const CutoffSpec& spec) {
    const std::size_t n = positions.size();
    const Vec2 xi = positions[i];
    Vec2 sum{};
    for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const Vec2 d = xi - positions[j];
        const double c = force_coefficient(d.norm2(), spec);
        sum.x += c * d.x;
        sum.y += c * d.y;
    }
    const double scale = -chi / static_cast<double>(n);
    return {scale * sum.x, scale * sum.y};
}

void ensemble_forces(std::span<const Vec2> positions, double chi,
                     const CutoffSpec& spec, std::span<Vec2> out,
                     std::int64_t* pairs_in_cutoff) {
    const std::int64_t n = static_cast<std::int64_t>(positions.size());
    const double scale = -chi / static_cast<double>(n);
    const double r2_out = spec.outer_radius() * spec.outer_radius();
    const double r2_in = spec.inner_radius() * spec.inner_radius();
    const double nu = spec.nu;
    std::int64_t close = 0;

#pragma omp parallel for schedule(static) reduction(+ : close)
    for (std::int64_t i = 0; i < n; ++i) {
        const Vec2 xi = positions[i];
        double fx = 0.0, fy = 0.0;
        for (std::int64_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const double dx = xi.x - positions[j].x;
            const double dy = xi.y - positions[j].y;
            const double r2 = dx * dx + dy * dy;
            if (r2 >= r2_out) {
                const double c = 1.0 / (two_pi * r2);
                fx += c * dx;
                fy += c * dy;
            } else {
                ++close;
                if (r2 > r2_in) {
                    const double c =
                        RadialProfile::s(nu * std::sqrt(r2)) / (two_pi * r2);
                    fx += c * dx;
                    fy += c * dy;
                }
            }
        }
        out[i] = {scale * fx, scale * fy};
    }
    if (pairs_in_cutoff) *pairs_in_cutoff = close / 2;
}

double n_body_lipschitz(std::span<const Vec2> positions, std::size_t i,
                        double chi, const CutoffSpec& spec) {
    const std::size_t n = positions.size();
    const Vec2 yi = positions[i];
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        sum += lipschitz_majorant(yi - positions[j], spec);
    }
    return chi / static_cast<double>(n) * sum;
}

void ensemble_lipschitz(std::span<const Vec2> positions, double chi,
                        const CutoffSpec& spec, std::span<double> out) {
    const std::int64_t n = static_cast<std::int64_t>(positions.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i)
        out[i] = n_body_lipschitz(positions, static_cast<std::size_t>(i), chi,
                                  spec);
}

namespace {

CutoffSpec wider_cutoff(const CutoffSpec& spec, double nu2) {
    if (!(nu2 < spec.nu))
        throw std::invalid_argument(
            "split_force: nu2 must be below nu (wider cutoff radius)");
    CutoffSpec s2 = spec;
    s2.nu = nu2;
    return s2;
}

} // namespace

SplitForces split_force(std::span<const Vec2> positions, double chi,
                        const CutoffSpec& spec, double nu2) {
    const CutoffSpec spec2 = wider_cutoff(spec, nu2);
    const std::int64_t n = static_cast<std::int64_t>(positions.size());
    SplitForces result;
    result.k1.assign(positions.size(), Vec2{});
    result.k2.assign(positions.size(), Vec2{});
    const double scale = -chi / static_cast<double>(n);

#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        const Vec2 xi = positions[i];
        Vec2 s1{}, s2{};
        for (std::int64_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const Vec2 d = xi - positions[j];
            const double r2 = d.norm2();
            const double c = force_coefficient(r2, spec);
            const double c2 = force_coefficient(r2, spec2);
            const double c1 = c - c2;
            s1.x += c1 * d.x;
            s1.y += c1 * d.y;
            s2.x += c2 * d.x;
            s2.y += c2 * d.y;
        }
        result.k1[i] = scale * s1;
        result.k2[i] = scale * s2;
    }
    return result;
}

void ensemble_split_k1(std::span<const Vec2> positions, double chi,
                       const CutoffSpec& spec, double nu2,
                       std::span<Vec2> out) {
    const CutoffSpec spec2 = wider_cutoff(spec, nu2);
    const std::int64_t n = static_cast<std::int64_t>(positions.size());
    const double scale = -chi / static_cast<double>(n);
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        const Vec2 xi = positions[i];
        Vec2 s1{};
        for (std::int64_t j = 0; j < n; ++j) {
            if (j == i) continue;
            const Vec2 d = xi - positions[j];
            const double r2 = d.norm2();
            const double c1 =
                force_coefficient(r2, spec) - force_coefficient(r2, spec2);
            s1.x += c1 * d.x;
            s1.y += c1 * d.y;
        }
        out[i] = scale * s1;
    }
}

} // namespace ksmf
