#include "ksmf/initial.hpp"

#include <cmath>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace ksmf {

namespace {

double gaussian_density(Vec2 x, Vec2 mean, double sigma) {
    const double q = (x - mean).norm2() / (2.0 * sigma * sigma);
    return std::exp(-q) / (two_pi * sigma * sigma);
}

// P(X < t) for X ~ N(0,1).
double std_normal_cdf(double t) {
    return 0.5 * std::erfc(-t / std::sqrt(2.0));
}

double gaussian_box_mass(Vec2 mean, double sigma, double x0, double x1,
                         double y0, double y1) {
    const double px = std_normal_cdf((x1 - mean.x) / sigma) -
                      std_normal_cdf((x0 - mean.x) / sigma);
    const double py = std_normal_cdf((y1 - mean.y) / sigma) -
                      std_normal_cdf((y0 - mean.y) / sigma);
    return px * py;
}

// Length of the vertical chord of the disc at abscissa x, clipped to [y0,y1].
double disc_chord(double x, Vec2 c, double R, double y0, double y1) {
    const double dx = x - c.x;
    const double d2 = R * R - dx * dx;
    if (d2 <= 0.0) return 0.0;
    const double half = std::sqrt(d2);
    const double lo = std::max(y0, c.y - half);
    const double hi = std::min(y1, c.y + half);
    return std::max(0.0, hi - lo);
}

} // namespace

InitialDensitySpec InitialDensitySpec::gaussian(Vec2 mean, double sigma) {
    InitialDensitySpec spec;
    spec.kind = Kind::Gaussian;
    spec.center = mean;
    spec.sigma = sigma;
    spec.validate();
    return spec;
}

InitialDensitySpec InitialDensitySpec::uniform_disc(Vec2 center, double radius) {
    InitialDensitySpec spec;
    spec.kind = Kind::UniformDisc;
    spec.center = center;
    spec.radius = radius;
    spec.validate();
    return spec;
}

InitialDensitySpec InitialDensitySpec::mixture(std::vector<Component> components) {
    InitialDensitySpec spec;
    spec.kind = Kind::Mixture;
    spec.components = std::move(components);
    spec.validate();
    return spec;
}

void InitialDensitySpec::validate() const {
    switch (kind) {
    case Kind::Gaussian:
        if (!(sigma > 0.0))
            throw std::invalid_argument("initial density: sigma must be positive");
        return;
    case Kind::UniformDisc:
        if (!(radius > 0.0))
            throw std::invalid_argument("initial density: radius must be positive");
        return;
    case Kind::Mixture: {
        if (components.empty())
            throw std::invalid_argument("initial density: empty mixture");
        double total = 0.0;
        for (const auto& c : components) {
            if (!(c.sigma > 0.0) || !(c.weight > 0.0))
                throw std::invalid_argument(
                    "initial density: mixture weights and sigmas must be positive");
            total += c.weight;
        }
        if (std::abs(total - 1.0) > 1e-12)
            throw std::invalid_argument(
                "initial density: mixture weights must sum to 1");
        return;
    }
    }
    throw std::invalid_argument("initial density: unsupported kind");
}

double InitialDensitySpec::density(Vec2 x) const {
    switch (kind) {
    case Kind::Gaussian:
        return gaussian_density(x, center, sigma);
    case Kind::UniformDisc:
        return (x - center).norm2() <= radius * radius
                   ? 1.0 / (M_PI * radius * radius)
                   : 0.0;
    case Kind::Mixture: {
        double v = 0.0;
        for (const auto& c : components)
            v += c.weight * gaussian_density(x, c.mean, c.sigma);
        return v;
    }
    }
    return 0.0;
}

double InitialDensitySpec::second_moment() const {
    switch (kind) {
    case Kind::Gaussian:
        return center.norm2() + 2.0 * sigma * sigma;
    case Kind::UniformDisc:
        return center.norm2() + radius * radius / 2.0;
    case Kind::Mixture: {
        double v = 0.0;
        for (const auto& c : components)
            v += c.weight * (c.mean.norm2() + 2.0 * c.sigma * c.sigma);
        return v;
    }
    }
    return 0.0;
}

double InitialDensitySpec::max_density() const {
    switch (kind) {
    case Kind::Gaussian:
        return 1.0 / (two_pi * sigma * sigma);
    case Kind::UniformDisc:
        return 1.0 / (M_PI * radius * radius);
    case Kind::Mixture: {
        double v = 0.0;
        for (const auto& c : components)
            v += c.weight / (two_pi * c.sigma * c.sigma);
        return v;
    }
    }
    return 0.0;
}

bool InitialDensitySpec::has_closed_entropy() const {
    return kind != Kind::Mixture;
}

double InitialDensitySpec::entropy_integral() const {
    switch (kind) {
    case Kind::Gaussian:
        return -(1.0 + std::log(two_pi * sigma * sigma));
    case Kind::UniformDisc:
        return -std::log(M_PI * radius * radius);
    case Kind::Mixture:
        throw std::logic_error("mixture entropy has no closed form");
    }
    return 0.0;
}

double InitialDensitySpec::cell_average(double x0, double x1, double y0,
                                        double y1) const {
    const double area = (x1 - x0) * (y1 - y0);
    switch (kind) {
    case Kind::Gaussian:
        return gaussian_box_mass(center, sigma, x0, x1, y0, y1) / area;
    case Kind::UniformDisc: {
        const double R = radius;
        // Quick accept/reject on the cell corners' radial range.
        const double cx = std::max(std::abs(x0 - center.x), std::abs(x1 - center.x));
        const double cy = std::max(std::abs(y0 - center.y), std::abs(y1 - center.y));
        const double far2 = cx * cx + cy * cy;
        const double nx = (center.x < x0) ? x0 - center.x
                        : (center.x > x1) ? center.x - x1 : 0.0;
        const double ny = (center.y < y0) ? y0 - center.y
                        : (center.y > y1) ? center.y - y1 : 0.0;
        const double near2 = nx * nx + ny * ny;
        const double rho = 1.0 / (M_PI * R * R);
        if (far2 <= R * R) return rho;
        if (near2 >= R * R) return 0.0;
        using quad = boost::math::quadrature::gauss_kronrod<double, 31>;
        const double overlap = quad::integrate(
            [&](double x) { return disc_chord(x, center, R, y0, y1); }, x0, x1,
            12, 1e-13);
        return overlap / area * rho;
    }
    case Kind::Mixture: {
        double v = 0.0;
        for (const auto& c : components)
            v += c.weight * gaussian_box_mass(c.mean, c.sigma, x0, x1, y0, y1);
        return v / area;
    }
    }
    return 0.0;
}

double ParticleEnsemble::mean_sq_radius() const {
    double sum = 0.0;
    for (const Vec2& p : positions) sum += p.norm2();
    return positions.empty() ? 0.0 : sum / static_cast<double>(positions.size());
}

bool ParticleEnsemble::finite() const {
    for (const Vec2& p : positions)
        if (!p.finite()) return false;
    return true;
}

ParticleEnsemble sample_initial(const InitialDensitySpec& spec, int n,
                                const NoisePlan& noise) {
    spec.validate();
    ParticleEnsemble ens;
    ens.positions.resize(static_cast<std::size_t>(n));
    ens.time = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto p = static_cast<std::uint32_t>(i);
        switch (spec.kind) {
        case InitialDensitySpec::Kind::Gaussian: {
            const Vec2 z = noise.normal_pair(p, 0, NoiseStream::InitialSample);
            ens.positions[i] = spec.center + spec.sigma * z;
            break;
        }
        case InitialDensitySpec::Kind::UniformDisc: {
            double u1, u2;
            noise.uniform_pair(p, 0, NoiseStream::InitialSample, u1, u2);
            const double r = spec.radius * std::sqrt(u1);
            const double a = two_pi * u2;
            ens.positions[i] =
                spec.center + Vec2{r * std::cos(a), r * std::sin(a)};
            break;
        }
        case InitialDensitySpec::Kind::Mixture: {
            double u1, u2;
            noise.uniform_pair(p, 1, NoiseStream::InitialSample, u1, u2);
            std::size_t c = 0;
            double acc = spec.components[0].weight;
            while (c + 1 < spec.components.size() && u1 >= acc)
                acc += spec.components[++c].weight;
            const Vec2 z = noise.normal_pair(p, 0, NoiseStream::InitialSample);
            ens.positions[i] =
                spec.components[c].mean + spec.components[c].sigma * z;
            break;
        }
        }
    }
    return ens;
}

} // namespace ksmf
