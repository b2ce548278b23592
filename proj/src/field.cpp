#include "ksmf/field.hpp"

#include <cmath>
#include <complex>
#include <mutex>
#include <sstream>
#include <stdexcept>

#include <fftw3.h>

#include "ksmf/kernel.hpp"

namespace ksmf {

namespace {

// FFTW's planner mutates global state; executions are safe.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

double kahan_total(const std::vector<double>& v,
                   const std::function<double(std::size_t)>& weight) {
    double sum = 0.0, c = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const double y = v[i] * weight(i) - c;
        const double t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    return sum;
}

} // namespace

double DensityField::mass() const {
    const double area = cell_size() * cell_size();
    return area * kahan_total(rho, [](std::size_t) { return 1.0; });
}

double DensityField::second_moment() const {
    const double area = cell_size() * cell_size();
    const double midpoint = area * kahan_total(rho, [this](std::size_t i) {
        const int ix = static_cast<int>(i) % grid_n;
        const int iy = static_cast<int>(i) / grid_n;
        const double x = cell_x(ix), y = cell_y(iy);
        return x * x + y * y;
    });
    // Midpoint pairing of cell averages with |x|^2 carries an exact
    // cell^2/6 * mass bias (for any density vanishing at the walls);
    // removing it leaves an O(cell^4) remainder.
    return midpoint - area / 6.0 * mass();
}

double DensityField::max_density() const {
    double m = 0.0;
    for (double v : rho) m = std::max(m, v);
    return m;
}

double DensityField::min_density() const {
    double m = rho.empty() ? 0.0 : rho.front();
    for (double v : rho) m = std::min(m, v);
    return m;
}

double DensityField::boundary_mass_fraction() const {
    const int margin = std::max(1, static_cast<int>(0.05 * grid_n));
    double boundary = 0.0, total = 0.0;
    for (int iy = 0; iy < grid_n; ++iy) {
        for (int ix = 0; ix < grid_n; ++ix) {
            const double v = rho[idx(ix, iy)];
            total += v;
            const bool edge = ix < margin || iy < margin ||
                              ix >= grid_n - margin || iy >= grid_n - margin;
            if (edge) boundary += v;
        }
    }
    return total > 0.0 ? boundary / total : 0.0;
}

struct PlanarConvolver::Impl {
    double L;
    int n;
    int padded;
    std::vector<double> real_buf;
    std::vector<std::complex<double>> spec_buf;
    std::vector<std::complex<double>> kernel_hat;
    fftw_plan forward = nullptr;
    fftw_plan inverse = nullptr;

    ~Impl() {
        std::lock_guard<std::mutex> lock(planner_mutex());
        if (forward) fftw_destroy_plan(forward);
        if (inverse) fftw_destroy_plan(inverse);
    }
};

PlanarConvolver::PlanarConvolver(double box_half_width, int grid_n,
                                 const std::function<double(Vec2)>& kernel)
    : impl_(std::make_unique<Impl>()) {
    impl_->L = box_half_width;
    impl_->n = grid_n;
    const int P = 2 * grid_n;
    impl_->padded = P;
    const std::size_t real_size = static_cast<std::size_t>(P) * P;
    const std::size_t spec_size = static_cast<std::size_t>(P) * (P / 2 + 1);
    impl_->real_buf.assign(real_size, 0.0);
    impl_->spec_buf.assign(spec_size, {});
    impl_->kernel_hat.assign(spec_size, {});

    {
        std::lock_guard<std::mutex> lock(planner_mutex());
        impl_->forward = fftw_plan_dft_r2c_2d(
            P, P, impl_->real_buf.data(),
            reinterpret_cast<fftw_complex*>(impl_->spec_buf.data()),
            FFTW_ESTIMATE);
        impl_->inverse = fftw_plan_dft_c2r_2d(
            P, P, reinterpret_cast<fftw_complex*>(impl_->spec_buf.data()),
            impl_->real_buf.data(), FFTW_ESTIMATE);
    }

    // Kernel values at signed cell offsets, wrapped onto the padded grid.
    const double cell = 2.0 * box_half_width / grid_n;
    for (int dy = -(grid_n - 1); dy <= grid_n - 1; ++dy) {
        for (int dx = -(grid_n - 1); dx <= grid_n - 1; ++dx) {
            const double v = kernel({dx * cell, dy * cell});
            const int ix = (dx + P) % P;
            const int iy = (dy + P) % P;
            impl_->real_buf[static_cast<std::size_t>(iy) * P + ix] = v;
        }
    }
    fftw_execute(impl_->forward);
    impl_->kernel_hat = impl_->spec_buf;
    std::fill(impl_->real_buf.begin(), impl_->real_buf.end(), 0.0);
}

PlanarConvolver::~PlanarConvolver() = default;
PlanarConvolver::PlanarConvolver(PlanarConvolver&&) noexcept = default;
PlanarConvolver& PlanarConvolver::operator=(PlanarConvolver&&) noexcept = default;

double PlanarConvolver::box_half_width() const { return impl_->L; }
int PlanarConvolver::grid_n() const { return impl_->n; }

void PlanarConvolver::apply(const std::vector<double>& rho,
                            std::vector<double>& out) {
    const int n = impl_->n;
    const int P = impl_->padded;
    if (rho.size() != static_cast<std::size_t>(n) * n)
        throw std::invalid_argument("PlanarConvolver: grid size mismatch");

    std::fill(impl_->real_buf.begin(), impl_->real_buf.end(), 0.0);
    for (int iy = 0; iy < n; ++iy)
        for (int ix = 0; ix < n; ++ix)
            impl_->real_buf[static_cast<std::size_t>(iy) * P + ix] =
                rho[static_cast<std::size_t>(iy) * n + ix];
    fftw_execute(impl_->forward);

    const double cell = 2.0 * impl_->L / n;
    const double scale = cell * cell / (static_cast<double>(P) * P);
    for (std::size_t i = 0; i < impl_->spec_buf.size(); ++i)
        impl_->spec_buf[i] *= impl_->kernel_hat[i] * scale;
    fftw_execute(impl_->inverse);

    out.resize(static_cast<std::size_t>(n) * n);
    for (int iy = 0; iy < n; ++iy)
        for (int ix = 0; ix < n; ++ix)
            out[static_cast<std::size_t>(iy) * n + ix] =
                impl_->real_buf[static_cast<std::size_t>(iy) * P + ix];
}

ForceConvolver::ForceConvolver(double box_half_width, int grid_n,
                               const CutoffSpec& spec)
    : kx_(box_half_width, grid_n,
          [spec](Vec2 d) { return force(d, spec).x; }),
      ky_(box_half_width, grid_n,
          [spec](Vec2 d) { return force(d, spec).y; }) {}

void ForceConvolver::apply(DensityField& field) {
    kx_.apply(field.rho, field.force_x);
    ky_.apply(field.rho, field.force_y);
    field.has_force = true;
}

DensityField init_density(const InitialDensitySpec& spec, double box_half_width,
                          int grid_n) {
    spec.validate();
    if (grid_n < 8 || box_half_width <= 0.0)
        throw std::invalid_argument("init_density: bad grid");

    DensityField field;
    field.box_half_width = box_half_width;
    field.grid_n = grid_n;
    field.time = 0.0;
    field.rho.resize(static_cast<std::size_t>(grid_n) * grid_n);
    const double cell = field.cell_size();
    for (int iy = 0; iy < grid_n; ++iy) {
        const double y0 = -box_half_width + iy * cell;
        for (int ix = 0; ix < grid_n; ++ix) {
            const double x0 = -box_half_width + ix * cell;
            field.rho[field.idx(ix, iy)] =
                spec.cell_average(x0, x0 + cell, y0, y0 + cell);
        }
    }

    const double raw_mass = field.mass();
    if (!(raw_mass > 0.0))
        throw std::invalid_argument("init_density: no mass on the grid");
    const double factor = 1.0 / raw_mass;
    if (std::abs(factor - 1.0) > 1e-3) {
        std::ostringstream msg;
        msg << "init_density: grid captures only mass " << raw_mass
            << "; enlarge the box";
        throw std::invalid_argument(msg.str());
    }
    for (auto& v : field.rho) v *= factor;
    field.renorm_factor = factor;

    const double edge = field.boundary_mass_fraction();
    if (edge > 1e-4) {
        // Suggest a box that comfortably holds the analytic support.
        double extent = 0.0;
        switch (spec.kind) {
        case InitialDensitySpec::Kind::Gaussian:
            extent = spec.center.norm_inf() + 7.0 * spec.sigma;
            break;
        case InitialDensitySpec::Kind::UniformDisc:
            extent = spec.center.norm_inf() + 1.3 * spec.radius;
            break;
        case InitialDensitySpec::Kind::Mixture:
            for (const auto& c : spec.components)
                extent = std::max(extent, c.mean.norm_inf() + 7.0 * c.sigma);
            break;
        }
        std::ostringstream msg;
        msg << "init_density: boundary mass fraction " << edge
            << " exceeds 1e-4 at t=0; suggested box half-width >= "
            << std::max(extent, 1.5 * box_half_width);
        throw std::invalid_argument(msg.str());
    }
    return field;
}

} // namespace ksmf
