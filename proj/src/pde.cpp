#include "ksmf/pde.hpp"

#include <cmath>
#include <complex>
#include <cstring>
#include <mutex>
#include <sstream>

#include <fftw3.h>

namespace ksmf {

namespace {

std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

// Fromm reconstruction slope. TVD limiters (minmod and friends) clamp the
// slope to zero at extrema, which degrades the scheme to first order
// exactly at the density peak and visibly inflates the second-moment
// growth; the unlimited central slope keeps second order there. The
// Courant numbers here are tiny, so the residual overshoots are at the
// clipping-noise level and are accounted by the clip budget.
double reconstruction_slope(double left, double right) {
    return 0.5 * (left + right);
}

} // namespace

CflViolation::CflViolation(double vmax_, double dt_, double dt_max_)
    : std::runtime_error([&] {
          std::ostringstream msg;
          msg << "advection CFL violated: |v|_inf = " << vmax_ << ", dt = "
              << dt_ << " exceeds 0.4 cell / |v|_inf = " << dt_max_;
          return msg.str();
      }()),
      vmax(vmax_), dt(dt_), dt_max(dt_max_) {}

/// Exact heat step on the grid: multiply the spectrum by exp(-|xi|^2 dt).
class SpectralDiffusion {
public:
    SpectralDiffusion(double box_half_width, int grid_n) : n_(grid_n) {
        const std::size_t real_size = static_cast<std::size_t>(n_) * n_;
        const std::size_t spec_size = static_cast<std::size_t>(n_) * (n_ / 2 + 1);
        real_.assign(real_size, 0.0);
        spec_.assign(spec_size, {});
        {
            std::lock_guard<std::mutex> lock(planner_mutex());
            forward_ = fftw_plan_dft_r2c_2d(
                n_, n_, real_.data(),
                reinterpret_cast<fftw_complex*>(spec_.data()), FFTW_ESTIMATE);
            inverse_ = fftw_plan_dft_c2r_2d(
                n_, n_, reinterpret_cast<fftw_complex*>(spec_.data()),
                real_.data(), FFTW_ESTIMATE);
        }
        // Squared wavenumbers for period 2L.
        const double base = M_PI / box_half_width;
        ksq_y_.resize(n_);
        for (int m = 0; m < n_; ++m) {
            const int folded = (m <= n_ / 2) ? m : m - n_;
            ksq_y_[m] = base * base * folded * folded;
        }
        ksq_x_.resize(n_ / 2 + 1);
        for (int m = 0; m <= n_ / 2; ++m) ksq_x_[m] = base * base * m * m;
    }

    ~SpectralDiffusion() {
        std::lock_guard<std::mutex> lock(planner_mutex());
        fftw_destroy_plan(forward_);
        fftw_destroy_plan(inverse_);
    }

    void apply(std::vector<double>& rho, double dt) {
        std::memcpy(real_.data(), rho.data(), real_.size() * sizeof(double));
        fftw_execute(forward_);
        const double norm = 1.0 / (static_cast<double>(n_) * n_);
        const int cols = n_ / 2 + 1;
        for (int iy = 0; iy < n_; ++iy)
            for (int ix = 0; ix < cols; ++ix)
                spec_[static_cast<std::size_t>(iy) * cols + ix] *=
                    std::exp(-(ksq_x_[ix] + ksq_y_[iy]) * dt) * norm;
        fftw_execute(inverse_);
        std::memcpy(rho.data(), real_.data(), real_.size() * sizeof(double));
    }

private:
    int n_;
    std::vector<double> real_;
    std::vector<std::complex<double>> spec_;
    std::vector<double> ksq_x_, ksq_y_;
    fftw_plan forward_ = nullptr;
    fftw_plan inverse_ = nullptr;
};

FieldSequence::FieldSequence(double box_half_width, int grid_n, double chi)
    : L_(box_half_width), n_(grid_n), chi_(chi) {}

void FieldSequence::append(const DensityField& field) {
    if (!field.has_force)
        throw std::invalid_argument("FieldSequence: force cache missing");
    if (field.grid_n != n_ || field.box_half_width != L_)
        throw std::invalid_argument("FieldSequence: grid mismatch");
    if (!times_.empty() && field.time <= times_.back())
        throw std::invalid_argument("FieldSequence: times must increase");
    times_.push_back(field.time);
    fx_.push_back(field.force_x);
    fy_.push_back(field.force_y);
}

Vec2 FieldSequence::sample(std::size_t snap, Vec2 p) const {
    const double cell = 2.0 * L_ / n_;
    // Outside the cell-center hull: unit-mass monopole far field.
    if (p.norm_inf() >= L_ - 0.5 * cell) {
        const double r2 = p.norm2();
        return (1.0 / (two_pi * r2)) * p;
    }
    const double ux = (p.x + L_) / cell - 0.5;
    const double uy = (p.y + L_) / cell - 0.5;
    int ix = static_cast<int>(std::floor(ux));
    int iy = static_cast<int>(std::floor(uy));
    ix = std::min(std::max(ix, 0), n_ - 2);
    iy = std::min(std::max(iy, 0), n_ - 2);
    const double tx = ux - ix, ty = uy - iy;
    const auto& fx = fx_[snap];
    const auto& fy = fy_[snap];
    const std::size_t i00 = static_cast<std::size_t>(iy) * n_ + ix;
    const std::size_t i10 = i00 + 1;
    const std::size_t i01 = i00 + n_;
    const std::size_t i11 = i01 + 1;
    const double w00 = (1 - tx) * (1 - ty), w10 = tx * (1 - ty);
    const double w01 = (1 - tx) * ty, w11 = tx * ty;
    return {w00 * fx[i00] + w10 * fx[i10] + w01 * fx[i01] + w11 * fx[i11],
            w00 * fy[i00] + w10 * fy[i10] + w01 * fy[i01] + w11 * fy[i11]};
}

Vec2 FieldSequence::convolved_force_at(Vec2 x, double t) const {
    if (times_.empty())
        throw std::logic_error("FieldSequence: no snapshots stored");
    if (times_.size() == 1 || t <= times_.front()) return sample(0, x);
    if (t >= times_.back()) return sample(times_.size() - 1, x);
    const auto it = std::upper_bound(times_.begin(), times_.end(), t);
    const std::size_t hi = static_cast<std::size_t>(it - times_.begin());
    const std::size_t lo = hi - 1;
    const double w = (t - times_[lo]) / (times_[hi] - times_[lo]);
    const Vec2 a = sample(lo, x);
    const Vec2 b = sample(hi, x);
    return {(1.0 - w) * a.x + w * b.x, (1.0 - w) * a.y + w * b.y};
}

PdeSolver::PdeSolver(DensityField initial, const CutoffSpec& spec, double chi)
    : field_(std::move(initial)), spec_(spec), chi_(chi),
      force_conv_(field_.box_half_width, field_.grid_n, spec),
      diffusion_(std::make_unique<SpectralDiffusion>(field_.box_half_width,
                                                     field_.grid_n)) {
    spec_.validate();
    if (chi_ < 0.0) throw std::invalid_argument("PdeSolver: chi must be >= 0");
    const std::size_t cells = field_.rho.size();
    vx_.resize(cells);
    vy_.resize(cells);
    flux_x_.resize(cells);
    flux_y_.resize(cells);
    scratch_.resize(cells);
}

PdeSolver::~PdeSolver() = default;
PdeSolver::PdeSolver(PdeSolver&&) noexcept = default;

void PdeSolver::refresh_force() {
    if (!force_fresh_) {
        force_conv_.apply(field_);
        force_fresh_ = true;
    }
}

double PdeSolver::cfl_limit() {
    refresh_force();
    double vmax = 0.0;
    for (std::size_t i = 0; i < field_.rho.size(); ++i) {
        vmax = std::max(vmax, std::abs(chi_ * field_.force_x[i]));
        vmax = std::max(vmax, std::abs(chi_ * field_.force_y[i]));
    }
    if (vmax == 0.0) return std::numeric_limits<double>::infinity();
    return 0.4 * field_.cell_size() / vmax;
}

void PdeSolver::advect(double dt, const std::vector<double>& vx,
                       const std::vector<double>& vy) {
    const int n = field_.grid_n;
    const double cell = field_.cell_size();
    auto& rho = field_.rho;
    auto idx = [n](int ix, int iy) {
        return static_cast<std::size_t>(iy) * n + ix;
    };

    // Face fluxes in x (face f sits between ix = f and ix = f + 1).
    // Second-order upwind: donor value plus half a minmod-limited slope.
    std::fill(flux_x_.begin(), flux_x_.end(), 0.0);
    std::fill(flux_y_.begin(), flux_y_.end(), 0.0);
#pragma omp parallel for schedule(static)
    for (int iy = 0; iy < n; ++iy) {
        for (int f = 0; f + 1 < n; ++f) {
            const double uf = 0.5 * (vx[idx(f, iy)] + vx[idx(f + 1, iy)]);
            double q;
            if (uf >= 0.0) {
                const double c = rho[idx(f, iy)];
                const double left = (f > 0) ? rho[idx(f - 1, iy)] : c;
                const double right = rho[idx(f + 1, iy)];
                q = c + 0.5 * reconstruction_slope(c - left, right - c);
            } else {
                const double c = rho[idx(f + 1, iy)];
                const double left = rho[idx(f, iy)];
                const double right = (f + 2 < n) ? rho[idx(f + 2, iy)] : c;
                q = c - 0.5 * reconstruction_slope(c - left, right - c);
            }
            flux_x_[idx(f, iy)] = uf * q;
        }
    }
#pragma omp parallel for schedule(static)
    for (int iy = 0; iy < n - 1; ++iy) {
        for (int ix = 0; ix < n; ++ix) {
            const double uf = 0.5 * (vy[idx(ix, iy)] + vy[idx(ix, iy + 1)]);
            double q;
            if (uf >= 0.0) {
                const double c = rho[idx(ix, iy)];
                const double left = (iy > 0) ? rho[idx(ix, iy - 1)] : c;
                const double right = rho[idx(ix, iy + 1)];
                q = c + 0.5 * reconstruction_slope(c - left, right - c);
            } else {
                const double c = rho[idx(ix, iy + 1)];
                const double left = rho[idx(ix, iy)];
                const double right = (iy + 2 < n) ? rho[idx(ix, iy + 2)] : c;
                q = c - 0.5 * reconstruction_slope(c - left, right - c);
            }
            flux_y_[idx(ix, iy)] = uf * q;
        }
    }

    // Conservative update; boundary faces carry zero flux.
    const double lambda = dt / cell;
#pragma omp parallel for schedule(static)
    for (int iy = 0; iy < n; ++iy) {
        for (int ix = 0; ix < n; ++ix) {
            const double fxr = (ix + 1 < n) ? flux_x_[idx(ix, iy)] : 0.0;
            const double fxl = (ix > 0) ? flux_x_[idx(ix - 1, iy)] : 0.0;
            const double fyr = (iy + 1 < n) ? flux_y_[idx(ix, iy)] : 0.0;
            const double fyl = (iy > 0) ? flux_y_[idx(ix, iy - 1)] : 0.0;
            scratch_[idx(ix, iy)] =
                rho[idx(ix, iy)] - lambda * (fxr - fxl + fyr - fyl);
        }
    }
    rho.swap(scratch_);
}

void PdeSolver::diffuse(double dt) { diffusion_->apply(field_.rho, dt); }

void PdeSolver::clip_negatives(double target_mass) {
    double clipped = 0.0;
    const double area = field_.cell_size() * field_.cell_size();
    for (auto& v : field_.rho) {
        if (v < 0.0) {
            clipped -= v;
            v = 0.0;
        }
    }
    if (clipped > 0.0) {
        clipped_mass_ += clipped * area;
        const double mass_now = field_.mass();
        if (mass_now > 0.0) {
            const double scale = target_mass / mass_now;
            for (auto& v : field_.rho) v *= scale;
        }
    }
}

void PdeSolver::step(double dt) {
    if (dt < 0.0) throw std::invalid_argument("PdeSolver::step: negative dt");
    if (dt == 0.0) return;
    const double mass_before = field_.mass();

    refresh_force();
    double vmax = 0.0;
    for (std::size_t i = 0; i < field_.rho.size(); ++i) {
        vx_[i] = -chi_ * field_.force_x[i];
        vy_[i] = -chi_ * field_.force_y[i];
        vmax = std::max(vmax, std::max(std::abs(vx_[i]), std::abs(vy_[i])));
    }
    if (vmax > 0.0) {
        const double dt_max = 0.4 * field_.cell_size() / vmax;
        if (dt > dt_max) throw CflViolation(vmax, dt, dt_max);
    }

    advect(0.5 * dt, vx_, vy_);
    diffuse(dt);
    force_fresh_ = false;
    refresh_force();
    for (std::size_t i = 0; i < field_.rho.size(); ++i) {
        vx_[i] = -chi_ * field_.force_x[i];
        vy_[i] = -chi_ * field_.force_y[i];
    }
    advect(0.5 * dt, vx_, vy_);
    clip_negatives(mass_before);
    force_fresh_ = false;
    field_.time += dt;

    max_mass_drift_ = std::max(max_mass_drift_,
                               std::abs(field_.mass() - mass_before));
    if (field_.boundary_mass_fraction() > 1e-4) domain_flag_ = true;
}

void PdeSolver::advance_to(double t_target, double dt_macro,
                           FieldSequence* store) {
    if (store && store->size() == 0) {
        refresh_force();
        store->append(field_);
    }
    while (field_.time < t_target - 1e-12) {
        const double macro = std::min(dt_macro, t_target - field_.time);
        double remaining = macro;
        int guard = 0;
        while (remaining > 1e-15) {
            const double dt = std::min(remaining, cfl_limit());
            step(dt);
            remaining -= dt;
            if (++guard > 100000)
                throw std::runtime_error(
                    "PdeSolver::advance_to: CFL sub-stepping stalled");
        }
        if (store) {
            refresh_force();
            store->append(field_);
        }
    }
}

EnergyReport PdeSolver::energy_report() {
    if (!log_conv_) {
        const double cell = field_.cell_size();
        // Bare logarithmic potential; the self-cell takes the exact average
        // of phi over the disc of equal area, every other offset the value
        // at the cell-center distance.
        const double r0 = cell / std::sqrt(M_PI);
        const double self = -(std::log(r0) - 0.5) / two_pi;
        log_conv_.emplace(field_.box_half_width, field_.grid_n,
                          [self](Vec2 d) {
                              const double r2 = d.norm2();
                              if (r2 == 0.0) return self;
                              return -0.5 * std::log(r2) / two_pi;
                          });
    }

    EnergyReport report;
    report.time = field_.time;
    report.mass = field_.mass();
    report.second_moment = field_.second_moment();

    const double area = field_.cell_size() * field_.cell_size();
    double entropy = 0.0, comp = 0.0;
    for (double v : field_.rho) {
        if (v < 1e-30) continue;  // rho log rho -> 0
        const double y = v * std::log(v) - comp;
        const double t = entropy + y;
        comp = (t - entropy) - y;
        entropy = t;
    }
    report.entropy = entropy * area;

    log_conv_->apply(field_.rho, scratch_);
    double inter = 0.0;
    comp = 0.0;
    for (std::size_t i = 0; i < field_.rho.size(); ++i) {
        const double y = field_.rho[i] * scratch_[i] - comp;
        const double t = inter + y;
        comp = (t - inter) - y;
        inter = t;
    }
    report.interaction = -(chi_ / 2.0) * inter * area;
    report.free_energy = report.entropy + report.interaction;
    return report;
}

bool PdeSolver::resolution_flag() const {
    const double saturation = spec_.nu * spec_.nu / (4.0 * M_PI);
    if (field_.max_density() >= saturation) return true;
    return spec_.outer_radius() < 2.0 * field_.cell_size();
}

} // namespace ksmf
