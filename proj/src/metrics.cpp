#include "ksmf/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ksmf/kernel.hpp"

namespace ksmf {

double sup_distance(const std::vector<ParticleEnsemble>& xs,
                    const std::vector<ParticleEnsemble>& ys) {
    if (xs.size() != ys.size())
        throw std::invalid_argument("sup_distance: misaligned series");
    double worst = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        const auto& a = xs[k];
        const auto& b = ys[k];
        if (a.positions.size() != b.positions.size())
            throw std::invalid_argument("sup_distance: particle count mismatch");
        if (a.time != b.time)
            throw std::invalid_argument("sup_distance: time grids differ");
        for (std::size_t i = 0; i < a.positions.size(); ++i)
            worst = std::max(worst, (a.positions[i] - b.positions[i]).norm_inf());
    }
    return worst;
}

TailEstimate tail_probability(const std::vector<double>& sup_distances,
                              double threshold) {
    if (sup_distances.empty())
        throw std::invalid_argument("tail_probability: empty sample");
    TailEstimate est;
    est.threshold = threshold;
    est.replicas = static_cast<int>(sup_distances.size());
    for (double d : sup_distances)
        if (d >= threshold) ++est.exceedances;
    const double n = est.replicas;
    const double p = est.exceedances / n;
    est.estimate = p;
    const double z = 1.959963984540054;  // 95% two-sided
    const double z2 = z * z;
    const double denom = 1.0 + z2 / n;
    const double center = (p + z2 / (2.0 * n)) / denom;
    const double half =
        z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    est.ci_low = est.exceedances == 0 ? 0.0 : std::max(0.0, center - half);
    est.ci_high =
        est.exceedances == est.replicas ? 1.0 : std::min(1.0, center + half);
    return est;
}

WeightedPointSet WeightedPointSet::uniform(std::vector<Vec2> pts) {
    WeightedPointSet set;
    const double w = pts.empty() ? 0.0 : 1.0 / static_cast<double>(pts.size());
    set.weights.assign(pts.size(), w);
    set.points = std::move(pts);
    return set;
}

double WeightedPointSet::total_mass() const {
    double sum = 0.0;
    for (double w : weights) sum += w;
    return sum;
}

double wasserstein1(const WeightedPointSet& mu, const WeightedPointSet& nu) {
    if (mu.points.size() != mu.weights.size() ||
        nu.points.size() != nu.weights.size())
        throw std::invalid_argument("wasserstein1: malformed point set");
    if (mu.points.empty() || nu.points.empty())
        throw std::invalid_argument("wasserstein1: empty measure");
    if (mu.points.size() + nu.points.size() > 4096)
        throw std::invalid_argument(
            "wasserstein1: combined support exceeds the exact-solver budget");
    const double mass_gap = std::abs(mu.total_mass() - nu.total_mass());
    if (mass_gap > 1e-9 * std::max(1.0, mu.total_mass()))
        throw std::invalid_argument("wasserstein1: unequal total masses");

    const int n = static_cast<int>(mu.points.size());
    const int m = static_cast<int>(nu.points.size());
    std::vector<double> cost(static_cast<std::size_t>(n) * m);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < m; ++j)
            cost[static_cast<std::size_t>(i) * m + j] =
                (mu.points[i] - nu.points[j]).norm_inf();
    return min_cost_transport(cost, n, m, mu.weights, nu.weights);
}

std::vector<Vec2> draw_from_field(const DensityField& field, int m,
                                  const NoisePlan& noise,
                                  std::uint64_t draw_block) {
    const std::size_t cells = field.rho.size();
    std::vector<double> cdf(cells);
    double acc = 0.0;
    for (std::size_t i = 0; i < cells; ++i) {
        acc += std::max(0.0, field.rho[i]);
        cdf[i] = acc;
    }
    if (!(acc > 0.0))
        throw std::invalid_argument("draw_from_field: empty density");
    const double cell = field.cell_size();

    std::vector<Vec2> out(static_cast<std::size_t>(m));
    for (int k = 0; k < m; ++k) {
        double u_cell, u_x, u_y, spare;
        noise.uniform_pair(static_cast<std::uint32_t>(k), 2 * draw_block,
                           NoiseStream::FieldSample, u_cell, u_x);
        noise.uniform_pair(static_cast<std::uint32_t>(k), 2 * draw_block + 1,
                           NoiseStream::FieldSample, u_y, spare);
        const double target = u_cell * acc;
        const auto it = std::upper_bound(cdf.begin(), cdf.end(), target);
        std::size_t idx = static_cast<std::size_t>(it - cdf.begin());
        if (idx >= cells) idx = cells - 1;
        const int ix = static_cast<int>(idx) % field.grid_n;
        const int iy = static_cast<int>(idx) / field.grid_n;
        out[k] = {field.cell_x(ix) + (u_x - 0.5) * cell,
                  field.cell_y(iy) + (u_y - 0.5) * cell};
    }
    return out;
}

std::vector<Vec2> subsample_positions(const ParticleEnsemble& ensemble, int m,
                                      const NoisePlan& noise,
                                      std::uint64_t draw_block) {
    const int n = ensemble.n();
    if (m > n)
        throw std::invalid_argument("subsample_positions: m exceeds ensemble");
    std::vector<std::uint32_t> order(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) order[i] = static_cast<std::uint32_t>(i);
    for (int i = 0; i < m; ++i) {
        double u1, u2;
        noise.uniform_pair(static_cast<std::uint32_t>(i), draw_block,
                           NoiseStream::Subsample, u1, u2);
        const int j = i + static_cast<int>(u1 * (n - i));
        std::swap(order[i], order[std::min(j, n - 1)]);
    }
    std::vector<Vec2> out(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) out[i] = ensemble.positions[order[i]];
    return out;
}

namespace {

MarginalW1 summarize(std::vector<double> values) {
    MarginalW1 result;
    result.values = std::move(values);
    double lo = result.values.front(), hi = lo, sum = 0.0;
    for (double v : result.values) {
        sum += v;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    result.mean = sum / static_cast<double>(result.values.size());
    result.spread = hi - lo;
    return result;
}

} // namespace

MarginalW1 marginal_w1(const ParticleEnsemble& ensemble,
                       const DensityField& field, int m,
                       const NoisePlan& noise, int repeats) {
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(repeats));
    for (int r = 0; r < repeats; ++r) {
        const auto cloud = subsample_positions(ensemble, m, noise,
                                               static_cast<std::uint64_t>(r));
        const auto draws = draw_from_field(field, m, noise,
                                           static_cast<std::uint64_t>(r));
        values.push_back(wasserstein1(WeightedPointSet::uniform(cloud),
                                      WeightedPointSet::uniform(draws)));
    }
    return summarize(std::move(values));
}

MarginalW1 marginal_w1_control(const DensityField& field, int m,
                               const NoisePlan& noise, int repeats) {
    std::vector<double> values;
    values.reserve(static_cast<std::size_t>(repeats));
    for (int r = 0; r < repeats; ++r) {
        // Disjoint draw blocks keep the two clouds independent.
        const auto a = draw_from_field(field, m, noise,
                                       static_cast<std::uint64_t>(1000 + 2 * r));
        const auto b = draw_from_field(field, m, noise,
                                       static_cast<std::uint64_t>(1001 + 2 * r));
        values.push_back(wasserstein1(WeightedPointSet::uniform(a),
                                      WeightedPointSet::uniform(b)));
    }
    return summarize(std::move(values));
}

LolnProbe::LolnProbe(const DensityField& field, const CutoffSpec& spec,
                     double chi, std::optional<double> nu2)
    : field_(field), spec_(spec), chi_(chi), nu2_(nu2) {
    if (!field.has_force)
        throw std::invalid_argument("LolnProbe: field force cache missing");
    const double L = field.box_half_width;
    const int n = field.grid_n;
    {
        PlanarConvolver conv(L, n, [&](Vec2 d) {
            return lipschitz_majorant(d, spec_);
        });
        conv.apply(field.rho, lbar_);
        for (auto& v : lbar_) v *= chi_;
    }
    CutoffSpec wide = spec_;
    if (nu2_) {
        if (!(*nu2_ < spec_.nu))
            throw std::invalid_argument("LolnProbe: nu2 must be below nu");
        wide.nu = *nu2_;
        PlanarConvolver conv(L, n, [&](Vec2 d) {
            return lipschitz_majorant(d, wide);
        });
        conv.apply(field.rho, l2bar_);
        for (auto& v : l2bar_) v *= chi_;
        PlanarConvolver conv_x(L, n, [&](Vec2 d) {
            return force(d, spec_).x - force(d, wide).x;
        });
        PlanarConvolver conv_y(L, n, [&](Vec2 d) {
            return force(d, spec_).y - force(d, wide).y;
        });
        conv_x.apply(field.rho, k1bar_x_);
        conv_y.apply(field.rho, k1bar_y_);
    }
}

double LolnProbe::bilinear_scalar(const std::vector<double>& g, Vec2 p) const {
    const double L = field_.box_half_width;
    const int n = field_.grid_n;
    const double cell = field_.cell_size();
    const double ux = std::clamp((p.x + L) / cell - 0.5, 0.0, n - 1.0);
    const double uy = std::clamp((p.y + L) / cell - 0.5, 0.0, n - 1.0);
    int ix = std::min(static_cast<int>(ux), n - 2);
    int iy = std::min(static_cast<int>(uy), n - 2);
    const double tx = ux - ix, ty = uy - iy;
    const std::size_t i00 = static_cast<std::size_t>(iy) * n + ix;
    return (1 - tx) * (1 - ty) * g[i00] + tx * (1 - ty) * g[i00 + 1] +
           (1 - tx) * ty * g[i00 + n] + tx * ty * g[i00 + n + 1];
}

Vec2 LolnProbe::bilinear(const std::vector<double>& gx,
                         const std::vector<double>& gy, Vec2 p) const {
    return {bilinear_scalar(gx, p), bilinear_scalar(gy, p)};
}

LolnStatistic LolnProbe::statistic(const ParticleEnsemble& ensemble) const {
    LolnStatistic stat;
    stat.has_split = nu2_.has_value();
    const auto& pos = ensemble.positions;
    const std::size_t n = pos.size();
    if (n <= 1) return stat;  // no j != i terms; deviations are zero

    std::vector<Vec2> forces(n);
    ensemble_forces(pos, chi_, spec_, forces);
    std::vector<double> majorants(n);
    ensemble_lipschitz(pos, chi_, spec_, majorants);

    std::vector<Vec2> k1(n);
    std::vector<double> l2(n);
    if (nu2_) {
        ensemble_split_k1(pos, chi_, spec_, *nu2_, k1);
        CutoffSpec wide = spec_;
        wide.nu = *nu2_;
        ensemble_lipschitz(pos, chi_, wide, l2);
    }

    for (std::size_t i = 0; i < n; ++i) {
        // Kbar = -chi (k * rho)(Y_i); the field caches k * rho.
        const Vec2 kbar =
            -chi_ * bilinear(field_.force_x, field_.force_y, pos[i]);
        stat.k_deviation =
            std::max(stat.k_deviation, (forces[i] - kbar).norm_inf());
        const double lbar = bilinear_scalar(lbar_, pos[i]);
        stat.l_deviation =
            std::max(stat.l_deviation, std::abs(majorants[i] - lbar));
        if (nu2_) {
            const double l2bar = bilinear_scalar(l2bar_, pos[i]);
            stat.l2_deviation =
                std::max(stat.l2_deviation, std::abs(l2[i] - l2bar));
            const Vec2 k1bar = -chi_ * bilinear(k1bar_x_, k1bar_y_, pos[i]);
            stat.k1_deviation =
                std::max(stat.k1_deviation, (k1[i] - k1bar).norm_inf());
        }
    }
    return stat;
}

ExceptionalSetFrequencies
exceptional_set_frequencies(const std::vector<LolnStatistic>& stats, double n,
                            double alpha, double constant) {
    ExceptionalSetFrequencies freq;
    if (stats.empty()) return freq;
    const double delta = 0.5 * (0.5 - alpha);
    const double k_threshold = std::pow(n, -(alpha + delta));
    for (const auto& s : stats) {
        if (s.k_deviation >= k_threshold) freq.k_exceed += 1.0;
        if (s.l_deviation >= constant) freq.l_exceed += 1.0;
        if (s.l2_deviation >= constant) freq.l2_exceed += 1.0;
        if (s.k1_deviation >= k_threshold) freq.k1_exceed += 1.0;
    }
    freq.samples = static_cast<int>(stats.size());
    freq.k_exceed /= freq.samples;
    freq.l_exceed /= freq.samples;
    freq.l2_exceed /= freq.samples;
    freq.k1_exceed /= freq.samples;
    return freq;
}

double JSchedule::c_n() const { return 18.0 * std::pow(std::log(n), 0.75); }

double JSchedule::f(double t) const {
    const double ln = std::log(n);
    return std::max(4.0 / (t * ln + std::pow(ln, -0.25)), 1.0);
}

double JSchedule::f_ceiling() const {
    return 4.0 * std::pow(std::log(n), 0.25);
}

void JSchedule::validate() const {
    if (!(n > 1.0))
        throw std::invalid_argument("JSchedule: N must exceed 1");
    if (!(alpha > 0.0 && alpha < 0.5))
        throw std::invalid_argument("JSchedule: alpha must lie in (0, 1/2)");
}

JSeries j_process(const RunRecord& record, const JSchedule& schedule,
                  double T) {
    schedule.validate();
    if (record.z_times.empty())
        throw std::invalid_argument("j_process: record carries no Z samples");
    const double n_alpha = std::pow(schedule.n, schedule.alpha);
    const double n_delta = std::pow(schedule.n, -schedule.delta());
    const double cn = schedule.c_n();

    JSeries series;
    series.times = record.z_times;
    series.values.resize(series.times.size());
    double running = 0.0;
    for (std::size_t si = 0; si < series.times.size(); ++si) {
        const double s = record.z_times[si];
        double inner = 0.0;
        for (std::size_t ti = 0; ti <= si; ++ti) {
            const double d = record.z_dist[si][ti];
            if (std::isnan(d)) continue;  // outside the tau budget
            const double gap = s - record.z_times[ti];
            const double a = n_alpha * schedule.f(gap) * d + n_delta;
            inner = std::max(inner, a);
        }
        running = std::max(running, std::exp(cn * (T - s)) * inner);
        series.values[si] = std::min(1.0, running);
    }
    return series;
}

HeatKernelNorms heat_kernel_norms(double t, double p) {
    if (!(t > 0.0)) throw std::invalid_argument("heat_kernel_norms: t > 0");
    if (!(p >= 1.0)) throw std::invalid_argument("heat_kernel_norms: p >= 1");
    HeatKernelNorms norms;
    if (std::isinf(p)) {
        norms.g_norm = 1.0 / (two_pi * t);
        norms.grad_norm = std::exp(-0.5) / (two_pi * std::pow(t, 1.5));
        return norms;
    }
    // ||G||_p = (2 pi t)^(1/p - 1) p^(-1/p).
    norms.g_norm = std::pow(two_pi * t, 1.0 / p - 1.0) * std::pow(p, -1.0 / p);
    // ||grad G||_p via the radial Gaussian moment:
    // (2 pi t^2)^-1 [2 pi Gamma(p/2 + 1) / (2 a^(p/2 + 1))]^(1/p), a = p/(2t).
    const double a = p / (2.0 * t);
    const double moment =
        two_pi * std::tgamma(0.5 * p + 1.0) / (2.0 * std::pow(a, 0.5 * p + 1.0));
    norms.grad_norm = std::pow(moment, 1.0 / p) / (two_pi * t * t);
    return norms;
}

double shifted_heat_kernel_l1(double t, double d) {
    if (!(t > 0.0)) throw std::invalid_argument("shifted kernel: t > 0");
    // The displacement separates along one axis; the transverse factor
    // integrates to 1 and the axial difference integrates to 2 erf(.).
    return 2.0 * std::erf(d / std::sqrt(8.0 * t));
}

} // namespace ksmf
