#include "ksmf/sde.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ksmf {

double default_step_size(const CutoffSpec& spec) {
    return std::min(1e-3, 0.1 / (spec.nu * spec.nu));
}

namespace {

void check_finite(const ParticleEnsemble& ens, const char* label) {
    if (!ens.finite()) {
        std::ostringstream msg;
        msg << label << ": non-finite position at t = " << ens.time
            << "; step size too large for the current cutoff rate";
        throw ReplicaFailure(msg.str());
    }
}

} // namespace

void step_real(ParticleEnsemble& ens, double chi, const CutoffSpec& spec,
               const NoisePlan& noise, std::uint64_t step_index) {
    const double h = noise.step();
    std::vector<Vec2> forces(ens.positions.size());
    ensemble_forces(ens.positions, chi, spec, forces);
    for (std::size_t i = 0; i < ens.positions.size(); ++i) {
        const Vec2 xi = noise.increment(static_cast<std::uint32_t>(i), step_index);
        ens.positions[i] += h * forces[i] + xi;
    }
    ens.time += h;
    check_finite(ens, "step_real");
}

void step_meanfield(ParticleEnsemble& ens, const FieldSequence* fields,
                    const NoisePlan& noise, std::uint64_t step_index) {
    const double h = noise.step();
    const double t = ens.time;
    for (std::size_t i = 0; i < ens.positions.size(); ++i) {
        const Vec2 drift =
            fields ? fields->drift_at(ens.positions[i], t) : Vec2{};
        const Vec2 xi = noise.increment(static_cast<std::uint32_t>(i), step_index);
        ens.positions[i] += h * drift + xi;
    }
    ens.time += h;
    check_finite(ens, "step_meanfield");
}

void spawn_intermediate(CoupledState& state, double s) {
    if (s != state.x.time)
        throw std::invalid_argument(
            "spawn_intermediate: birth time must equal the current clock");
    for (const auto& z : state.zs)
        if (z.birth == s)
            throw std::invalid_argument(
                "spawn_intermediate: duplicate birth time");
    state.zs.push_back({s, state.x});
}

std::int64_t count_close_pairs(std::span<const Vec2> positions,
                               const CutoffSpec& spec) {
    const double r2_out = spec.outer_radius() * spec.outer_radius();
    const std::int64_t n = static_cast<std::int64_t>(positions.size());
    std::int64_t close = 0;
#pragma omp parallel for schedule(static) reduction(+ : close)
    for (std::int64_t i = 0; i < n; ++i)
        for (std::int64_t j = i + 1; j < n; ++j)
            if ((positions[i] - positions[j]).norm2() < r2_out) ++close;
    return close;
}

std::vector<double> make_diagnostic_grid(double horizon, double step,
                                         int max_points) {
    std::vector<std::int64_t> steps;
    const std::int64_t total = std::llround(horizon / step);
    steps.push_back(0);
    if (total > 0) {
        // Geometric ladder of step indices from 1 to the final step.
        const int levels = std::max(1, max_points - 3);
        for (int k = 0; k <= levels; ++k) {
            const double frac =
                std::pow(static_cast<double>(total), k / static_cast<double>(levels));
            steps.push_back(std::llround(frac));
        }
        steps.push_back(total);
    }
    std::sort(steps.begin(), steps.end());
    steps.erase(std::unique(steps.begin(), steps.end()), steps.end());
    std::vector<double> times;
    times.reserve(steps.size());
    for (std::int64_t s : steps) times.push_back(s * step);
    return times;
}

namespace {

double sup_inf_distance(const ParticleEnsemble& a, const ParticleEnsemble& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.positions.size(); ++i)
        worst = std::max(worst, (a.positions[i] - b.positions[i]).norm_inf());
    return worst;
}

RunRecord run_impl(const CoupledRunConfig& config, bool with_meanfield) {
    config.spec.validate();
    config.init.validate();
    if (config.n < 1) throw std::invalid_argument("run: n must be positive");
    if (!(config.step > 0.0)) throw std::invalid_argument("run: bad step");
    if (with_meanfield && config.chi != 0.0 && config.fields == nullptr)
        throw std::invalid_argument(
            "run_coupled: mean-field drift requires stored force fields");

    RunRecord record;
    record.seed = config.seed;
    record.replica = config.replica;
    record.n = config.n;
    record.chi = config.chi;
    record.alpha = config.spec.alpha;
    record.step = config.step;

    const NoisePlan plan(config.seed, config.step, config.replica);
    const std::int64_t total_steps = std::llround(config.horizon / config.step);
    const bool with_z = config.with_intermediates && with_meanfield;

    CoupledState state;
    state.x = sample_initial(config.init, config.n, plan);
    if (with_meanfield) state.y = state.x;

    // Z diagnostics bookkeeping: grid times snapped to step indices.
    std::vector<std::int64_t> z_steps;
    if (with_z) {
        for (double t : make_diagnostic_grid(config.horizon, config.step,
                                             config.z_grid_points))
            z_steps.push_back(std::llround(t / config.step));
        record.z_times.reserve(z_steps.size());
        for (std::int64_t s : z_steps) record.z_times.push_back(s * config.step);
        record.z_dist.resize(z_steps.size());
    }

    const std::size_t n = state.x.positions.size();
    std::vector<Vec2> forces(n), increments(n);
    double running_sup = 0.0;
    const double h = config.step;

    auto record_z_row = [&](std::size_t si) {
        // |Z_{s,s} - Z_{s,tau}|_inf with Z_{s,s} = X_s. The cost cap keeps
        // at most 16 tau points per s: tau = 0 plus the most recent grid
        // times; skipped pairs are marked NaN.
        auto& row = record.z_dist[si];
        row.assign(si + 1, std::numeric_limits<double>::quiet_NaN());
        row[si] = 0.0;
        if (si == 0) return;
        const std::size_t lo = si > 15 ? si - 15 : 0;
        row[0] = sup_inf_distance(state.x, state.zs[0].z);
        for (std::size_t ti = lo; ti < si; ++ti)
            row[ti] = sup_inf_distance(state.x, state.zs[ti].z);
    };

    try {
        std::size_t z_cursor = 0;
        for (std::int64_t k = 0; k <= total_steps; ++k) {
            const double t = k * h;
            // The force pass also yields the pair count for this row; the
            // final row runs a count-only pass.
            std::int64_t pairs = 0;
            if (k < total_steps)
                ensemble_forces(state.x.positions, config.chi, config.spec,
                                forces, &pairs);
            else
                pairs = count_close_pairs(state.x.positions, config.spec);

            const double inst =
                with_meanfield ? sup_inf_distance(state.x, state.y) : 0.0;
            running_sup = std::max(running_sup, inst);
            record.times.push_back(t);
            record.inst_dist.push_back(inst);
            record.sup_dist.push_back(running_sup);
            record.mean_sq_radius.push_back(state.x.mean_sq_radius());
            record.pairs_in_cutoff.push_back(pairs);

            if (with_z && z_cursor < z_steps.size() && z_steps[z_cursor] == k) {
                record_z_row(z_cursor);
                spawn_intermediate(state, t);
                ++z_cursor;
            }
            if (k == total_steps) break;

            // Shared-noise Euler-Maruyama updates: X, Y and every Z consume
            // the same increments for matching (particle, step) addresses.
            for (std::size_t i = 0; i < n; ++i)
                increments[i] = plan.increment(static_cast<std::uint32_t>(i),
                                               static_cast<std::uint64_t>(k));
            for (std::size_t i = 0; i < n; ++i)
                state.x.positions[i] += h * forces[i] + increments[i];
            state.x.time = (k + 1) * h;
            check_finite(state.x, "run: X");

            if (with_meanfield) {
                const FieldSequence* fields =
                    (config.chi == 0.0) ? nullptr : config.fields;
                auto drift_step = [&](ParticleEnsemble& ens) {
                    const double now = ens.time;
                    for (std::size_t i = 0; i < n; ++i) {
                        const Vec2 drift =
                            fields ? fields->drift_at(ens.positions[i], now)
                                   : Vec2{};
                        ens.positions[i] += h * drift + increments[i];
                    }
                    ens.time = (k + 1) * h;
                    check_finite(ens, "run: mean-field");
                };
                drift_step(state.y);
                for (auto& zp : state.zs) drift_step(zp.z);
            }
        }
    } catch (const ReplicaFailure& failure) {
        record.failed = true;
        record.error = failure.what();
    }
    record.final_positions = state.x.positions;
    return record;
}

} // namespace

RunRecord run_coupled(const CoupledRunConfig& config) {
    return run_impl(config, true);
}

RunRecord run_particles(const CoupledRunConfig& config) {
    return run_impl(config, false);
}

} // namespace ksmf
