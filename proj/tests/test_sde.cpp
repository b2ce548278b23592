#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <omp.h>

#include "ksmf/sde.hpp"

using namespace ksmf;
using doctest::Approx;

namespace {

InitialDensitySpec unit_gaussian() {
    return InitialDensitySpec::gaussian({0.0, 0.0}, 1.0);
}

// Single-snapshot sequence with a constant force value everywhere on the
// grid (cell-center hull); far-field queries still fall back to the
// monopole, so keep test points inside.
FieldSequence constant_field(double L, int n, double chi, Vec2 value) {
    DensityField field;
    field.box_half_width = L;
    field.grid_n = n;
    field.time = 0.0;
    field.rho.assign(static_cast<std::size_t>(n) * n, 0.0);
    field.force_x.assign(field.rho.size(), value.x);
    field.force_y.assign(field.rho.size(), value.y);
    field.has_force = true;
    FieldSequence seq(L, n, chi);
    seq.append(field);
    return seq;
}

} // namespace

TEST_CASE("sample_initial: gaussian second moment within 3 SE") {
    const NoisePlan plan(101, 1e-3, 0);
    const double sigma = 1.3;
    const int n = 10000;
    const auto ens =
        sample_initial(InitialDensitySpec::gaussian({0, 0}, sigma), n, plan);
    const double m2 = ens.mean_sq_radius();
    const double expected = 2.0 * sigma * sigma;
    const double se = expected / std::sqrt(static_cast<double>(n));
    CHECK(std::abs(m2 - expected) < 3.0 * se);
}

TEST_CASE("sample_initial: disc mean within 3 SE and support respected") {
    const NoisePlan plan(102, 1e-3, 0);
    const double R = 2.0;
    const int n = 10000;
    const auto ens =
        sample_initial(InitialDensitySpec::uniform_disc({0, 0}, R), n, plan);
    Vec2 mean{};
    for (const Vec2& p : ens.positions) {
        mean += (1.0 / n) * p;
        CHECK(p.norm() <= R * (1.0 + 1e-12));
    }
    const double se = R / (2.0 * std::sqrt(static_cast<double>(n)));
    CHECK(std::abs(mean.x) < 3.0 * se);
    CHECK(std::abs(mean.y) < 3.0 * se);
}

TEST_CASE("sample_initial: mixture lands on its components") {
    const auto spec = InitialDensitySpec::mixture(
        {{{-5.0, 0.0}, 0.2, 0.5}, {{5.0, 0.0}, 0.2, 0.5}});
    const NoisePlan plan(103, 1e-3, 0);
    const auto ens = sample_initial(spec, 4000, plan);
    int left = 0;
    for (const Vec2& p : ens.positions) {
        CHECK(std::abs(std::abs(p.x) - 5.0) < 2.0);
        if (p.x < 0) ++left;
    }
    CHECK(left > 1800);
    CHECK(left < 2200);
    CHECK(spec.second_moment() == Approx(25.0 + 2 * 0.04).epsilon(1e-12));
}

TEST_CASE("sample_initial is deterministic per seed") {
    const NoisePlan plan(7, 1e-3, 3);
    const auto a = sample_initial(unit_gaussian(), 512, plan);
    const auto b = sample_initial(unit_gaussian(), 512, plan);
    REQUIRE(a.positions.size() == b.positions.size());
    for (std::size_t i = 0; i < a.positions.size(); ++i)
        CHECK(a.positions[i] == b.positions[i]);
    const NoisePlan other(8, 1e-3, 3);
    const auto c = sample_initial(unit_gaussian(), 512, other);
    CHECK(a.positions[0].x != c.positions[0].x);
}

TEST_CASE("step_real: chi=0 increment variance is 2h per coordinate") {
    const auto spec = CutoffSpec::for_particles(0.25, 1000);
    const double h = 1e-3;
    const NoisePlan plan(104, h, 0);
    auto ens = sample_initial(unit_gaussian(), 1000, plan);
    auto prev = ens.positions;
    double sum2 = 0.0;
    const int steps = 100;
    for (int k = 0; k < steps; ++k) {
        step_real(ens, 0.0, spec, plan, static_cast<std::uint64_t>(k));
        for (std::size_t i = 0; i < ens.positions.size(); ++i) {
            const Vec2 d = ens.positions[i] - prev[i];
            sum2 += d.x * d.x + d.y * d.y;
        }
        prev = ens.positions;
    }
    const double samples = 2.0 * steps * 1000;
    const double var = sum2 / samples;
    const double se = 2.0 * h * std::sqrt(2.0 / samples);
    CHECK(std::abs(var - 2.0 * h) < 3.0 * se);
}

TEST_CASE("step_real: two-body drift matches the Coulomb ODE step") {
    const auto spec = CutoffSpec::with_rate(10.0, 2);
    const double chi = 4.0 * M_PI;
    const double h = 1e-3;
    const NoisePlan plan = NoisePlan::zeroed(h);
    ParticleEnsemble ens;
    ens.positions = {{0.0, 0.0}, {1.0, 0.0}};
    step_real(ens, chi, spec, plan, 0);
    // K_1 = (1, 0) and K_2 = (-1, 0) from the kernel's two-body example.
    CHECK(ens.positions[0].x == Approx(h).epsilon(1e-13));
    CHECK(ens.positions[0].y == 0.0);
    CHECK(ens.positions[1].x == Approx(1.0 - h).epsilon(1e-13));
    CHECK(ens.time == Approx(h));
}

TEST_CASE("step with h=0 is the identity") {
    const auto spec = CutoffSpec::with_rate(5.0, 3);
    const NoisePlan plan(105, 0.0, 0);
    ParticleEnsemble ens;
    ens.positions = {{0.4, -0.7}, {1.0, 0.2}, {-0.3, 0.9}};
    auto before = ens.positions;
    step_real(ens, 2.0, spec, plan, 0);
    for (std::size_t i = 0; i < before.size(); ++i)
        CHECK(ens.positions[i] == before[i]);
}

TEST_CASE("step_meanfield: zero field and zero noise is the identity") {
    const NoisePlan plan = NoisePlan::zeroed(1e-2);
    ParticleEnsemble ens;
    ens.positions = {{1.0, 2.0}, {-0.5, 0.25}};
    const auto before = ens.positions;
    step_meanfield(ens, nullptr, plan, 0);
    for (std::size_t i = 0; i < before.size(); ++i)
        CHECK(ens.positions[i] == before[i]);

    const auto seq = constant_field(10.0, 32, 3.0, {0.0, 0.0});
    ParticleEnsemble ens2;
    ens2.positions = before;
    step_meanfield(ens2, &seq, plan, 0);
    for (std::size_t i = 0; i < before.size(); ++i)
        CHECK(ens2.positions[i] == before[i]);
}

TEST_CASE("step_meanfield consumes the same noise as step_real") {
    const auto spec = CutoffSpec::with_rate(4.0, 64);
    const NoisePlan plan(106, 1e-3, 2);
    auto x = sample_initial(unit_gaussian(), 64, plan);
    auto y = x;
    for (int k = 0; k < 50; ++k) {
        step_real(x, 0.0, spec, plan, static_cast<std::uint64_t>(k));
        step_meanfield(y, nullptr, plan, static_cast<std::uint64_t>(k));
    }
    for (std::size_t i = 0; i < x.positions.size(); ++i)
        CHECK((x.positions[i] - y.positions[i]).norm_inf() == 0.0);
}

TEST_CASE("step_meanfield applies the interpolated drift") {
    const Vec2 fvalue{0.25, -0.5};
    const double chi = 2.0;
    const auto seq = constant_field(10.0, 32, chi, fvalue);
    const double h = 1e-2;
    const NoisePlan plan = NoisePlan::zeroed(h);
    ParticleEnsemble ens;
    ens.positions = {{0.0, 0.0}, {1.0, 1.0}};
    step_meanfield(ens, &seq, plan, 0);
    CHECK(ens.positions[0].x == Approx(-chi * fvalue.x * h).epsilon(1e-12));
    CHECK(ens.positions[0].y == Approx(-chi * fvalue.y * h).epsilon(1e-12));
}

TEST_CASE("spawn_intermediate: birth-time rules") {
    CoupledState state;
    state.x.positions = {{0.1, 0.2}};
    state.x.time = 0.5;
    CHECK_THROWS_AS(spawn_intermediate(state, 0.4), std::invalid_argument);
    spawn_intermediate(state, 0.5);
    CHECK(state.zs.size() == 1);
    CHECK(state.zs[0].z.positions[0] == state.x.positions[0]);
    CHECK_THROWS_AS(spawn_intermediate(state, 0.5), std::invalid_argument);
}

TEST_CASE("Z spawned at 0 shadows Y bitwise; twins stay equal") {
    const auto seq = constant_field(10.0, 32, 1.5, {0.1, -0.2});
    const double h = 1e-3;
    const NoisePlan plan(107, h, 0);
    CoupledState state;
    state.x = sample_initial(unit_gaussian(), 32, plan);
    state.y = state.x;
    spawn_intermediate(state, 0.0);
    CHECK(state.zs.size() == 1);

    auto twin = state.zs[0].z;  // second process from the same state
    for (int k = 0; k < 100; ++k) {
        step_meanfield(state.y, &seq, plan, static_cast<std::uint64_t>(k));
        step_meanfield(state.zs[0].z, &seq, plan, static_cast<std::uint64_t>(k));
        step_meanfield(twin, &seq, plan, static_cast<std::uint64_t>(k));
    }
    for (std::size_t i = 0; i < state.y.positions.size(); ++i) {
        CHECK(state.y.positions[i] == state.zs[0].z.positions[i]);
        CHECK(twin.positions[i] == state.zs[0].z.positions[i]);
    }
}

TEST_CASE("deterministic second-moment drift identity off cutoff") {
    // Ring configuration: every pairwise distance clears the Coulomb radius,
    // so x . k(x) = 1/(2 pi) for each pair and one drift-only step moves
    // (1/N) sum |X_i|^2 by h (-chi (N-1) / (2 pi N)) + h^2 (1/N) sum |K_i|^2.
    const int n = 16;
    const auto spec = CutoffSpec::with_rate(1.0, n);
    const double chi = 4.0 * M_PI;
    const double h = 1e-3;
    ParticleEnsemble ens;
    for (int i = 0; i < n; ++i) {
        const double a = two_pi * i / n;
        ens.positions.push_back({10.0 * std::cos(a), 10.0 * std::sin(a)});
    }
    const double m2_before = ens.mean_sq_radius();
    std::vector<Vec2> forces(n);
    ensemble_forces(ens.positions, chi, spec, forces);
    double k2sum = 0.0;
    for (const Vec2& f : forces) k2sum += f.norm2();

    const NoisePlan plan = NoisePlan::zeroed(h);
    step_real(ens, chi, spec, plan, 0);
    const double m2_after = ens.mean_sq_radius();
    const double drift_term = m2_after - m2_before - h * h * k2sum / n;
    const double expected = -h * chi * (n - 1) / (two_pi * n);
    CHECK(drift_term == Approx(expected).epsilon(1e-10));
}

TEST_CASE("run_coupled: T=0 gives a single zero row") {
    CoupledRunConfig config;
    config.n = 16;
    config.chi = 0.0;
    config.spec = CutoffSpec::for_particles(0.25, 16);
    config.horizon = 0.0;
    config.step = 1e-3;
    config.init = unit_gaussian();
    config.seed = 41;
    const auto record = run_coupled(config);
    REQUIRE(record.times.size() == 1);
    CHECK(record.sup_dist[0] == 0.0);
    CHECK_FALSE(record.failed);
}

TEST_CASE("run_coupled: chi=0 coupling is exactly null") {
    CoupledRunConfig config;
    config.n = 128;
    config.chi = 0.0;
    config.spec = CutoffSpec::for_particles(0.3, 128);
    config.horizon = 0.05;
    config.step = 1e-3;
    config.init = unit_gaussian();
    config.seed = 42;
    const auto record = run_coupled(config);
    REQUIRE_FALSE(record.failed);
    for (double d : record.sup_dist) CHECK(d == 0.0);
    for (double d : record.inst_dist) CHECK(d == 0.0);
    // Running sup never decreases.
    for (std::size_t i = 1; i < record.sup_dist.size(); ++i)
        CHECK(record.sup_dist[i] >= record.sup_dist[i - 1]);
}

TEST_CASE("run_coupled is bitwise reproducible across thread counts") {
    CoupledRunConfig config;
    config.n = 48;
    config.chi = 2.0 * M_PI;
    config.spec = CutoffSpec::for_particles(0.25, 48);
    config.horizon = 0.02;
    config.step = 1e-3;
    config.init = unit_gaussian();
    config.seed = 43;
    // chi > 0 with a stored field: use a constant field snapshot.
    const auto seq = constant_field(12.0, 32, config.chi, {0.05, 0.02});
    config.fields = &seq;

    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    const auto a = run_coupled(config);
    omp_set_num_threads(4);
    const auto b = run_coupled(config);
    omp_set_num_threads(saved);

    REQUIRE(a.times.size() == b.times.size());
    for (std::size_t i = 0; i < a.times.size(); ++i) {
        CHECK(a.sup_dist[i] == b.sup_dist[i]);
        CHECK(a.mean_sq_radius[i] == b.mean_sq_radius[i]);
        CHECK(a.pairs_in_cutoff[i] == b.pairs_in_cutoff[i]);
    }
}

TEST_CASE("weak order sanity: chi=0 second moment grows by 4T") {
    const int n = 250;
    const int replicas = 200;
    const double T = 0.2, h = 2e-3;
    const auto spec = CutoffSpec::for_particles(0.25, n);
    double sum = 0.0, sum2 = 0.0;
    for (int r = 0; r < replicas; ++r) {
        CoupledRunConfig config;
        config.n = n;
        config.chi = 0.0;
        config.spec = spec;
        config.horizon = T;
        config.step = h;
        config.init = unit_gaussian();
        config.seed = derive_seed(5000, 0, static_cast<std::uint64_t>(r));
        config.replica = static_cast<std::uint32_t>(r);
        const auto record = run_particles(config);
        REQUIRE_FALSE(record.failed);
        const double terminal = record.mean_sq_radius.back();
        sum += terminal;
        sum2 += terminal * terminal;
    }
    const double mean = sum / replicas;
    const double var = sum2 / replicas - mean * mean;
    const double se = std::sqrt(var / replicas);
    const double expected = 2.0 + 4.0 * T;  // m2(0) = 2 sigma^2 = 2
    CHECK(std::abs(mean - expected) < 3.0 * se);
}

TEST_CASE("diagnostic grid shape") {
    const auto grid = make_diagnostic_grid(0.5, 1e-3, 32);
    REQUIRE(grid.size() >= 3);
    CHECK(grid.size() <= 33);
    CHECK(grid.front() == 0.0);
    CHECK(grid.back() == Approx(0.5));
    for (std::size_t i = 1; i < grid.size(); ++i) CHECK(grid[i] > grid[i - 1]);
}

TEST_CASE("run_coupled records Z diagnostics with exact endpoints") {
    CoupledRunConfig config;
    config.n = 32;
    config.chi = 0.0;
    config.spec = CutoffSpec::for_particles(0.25, 32);
    config.horizon = 0.05;
    config.step = 1e-3;
    config.init = unit_gaussian();
    config.seed = 44;
    config.with_intermediates = true;
    config.z_grid_points = 8;
    const auto record = run_coupled(config);
    REQUIRE_FALSE(record.failed);
    REQUIRE_FALSE(record.z_times.empty());
    REQUIRE(record.z_dist.size() == record.z_times.size());
    for (std::size_t si = 0; si < record.z_dist.size(); ++si) {
        REQUIRE(record.z_dist[si].size() == si + 1);
        // Diagonal tau = s: Z_{s,s} = X_s exactly.
        CHECK(record.z_dist[si][si] == 0.0);
        // chi = 0: every Z coincides with X (all drifts vanish); entries
        // outside the tau budget are NaN markers.
        for (double d : record.z_dist[si])
            if (!std::isnan(d)) CHECK(d == 0.0);
    }
}

TEST_CASE("default step size honors the cutoff cap") {
    CHECK(default_step_size(CutoffSpec::for_particles(0.25, 4096)) ==
          Approx(1e-3));
    const auto tight = CutoffSpec::with_rate(100.0);
    CHECK(default_step_size(tight) == Approx(0.1 / 1e4));
}
