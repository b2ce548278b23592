#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

#include "ksmf/noise.hpp"

using namespace ksmf;

TEST_CASE("philox4x32-10 known-answer vectors") {
    // Reference vectors from the Random123 distribution (kat_vectors).
    auto b = Philox4x32::run(0, 0, 0, 0, 0, 0);
    CHECK(b.v[0] == 0x6627e8d5u);
    CHECK(b.v[1] == 0xe169c58du);
    CHECK(b.v[2] == 0xbc57ac4cu);
    CHECK(b.v[3] == 0x9b00dbd8u);

    b = Philox4x32::run(0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu,
                        0xffffffffu, 0xffffffffu);
    CHECK(b.v[0] == 0x408f276du);
    CHECK(b.v[1] == 0x41c83b0eu);
    CHECK(b.v[2] == 0xa20bc7c6u);
    CHECK(b.v[3] == 0x6d5451fdu);

    b = Philox4x32::run(0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u,
                        0xa4093822u, 0x299f31d0u);
    CHECK(b.v[0] == 0xd16cfe09u);
    CHECK(b.v[1] == 0x94fdccebu);
    CHECK(b.v[2] == 0x5001e420u);
    CHECK(b.v[3] == 0x24126ea1u);
}

TEST_CASE("identical addresses replay identical increments") {
    const NoisePlan plan(42, 1e-3, 7);
    const Vec2 a = plan.increment(13, 999);
    const Vec2 b = plan.increment(13, 999);
    CHECK(a.x == b.x);
    CHECK(a.y == b.y);

    // Out-of-order evaluation does not matter.
    const Vec2 later = plan.increment(13, 1000);
    const Vec2 again = plan.increment(13, 999);
    CHECK(again.x == a.x);
    CHECK(later.x != a.x);
}

TEST_CASE("distinct addresses decorrelate") {
    const NoisePlan plan(42, 1e-3, 0);
    std::set<std::uint64_t> seen;
    for (std::uint32_t p = 0; p < 64; ++p) {
        for (std::uint64_t s = 0; s < 64; ++s) {
            const Vec2 z = plan.normal_pair(p, s);
            std::uint64_t bits;
            static_assert(sizeof bits == sizeof z.x);
            std::memcpy(&bits, &z.x, sizeof bits);
            seen.insert(bits);
        }
    }
    CHECK(seen.size() == 64 * 64);
}

TEST_CASE("replica and seed change the stream") {
    const NoisePlan a(42, 1e-3, 0);
    const NoisePlan b(42, 1e-3, 1);
    const NoisePlan c(43, 1e-3, 0);
    CHECK(a.normal_pair(0, 0).x != b.normal_pair(0, 0).x);
    CHECK(a.normal_pair(0, 0).x != c.normal_pair(0, 0).x);
}

TEST_CASE("increments are N(0, 2h) per coordinate") {
    const double h = 1e-3;
    const NoisePlan plan(1234, h, 0);
    const std::size_t samples = 200000;
    double sum = 0.0, sum2 = 0.0;
    for (std::size_t i = 0; i < samples; ++i) {
        const Vec2 d = plan.increment(static_cast<std::uint32_t>(i % 1024),
                                      i / 1024);
        sum += d.x + d.y;
        sum2 += d.x * d.x + d.y * d.y;
    }
    const double n = 2.0 * samples;
    const double mean = sum / n;
    const double var = sum2 / n - mean * mean;
    // var(xi^2) = 2 (2h)^2 for Gaussian, so SE(var-hat) = 2h sqrt(2/n).
    const double se_var = 2.0 * h * std::sqrt(2.0 / n);
    CHECK(std::abs(var - 2.0 * h) < 3.0 * se_var);
    CHECK(std::abs(mean) < 3.0 * std::sqrt(2.0 * h / n));
}

TEST_CASE("zeroed plan yields exactly zero increments") {
    const NoisePlan plan = NoisePlan::zeroed(1e-3);
    CHECK(plan.is_zeroed());
    const Vec2 d = plan.increment(5, 17);
    CHECK(d.x == 0.0);
    CHECK(d.y == 0.0);
}

TEST_CASE("derive_seed is stable and spreads") {
    CHECK(derive_seed(1, 2, 3) == derive_seed(1, 2, 3));
    CHECK(derive_seed(1, 2, 3) != derive_seed(1, 2, 4));
    CHECK(derive_seed(1, 2, 3) != derive_seed(1, 3, 3));
    CHECK(derive_seed(1, 2, 3) != derive_seed(2, 2, 3));
}
