#pragma once

#include <cstdint>
#include <cmath>

#include "ksmf/vec2.hpp"

namespace ksmf {

// Philox 4x32-10 block cipher (Salmon et al., SC 2011). Counter-based:
// every 128-bit counter maps to 128 independent random bits under a 64-bit
// key, so draws are addressable and replay in any evaluation order.
struct Philox4x32 {
    static constexpr std::uint32_t kM0 = 0xD2511F53u;
    static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kW0 = 0x9E3779B9u;
    static constexpr std::uint32_t kW1 = 0xBB67AE85u;

    struct Block { std::uint32_t v[4]; };

    static Block run(std::uint32_t c0, std::uint32_t c1, std::uint32_t c2,
                     std::uint32_t c3, std::uint32_t k0, std::uint32_t k1) {
        std::uint32_t x0 = c0, x1 = c1, x2 = c2, x3 = c3;
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * x0;
            const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * x2;
            const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
            const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
            const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
            const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
            x0 = hi1 ^ x1 ^ k0;
            x1 = lo1;
            x2 = hi0 ^ x3 ^ k1;
            x3 = lo0;
            k0 += kW0;
            k1 += kW1;
        }
        return Block{{x0, x1, x2, x3}};
    }
};

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Stream tags keep the draw spaces of different consumers disjoint.
enum class NoiseStream : std::uint32_t {
    BrownianIncrement = 0,
    InitialSample = 1,
    FieldSample = 2,      // grid-density draws (marginal W1, LoLN redraws)
    Subsample = 3,        // particle subsampling for metrics
};

/// Deterministic, replayable Brownian increment source. Draws are addressed
/// by (seed, replica, particle, step, stream); identical addresses yield
/// identical values independent of evaluation order or thread count.
class NoisePlan {
public:
    NoisePlan(std::uint64_t seed, double step, std::uint32_t replica = 0)
        : seed_(seed), step_(step), replica_(replica),
          root_(2.0 * step), amplitude_(1.0) {
        const std::uint64_t k = splitmix64(splitmix64(seed) + replica);
        k0_ = static_cast<std::uint32_t>(k);
        k1_ = static_cast<std::uint32_t>(k >> 32);
    }

    /// Plan whose increments are exactly zero (deterministic drift-only
    /// stepping for tests and debugging).
    static NoisePlan zeroed(double step) {
        NoisePlan plan(0, step, 0);
        plan.amplitude_ = 0.0;
        return plan;
    }

    std::uint64_t seed() const { return seed_; }
    std::uint32_t replica() const { return replica_; }
    double step() const { return step_; }
    bool is_zeroed() const { return amplitude_ == 0.0; }

    /// Two independent standard normals for (particle, step) in a stream.
    Vec2 normal_pair(std::uint32_t particle, std::uint64_t step_index,
                     NoiseStream stream = NoiseStream::BrownianIncrement) const {
        const auto b = block(particle, step_index, stream);
        const double u1 = unit_open(join(b.v[0], b.v[1]));
        const double u2 = unit_half_open(join(b.v[2], b.v[3]));
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = two_pi * u2;
        return {r * std::cos(a), r * std::sin(a)};
    }

    /// Brownian increment sqrt(2 h) * xi for one Euler step.
    Vec2 increment(std::uint32_t particle, std::uint64_t step_index) const {
        if (amplitude_ == 0.0) return {};
        const Vec2 z = normal_pair(particle, step_index);
        const double scale = std::sqrt(root_);
        return {scale * z.x, scale * z.y};
    }

    /// Two uniforms in [0,1): u1 half-open from the top bits, u2 from the rest.
    void uniform_pair(std::uint32_t particle, std::uint64_t step_index,
                      NoiseStream stream, double& u1, double& u2) const {
        const auto b = block(particle, step_index, stream);
        u1 = unit_half_open(join(b.v[0], b.v[1]));
        u2 = unit_half_open(join(b.v[2], b.v[3]));
    }

private:
    Philox4x32::Block block(std::uint32_t particle, std::uint64_t step_index,
                            NoiseStream stream) const {
        return Philox4x32::run(particle,
                               static_cast<std::uint32_t>(step_index),
                               static_cast<std::uint32_t>(step_index >> 32),
                               static_cast<std::uint32_t>(stream), k0_, k1_);
    }

    static std::uint64_t join(std::uint32_t hi, std::uint32_t lo) {
        return (static_cast<std::uint64_t>(hi) << 32) | lo;
    }
    // (0,1]: safe under log.
    static double unit_open(std::uint64_t u) {
        return static_cast<double>((u >> 11) + 1) * 0x1.0p-53;
    }
    // [0,1)
    static double unit_half_open(std::uint64_t u) {
        return static_cast<double>(u >> 11) * 0x1.0p-53;
    }

    std::uint64_t seed_;
    double step_;
    std::uint32_t replica_;
    double root_;
    double amplitude_;
    std::uint32_t k0_ = 0, k1_ = 0;
};

/// Replica seed derivation for sweeps: master seed xor a counter-based hash
/// of the (cell, replica) coordinates. Recorded per replica in manifests.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t cell_index,
                                 std::uint64_t replica_index) {
    return master ^ splitmix64(splitmix64(cell_index) + replica_index);
}

} // namespace ksmf
