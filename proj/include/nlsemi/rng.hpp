#pragma once

// Counter-based Philox4x32-10 generator. Every draw is a pure function of
// (seed, stream, counter), so results never depend on scheduling order.

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>

namespace nlsemi {

class Philox {
public:
    using Block = std::array<std::uint32_t, 4>;

    static Block generate(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
        Block ctr{static_cast<std::uint32_t>(counter), static_cast<std::uint32_t>(counter >> 32),
                  static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
        std::uint32_t k0 = static_cast<std::uint32_t>(seed);
        std::uint32_t k1 = static_cast<std::uint32_t>(seed >> 32);
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * ctr[2];
            ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ k0, static_cast<std::uint32_t>(p1),
                   static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ k1, static_cast<std::uint32_t>(p0)};
            k0 += 0x9E3779B9u;
            k1 += 0xBB67AE85u;
        }
        return ctr;
    }

    /// Two uniforms in (0, 1) built from 53-bit mantissas.
    static std::array<double, 2> uniform2(std::uint64_t seed, std::uint64_t stream, std::uint64_t counter) {
        const Block b = generate(seed, stream, counter);
        const std::uint64_t a = (std::uint64_t{b[0]} << 32 | b[1]) >> 11;
        const std::uint64_t c = (std::uint64_t{b[2]} << 32 | b[3]) >> 11;
        constexpr double scale = 1.0 / 9007199254740992.0;
        return {(static_cast<double>(a) + 0.5) * scale, (static_cast<double>(c) + 0.5) * scale};
    }

    /// Standard circular complex normal, E|z|^2 = 1.
    static std::complex<double> complex_normal(std::uint64_t seed, std::uint64_t stream,
                                               std::uint64_t counter) {
        const auto u = uniform2(seed, stream, counter);
        const double r = std::sqrt(-std::log(u[0]));
        const double phi = 2.0 * std::numbers::pi * u[1];
        return {r * std::cos(phi), r * std::sin(phi)};
    }
};

/// Stream identifiers keep independent field families decorrelated.
enum class StreamTag : std::uint64_t { input = 1, noise = 2, sim_noise = 3, sample = 4 };

inline std::uint64_t stream_id(StreamTag tag, std::uint64_t index) {
    return (static_cast<std::uint64_t>(tag) << 56) ^ index;
}

/// SplitMix64 finalizer, used to derive per-task seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace nlsemi
