#pragma once

#include <cmath>
#include <cstdint>

namespace fraclab {

// Deterministic, platform-independent random streams. We avoid <random>
// distributions on purpose: their outputs are not pinned by the standard,
// and rerun byte-identity is a hard requirement for every experiment.

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// xoshiro256++ seeded through splitmix64.
class RandomStream {
  public:
    explicit RandomStream(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
        have_gauss_ = false;
    }

    // Independent substream: hashes (seed, index) so path streams never overlap.
    static RandomStream substream(std::uint64_t seed, std::uint64_t index) {
        std::uint64_t sm = seed ^ (0x6a09e667f3bcc909ULL + index * 0x9e3779b97f4a7c15ULL);
        (void)splitmix64(sm);
        return RandomStream(splitmix64(sm));
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in (0,1): 53-bit mantissa, never returns 0 or 1.
    double uniform() {
        const std::uint64_t u = next_u64() >> 11;
        return (static_cast<double>(u) + 0.5) * 0x1.0p-53;
    }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    double exponential() { return -std::log(uniform()); }

    // Box-Muller with caching; deterministic given the stream state.
    double gaussian() {
        if (have_gauss_) {
            have_gauss_ = false;
            return cached_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double c = std::cos(2.0 * M_PI * u2);
        const double s = std::sin(2.0 * M_PI * u2);
        cached_ = r * s;
        have_gauss_ = true;
        return r * c;
    }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t s_[4];
    double cached_ = 0.0;
    bool have_gauss_;
};

} // namespace fraclab
