#pragma once

#include <cstdint>
#include <cmath>

namespace treerate {

// Seedable, portable random stream: xoshiro256++ seeded through splitmix64.
// Every experiment records its seed; identical seeds give bit-identical
// streams on any platform, which std::<distribution>s do not guarantee.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed = 1) { reseed(seed); }

    void reseed(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    std::uint64_t next() {
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

    // Uniform in [0,1) with 53 random bits.
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform integer in [0, n), n > 0. Rejection-free modulo bias is
    // negligible here (n far below 2^64) but we debias anyway.
    std::uint64_t below(std::uint64_t n) {
        std::uint64_t x, r;
        do {
            x = next();
            r = x % n;
        } while (x - r > std::uint64_t(0) - n);
        return r;
    }

    int range(int lo, int hi) {  // inclusive bounds
        return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    // Exponential(1); used to draw uniform points on the simplex
    // (normalised exponentials = flat Dirichlet).
    double exponential() {
        double u;
        do { u = uniform01(); } while (u <= 0.0);
        return -std::log(u);
    }

    // Derive an independent stream (e.g. one per Monte Carlo trial).
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t index) {
        std::uint64_t st = seed ^ (0x9e3779b97f4a7c15ULL * (index + 1));
        return splitmix64(st);
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }
    std::uint64_t s_[4]{};
};

}  // namespace treerate
