#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace dnslab {

// splitmix64 mixer, used to derive independent substream seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Deterministic generator. mt19937_64 output is fixed by the standard and the
// variate mappings below avoid std::*_distribution, whose streams are
// implementation defined; identical seeds therefore give identical draws on
// any platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t raw() { return gen_(); }

    // uniform in [0, 1) with 53-bit resolution
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    // standard normal via Box-Muller, two draws per call
    double normal() {
        double u1 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    // exact binomial sample by Bernoulli counting
    int binomial(int trials, double p) {
        int hits = 0;
        for (int i = 0; i < trials; ++i)
            if (uniform01() < p) ++hits;
        return hits;
    }

    Rng spawn(std::uint64_t salt) { return Rng(mix_seed(gen_(), salt)); }

private:
    std::mt19937_64 gen_;
};

} // namespace dnslab
