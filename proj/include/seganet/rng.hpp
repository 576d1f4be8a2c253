#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace seganet {

// Deterministic random source. Wraps mt19937_64 but maps raw words to
// doubles/ints with fixed arithmetic instead of std:: distributions,
// whose output differs between standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform01();
    }

    // Uniform integer in [0, n). n must be positive.
    int uniform_int(int n) {
        return static_cast<int>(static_cast<double>(n) * uniform01());
    }

    bool bernoulli(double p) { return uniform01() < p; }

    // Standard normal via Box-Muller. One fresh pair of uniforms per call;
    // no cached second value, so the stream position is easy to reason about.
    double normal() {
        double u1 = uniform01();
        double u2 = uniform01();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    double normal(double mean, double sigma) { return mean + sigma * normal(); }

    // Independent substream keyed on (seed, a, b), e.g. (run seed, iteration,
    // slice index). SplitMix64 finalizer decorrelates nearby keys.
    static Rng substream(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
        return Rng(mix(mix(mix(seed) ^ a) ^ b));
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::mt19937_64 engine_;
};

}  // namespace seganet
