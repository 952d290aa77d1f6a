#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace cta {

// Deterministic random source. The raw engine is std::mt19937_64 (bit-stable
// across platforms); the uniform/normal transforms are written out explicitly
// instead of using std distributions, whose output is implementation-defined.
struct Rng {
    std::mt19937_64 gen;

    explicit Rng(std::uint64_t seed) : gen(seed) {}

    // Uniform on [0, 1).
    double uniform01() { return static_cast<double>(gen() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // One standard normal draw via Box-Muller (no cached spare, so the draw
    // sequence is a pure function of the engine state).
    double normal() {
        double u1 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    // Integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // Rejection sampling to avoid modulo bias.
        std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v = gen();
        while (v >= limit) v = gen();
        return v % n;
    }
};

// Stable derivation of per-purpose seeds from one master seed.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
    std::uint64_t x = master + 0x9e3779b97f4a7c15ull * (stream + 1);
    x ^= x >> 30;
    x *= 0xbf58476d1ce4e5b9ull;
    x ^= x >> 27;
    x *= 0x94d049bb133111ebull;
    x ^= x >> 31;
    return x;
}

}  // namespace cta
