#pragma once

#include <cstdint>
#include <cmath>

namespace wdlab {

// Counter-based generator: each draw is a hash of (key, counter), so streams
// can be split by key and replayed bit-identically on any platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : key_(mix(seed ^ 0x243f6a8885a308d3ull)) {}

    // Independent child stream labeled by an integer.
    Rng split(std::uint64_t label) const {
        Rng child(0);
        child.key_ = mix(key_ ^ mix(label + 0x9e3779b97f4a7c15ull));
        child.counter_ = 0;
        return child;
    }

    std::uint64_t next_u64() { return mix(key_ + 0x9e3779b97f4a7c15ull * ++counter_); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller; no state carried between draws.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace wdlab
