// Deterministic random number generation.
//
// All stochastic code in driftlock draws through this wrapper instead of the
// <random> distribution classes, whose output is implementation-defined. The
// mt19937_64 engine itself is fully specified by the standard, and the
// Box-Muller / Knuth samplers below are plain arithmetic, so a (seed, call
// sequence) pair reproduces bit-identical streams across builds and restarts.
#pragma once

#include <cstdint>
#include <random>

namespace driftlock {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller; generates pairs, caches the second.
    double gauss();

    /// Poisson sample. Knuth's product method below mean 50, rounded normal
    /// approximation above (adequate for photon-count scale means).
    long long poisson(double mean);

    /// Sub-seed for stream `index` of a parent seed. Two splitmix64 rounds on
    /// the sum keep sibling streams decorrelated; the mapping is part of the
    /// public contract so per-component generation is reproducible in
    /// isolation.
    static std::uint64_t derive(std::uint64_t seed, std::uint64_t index);

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace driftlock
