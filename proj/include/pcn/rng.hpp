#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "pcn/matrix.hpp"

namespace pcn {

// Seeded generator used for every random draw in the library.
//
// The engine is std::mt19937_64, whose output sequence is fixed by the C++
// standard. Conversions to doubles are done here rather than through
// <random> distributions (those are implementation-defined), so a given seed
// yields the same numbers on every conforming toolchain. This contract is
// frozen: changing it invalidates stored checkpoints and reference traces.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t next_u64() { return engine_(); }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    // Standard normal via Box-Muller (no cached second value).
    double normal();
    // Uniform integer in [0, n), rejection-sampled to avoid modulo bias.
    std::uint64_t below(std::uint64_t n);

    // Independent child stream derived from this seed and `stream`.
    Rng split(std::uint64_t stream) const;

    // Fisher-Yates permutation of 0..n-1.
    std::vector<std::size_t> permutation(std::size_t n);

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

enum class InitScheme {
    // Uniform on [-1/sqrt(fan_in), 1/sqrt(fan_in)], fan_in = cols.
    UniformFanIn,
};

Matrix init_weights(std::size_t rows, std::size_t cols, Rng& rng,
                    InitScheme scheme = InitScheme::UniformFanIn);

}  // namespace pcn
