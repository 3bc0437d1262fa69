#include "pcn/rng.hpp"

#include <cmath>
#include <numbers>

#include "pcn/errors.hpp"

namespace pcn {

double Rng::normal() {
    // 1 - uniform() lies in (0, 1], so the log is finite.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t Rng::below(std::uint64_t n) {
    if (n == 0) throw UsageError("Rng::below: empty range");
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
        v = engine_();
    } while (v >= limit);
    return v % n;
}

Rng Rng::split(std::uint64_t stream) const {
    // splitmix64 finalizer over (seed, stream).
    std::uint64_t z = seed_ + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return Rng(z ^ (z >> 31));
}

std::vector<std::size_t> Rng::permutation(std::size_t n) {
    std::vector<std::size_t> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = i;
    for (std::size_t i = n; i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(below(i));
        std::swap(p[i - 1], p[j]);
    }
    return p;
}

Matrix init_weights(std::size_t rows, std::size_t cols, Rng& rng, InitScheme scheme) {
    if (rows == 0 || cols == 0) throw UsageError("init_weights: dimensions must be positive");
    Matrix w(rows, cols);
    switch (scheme) {
        case InitScheme::UniformFanIn: {
            const double k = 1.0 / std::sqrt(static_cast<double>(cols));
            for (double& v : w.data()) v = rng.uniform(-k, k);
            break;
        }
    }
    return w;
}

}  // namespace pcn
