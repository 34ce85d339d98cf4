#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

namespace mvgc {

/// Seeded 64-bit random stream. Identical seeds give bit-identical draws.
class rng {
public:
    using engine_type = std::mt19937_64;

    explicit rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next() { return engine_(); }

    /// Uniform draw in [0, 1) with 53 random mantissa bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform draw in the open interval (0, 1).
    double uniform_open() {
        double u;
        do {
            u = uniform();
        } while (u == 0.0);
        return u;
    }

    bool bernoulli(double p) { return uniform() < p; }

    template <typename T>
    void shuffle(std::vector<T>& items) {
        std::shuffle(items.begin(), items.end(), engine_);
    }

    /// Independent child stream; the child seed mixes this seed with `stream`.
    rng split(std::uint64_t stream) const { return rng(mix(seed_ ^ mix(stream + 0x9e3779b97f4a7c15ULL))); }

    engine_type& engine() noexcept { return engine_; }

    /// splitmix64 finalizer.
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t seed_;
    engine_type engine_;
};

}  // namespace mvgc
