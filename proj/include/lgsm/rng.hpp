#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace lgsm {

// Deterministic RNG. std::mt19937_64 output is fully specified by the
// standard; the distribution helpers below are hand-rolled because the
// std::*_distribution algorithms are not, and seeds must reproduce
// bit-identical streams everywhere.
class Rng {
   public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [lo, hi], rejection sampled to avoid modulo bias.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        if (span == 0) return static_cast<int64_t>(eng_());
        uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        uint64_t r;
        do {
            r = eng_();
        } while (r >= limit);
        return lo + static_cast<int64_t>(r % span);
    }

    // Zero-mean uniform with standard deviation `scale`.
    double uniform_scaled(double scale) {
        double half = scale * std::sqrt(3.0);
        return uniform(-half, half);
    }

    // Derive an independent stream; mixes the counter splitmix64-style.
    Rng fork(uint64_t stream) {
        uint64_t z = next_u64() + 0x9e3779b97f4a7c15ull * (stream + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return Rng(z ^ (z >> 31));
    }

   private:
    std::mt19937_64 eng_;
};

}  // namespace lgsm
