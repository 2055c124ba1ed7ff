#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace bcrf {

// Deterministic RNG: mt19937_64 engine with hand-rolled distributions.
// std::uniform_*_distribution output is implementation-defined, so every
// draw here goes through our own fixed mappings; streams are reproducible
// across standard libraries and compilers.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 bits of precision.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, n). n must be > 0.
    int uniform_int(int n) {
        return static_cast<int>(uniform() * static_cast<double>(n));
    }

    // Uniform integer in [lo, hi].
    int uniform_range(int lo, int hi) { return lo + uniform_int(hi - lo + 1); }

    // Standard normal via Box-Muller (cosine branch only).
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (int i = static_cast<int>(v.size()) - 1; i > 0; --i) {
            int j = uniform_int(i + 1);
            std::swap(v[i], v[j]);
        }
    }

    // Sample k distinct indices from [0, n), in draw order.
    std::vector<int> sample_without_replacement(int n, int k) {
        std::vector<int> pool(n);
        for (int i = 0; i < n; ++i) pool[i] = i;
        shuffle(pool);
        pool.resize(k);
        return pool;
    }

private:
    std::mt19937_64 engine_;
};

// splitmix64 finalizer, used to derive independent seed streams.
inline std::uint64_t seed_mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    return seed_mix(seed_mix(base) ^ stream);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a, std::uint64_t b) {
    return seed_mix(derive_seed(base, a) ^ seed_mix(b + 0x632be59bd9b4e019ULL));
}

} // namespace bcrf
