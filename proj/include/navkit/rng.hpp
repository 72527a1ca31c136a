#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace navkit {

// FNV-1a, used for seed derivation and file hashing. Stable across platforms.
inline uint64_t fnv1a(std::string_view data, uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t hash_combine(uint64_t h, uint64_t v) {
    for (int i = 0; i < 8; ++i) {
        h ^= (v >> (8 * i)) & 0xff;
        h *= 0x100000001b3ull;
    }
    return h;
}

// Named seed derivation: hash(seed, stage, env_id). All stage randomness
// flows through this so runs are reproducible and stages independent.
inline uint64_t derive_seed(uint64_t seed, std::string_view stage, std::string_view key = {}) {
    uint64_t h = hash_combine(0xcbf29ce484222325ull, seed);
    h = fnv1a(stage, h);
    h = fnv1a("/", h);
    h = fnv1a(key, h);
    return h;
}

// Counter-based splitmix64 generator with hand-rolled distributions so that
// streams are bit-identical regardless of standard library.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). Rejection sampling avoids modulo bias.
    uint64_t uniform_int(uint64_t n) {
        uint64_t threshold = (0 - n) % n;
        for (;;) {
            uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    // Standard normal via Box-Muller (fresh pair each call; second value dropped
    // to keep the stream position independent of call history).
    double normal() {
        double u1 = 0.0;
        while (u1 == 0.0) u1 = uniform();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

private:
    uint64_t state_;
};

}  // namespace navkit
