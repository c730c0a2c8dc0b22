#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace etlsched {

// splitmix64 finalizer. Used both as a standalone mixer and to expand seeds.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Stable seed split: seed = mix(mix(master ^ hash(stream)) ^ index).
// Distinct streams and indices land in statistically independent sequences.
inline std::uint64_t derive_run_seed(std::uint64_t master_seed, std::string_view stream_id,
                                     std::uint64_t run_index) {
    std::uint64_t s = mix64(master_seed ^ fnv1a64(stream_id));
    return mix64(s ^ run_index);
}

// Deterministic generator with explicitly written distributions, so results do
// not depend on the standard library's distribution implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed == 0 ? 0x9e3779b97f4a7c15ULL : seed) {
        // warm up so near-zero seeds decorrelate
        for (int i = 0; i < 4; ++i) next_u64();
    }

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t x = state_;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    // [0, 1) with 53-bit resolution
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // log-uniform over [lo, hi], lo > 0
    double log_uniform(double lo, double hi) {
        return std::exp(uniform(std::log(lo), std::log(hi)));
    }

    // exponential with given rate (mean 1/rate)
    double exponential(double rate) {
        double u = uniform();
        return -std::log1p(-u) / rate;
    }

    // [0, n), n > 0; modulo bias is negligible for the small n used here
    int uniform_int(int n) { return static_cast<int>(next_u64() % static_cast<std::uint64_t>(n)); }

private:
    std::uint64_t state_;
};

} // namespace etlsched
