#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace spinsim {

// Counter-based splittable random streams built on the SplitMix64 finalizer
// (Steele, Lea & Flood; mixing constants from Vigna's public-domain code).
// A stream is fully determined by (master seed, stream index), so parallel
// workers can be handed independent substreams without any shared state and
// results never depend on the worker count.
inline uint64_t mix64(uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class Rng {
  public:
    explicit Rng(uint64_t seed) : state_(mix64(seed ^ 0x853c49e6748fea9bULL)) {}

    // Substream `index` of master `seed`; documented derivation so outputs
    // are reproducible across versions: state0 = mix64(mix64(seed) ^ mix64(index)).
    static Rng stream(uint64_t seed, uint64_t index) {
        Rng r(0);
        r.state_ = mix64(mix64(seed) ^ mix64(index ^ 0xda3e39cb94b95bdbULL));
        return r;
    }

    uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 random bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform integer in [0, n).
    uint64_t next_below(uint64_t n) {
        // Lemire-style rejection-free-ish bound; a plain modulo bias at
        // n << 2^64 would be invisible here, but the multiply trick is as cheap.
        __uint128_t m = static_cast<__uint128_t>(next_u64()) * n;
        return static_cast<uint64_t>(m >> 64);
    }

    bool bernoulli(double p) { return next_double() < p; }

    // Draws an index in [0, n) with probability weights[i] / sum(weights).
    // Weights must be nonnegative; the caller guarantees a positive sum.
    int discrete(const double* weights, int n) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) total += weights[i];
        double u = next_double() * total;
        double acc = 0.0;
        for (int i = 0; i < n; ++i) {
            acc += weights[i];
            if (u < acc) return i;
        }
        return n - 1;
    }

  private:
    uint64_t state_;
};

// Positions of successes among `trials` independent Bernoulli(p) draws,
// sampled by geometric gap skipping in O(#successes). Exact distribution,
// not a Poisson approximation.
inline void bernoulli_positions(uint64_t trials, double p, Rng& rng,
                                std::vector<uint64_t>& out) {
    if (trials == 0 || p <= 0.0) return;
    if (p >= 1.0) {
        for (uint64_t i = 0; i < trials; ++i) out.push_back(i);
        return;
    }
    const double log1mp = std::log1p(-p);
    uint64_t pos = 0;
    while (true) {
        double u = rng.next_double();
        // skip = floor(log(1-u)/log(1-p)) failures before the next success
        double skip = std::floor(std::log1p(-u) / log1mp);
        if (skip >= static_cast<double>(trials - pos)) return;
        pos += static_cast<uint64_t>(skip);
        if (pos >= trials) return;
        out.push_back(pos);
        ++pos;
        if (pos >= trials) return;
    }
}

}  // namespace spinsim
