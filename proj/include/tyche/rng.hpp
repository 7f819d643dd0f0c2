#pragma once

#include <cstdint>
#include <cmath>
#include <vector>

namespace tyche {

// Deterministic RNG with explicit seed-key derivation. All randomness in the
// project flows through this so results are independent of library
// distribution internals and of worker scheduling.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Mix an arbitrary number of stream keys into one seed.
inline uint64_t seed_key(uint64_t a) { return splitmix64(a); }
inline uint64_t seed_key(uint64_t a, uint64_t b) { return splitmix64(splitmix64(a) ^ (b + 0x165667b19e3779f9ULL)); }
inline uint64_t seed_key(uint64_t a, uint64_t b, uint64_t c) { return seed_key(seed_key(a, b), c); }
inline uint64_t seed_key(uint64_t a, uint64_t b, uint64_t c, uint64_t d) { return seed_key(seed_key(a, b, c), d); }

// xoshiro256** generator.
class Rng {
public:
    explicit Rng(uint64_t seed) {
        uint64_t x = seed;
        for (auto& si : s_) si = (x = splitmix64(x));
        have_spare_ = false;
    }

    uint64_t next_u64() {
        auto rotl = [](uint64_t v, int k) { return (v << k) | (v >> (64 - k)); };
        const uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    uint64_t uniform_int(uint64_t n) { return next_u64() % n; }

    // Standard normal via Box-Muller (deterministic across platforms).
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do { u1 = uniform(); } while (u1 <= 0.0);
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    double gaussian(double mu, double sigma) { return mu + sigma * gaussian(); }

    bool bernoulli(double p) { return uniform() < p; }

    // Fisher-Yates over indices 0..n-1.
    std::vector<size_t> permutation(size_t n) {
        std::vector<size_t> idx(n);
        for (size_t i = 0; i < n; ++i) idx[i] = i;
        for (size_t i = n; i > 1; --i) {
            size_t j = uniform_int(i);
            std::swap(idx[i - 1], idx[j]);
        }
        return idx;
    }

private:
    uint64_t s_[4];
    double spare_ = 0.0;
    bool have_spare_;
};

}  // namespace tyche
