#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>

namespace astrolm {

// SplitMix64 stream. Every sampling decision in the pipeline goes through
// this generator so that runs are bit-stable across platforms and compilers;
// the std distributions make no such guarantee.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1), 53 bits of precision.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Unbiased uniform integer in [0, n).
    uint64_t next_below(uint64_t n) {
        assert(n > 0);
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

    bool next_bool(double p) { return next_double() < p; }

    // Standard normal via Box-Muller; the spare value is cached.
    double next_normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - next_double();  // (0, 1]
        const double u2 = next_double();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    // Normal(0, stddev) resampled until within bound_in_std standard deviations.
    double next_trunc_normal(double stddev, double bound_in_std) {
        double z = next_normal();
        while (std::abs(z) > bound_in_std) z = next_normal();
        return z * stddev;
    }

private:
    uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

namespace detail {
inline uint64_t mix64(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}
}  // namespace detail

// Stateless key mixing for derived seeds (per-example, per-step, per-site).
inline uint64_t mix_seed(uint64_t a, uint64_t b = 0, uint64_t c = 0, uint64_t d = 0) {
    uint64_t h = 0x9e3779b97f4a7c15ULL;
    h = detail::mix64(h ^ a);
    h = detail::mix64(h + 0x9e3779b97f4a7c15ULL + b);
    h = detail::mix64(h + 0x9e3779b97f4a7c15ULL + c);
    h = detail::mix64(h + 0x9e3779b97f4a7c15ULL + d);
    return h;
}

}  // namespace astrolm
