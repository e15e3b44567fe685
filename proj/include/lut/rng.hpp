#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace lut {

// Deterministic RNG: the engine is std::mt19937_64 (output sequence fixed by
// the standard) and all distributions are hand-rolled on top of it, so the
// same seed gives the same stream on every platform/toolchain.
class Rng {
public:
    explicit Rng(uint64_t seed = 0x5eed) : eng_(seed) {}

    uint64_t next_u64() { return eng_(); }

    // uniform in [0,1)
    double uniform() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    uint64_t below(uint64_t n) {
        // modulo bias is irrelevant for our n << 2^64
        return eng_() % n;
    }

    // standard normal via Box-Muller (no cached spare; deterministic)
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    bool coin() { return (eng_() & 1u) != 0; }

    // Fisher-Yates
    template <class Vec>
    void shuffle(Vec& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 eng_;
};

} // namespace lut
