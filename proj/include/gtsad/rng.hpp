#pragma once

#include <cstdint>
#include <random>

namespace gtsad {

/// Deterministic random stream. The raw generator is mt19937_64; uniform and
/// normal draws are derived with fixed algorithms (53-bit mantissa fill,
/// Box-Muller) so sequences are identical across platforms and standard
/// library implementations.
class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}

    uint64_t nextU64() { return gen_(); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller; draws come in deterministic pairs.
    double normal() {
        if (haveSpare_) {
            haveSpare_ = false;
            return spare_;
        }
        double u1 = 1.0 - uniform(); // (0, 1]
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        haveSpare_ = true;
        return r * std::cos(a);
    }

    /// Uniform integer in [0, n).
    int below(int n) {
        return static_cast<int>((static_cast<unsigned __int128>(gen_()) * static_cast<uint64_t>(n)) >> 64);
    }

    /// Deterministic stream splitting: combines a base seed with a stream
    /// index through two splitmix64 rounds.
    static uint64_t mix(uint64_t a, uint64_t b) {
        uint64_t x = a + 0x9e3779b97f4a7c15ull * (b + 1);
        x ^= x >> 30;
        x *= 0xbf58476d1ce4e5b9ull;
        x ^= x >> 27;
        x *= 0x94d049bb133111ebull;
        x ^= x >> 31;
        return x;
    }

private:
    std::mt19937_64 gen_;
    double spare_ = 0.0;
    bool haveSpare_ = false;
};

} // namespace gtsad
