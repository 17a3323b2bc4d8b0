#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace cctrain {

// SplitMix64 finalizer.
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Deterministic random stream with named child streams. All distributions are
// built on the raw 64-bit output instead of <random> adaptors, whose results
// are implementation-defined; outputs here are identical across platforms.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(mix64(seed)) {}

    uint64_t state() const { return state_; }

    // Independent substream; derivation does not consume draws from *this.
    Rng child(uint64_t label) const {
        Rng r(0);
        r.state_ = mix64(state_ ^ mix64(label + 0x632be59bd9b4e019ULL));
        return r;
    }
    Rng child(uint64_t a, uint64_t b) const { return child(a).child(b); }
    Rng child(std::string_view label) const {
        uint64_t h = 0xcbf29ce484222325ULL;
        for (char c : label) h = (h ^ static_cast<unsigned char>(c)) * 0x100000001b3ULL;
        return child(h);
    }

    uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        uint64_t x = state_;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    // Uniform in [0, 1) with 53 random bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Unbiased integer in [0, n).
    uint64_t bounded(uint64_t n) {
        uint64_t threshold = (~n + 1) % n;
        for (;;) {
            uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    // Standard normal via Box-Muller; caches the second value of each pair.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1;
        do {
            u1 = next_double();
        } while (u1 <= 0.0);
        double u2 = next_double();
        double radius = std::sqrt(-2.0 * std::log(u1));
        double angle = 2.0 * M_PI * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    double normal(double mean, double std) { return mean + std * normal(); }

    // Fisher-Yates.
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(bounded(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace cctrain
