#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace mhqa {

// mt19937_64 has a standardized output sequence; the distributions in
// <random> do not, so the conversions below are written out to keep runs
// bit-reproducible across standard libraries.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n). Rejection sampling avoids modulo bias.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x = engine_();
        while (x >= limit) {
            x = engine_();
        }
        return x % n;
    }

    template <typename It>
    void shuffle(It first, It last) {
        const auto n = static_cast<std::uint64_t>(last - first);
        for (std::uint64_t i = n; i > 1; --i) {
            std::swap(first[i - 1], first[below(i)]);
        }
    }

  private:
    std::mt19937_64 engine_;
};

/// FNV-1a, used to derive per-item seeds from stable string ids.
inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::string_view key) {
    std::uint64_t z = seed ^ fnv1a(key);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace mhqa
