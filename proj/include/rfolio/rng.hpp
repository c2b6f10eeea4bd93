#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace rfolio {

// All randomness in the toolkit flows through mt19937_64 streams whose seeds
// are derived from a single root seed with splitmix64.  Every transform below
// is fully specified here (no std::*_distribution, whose output is
// implementation-defined), so a (seed, purpose, index) triple pins the stream.

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// FNV-1a, used to turn purpose tags ("simulate", "bootstrap") into salt.
inline std::uint64_t hash_tag(std::string_view tag) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : tag) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

// Seed for the stream identified by (root, purpose, index).
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view purpose,
                                 std::uint64_t index = 0) {
    std::uint64_t state = root ^ hash_tag(purpose);
    std::uint64_t a = splitmix64(state);
    state ^= index;
    std::uint64_t b = splitmix64(state);
    return a ^ b;
}

// Uniform double in the open interval (0, 1), built from the top 53 bits.
inline double uniform_open(std::mt19937_64& rng) {
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

// Unbiased integer in [0, n) by rejection; avoids the modulo bias of rng() % n.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n + 1) % n;
    std::uint64_t v = rng();
    while (v > limit) v = rng();
    return v % n;
}

// Standard normal draws via the Marsaglia polar transform (sqrt/log only).
class NormalSampler {
public:
    explicit NormalSampler(std::uint64_t seed) : rng_(seed) {}

    double operator()() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform_open(rng_) - 1.0;
            v = 2.0 * uniform_open(rng_) - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        has_spare_ = true;
        return u * m;
    }

private:
    std::mt19937_64 rng_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// Recorded in report metadata so runs can be reproduced elsewhere.
inline constexpr const char* kRngDescription =
    "mt19937_64 + Marsaglia polar normals; streams seeded by "
    "splitmix64(root ^ fnv1a(purpose), index)";

}  // namespace rfolio
