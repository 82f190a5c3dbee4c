#pragma once
// Deterministic RNG with named substreams. All randomness in the project
// derives from one root seed so runs are reproducible across platforms;
// std::uniform_* distributions are avoided because their output is
// implementation-defined.

#include <cstdint>
#include <string_view>

namespace lrgcn {

// splitmix64; passes BigCrush when used as a generator.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 random bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform in [0, n). Lemire's multiply-shift, unbiased.
    std::uint64_t next_index(std::uint64_t n) {
        std::uint64_t x = next_u64();
        __uint128_t m = static_cast<__uint128_t>(x) * static_cast<__uint128_t>(n);
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < n) {
            std::uint64_t t = (0 - n) % n;
            while (lo < t) {
                x = next_u64();
                m = static_cast<__uint128_t>(x) * static_cast<__uint128_t>(n);
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    // Uniform in [lo, hi).
    double next_uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

private:
    std::uint64_t state_;
};

// FNV-1a over a label, mixed with the parent seed. Used to carve
// independent named streams (graph, policy, eval, ...) out of a root seed.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view label) {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ root;
    for (char c : label) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    h ^= root >> 32;
    h *= 0x100000001b3ULL;
    return h;
}

inline std::uint64_t derive_seed(std::uint64_t root, std::string_view label,
                                 std::uint64_t index) {
    std::uint64_t h = derive_seed(root, label);
    h ^= index + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    return h;
}

}  // namespace lrgcn
