#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace attrib::rng {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// 64-bit FNV-1a.
constexpr std::uint64_t hash(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Stream key for one (seed, entity, purpose, index) tuple. Streams with
/// different keys are statistically independent, so adding entities never
/// shifts the draws of existing ones.
constexpr std::uint64_t key(std::uint64_t seed, std::string_view entity, std::string_view purpose,
                            std::uint64_t index = 0) {
    return mix(mix(mix(seed) ^ hash(entity)) ^ hash(purpose)) ^ mix(index + 0x632be59bd9b4e019ULL);
}

/// SplitMix64 sequence started at `key`: output i is mix(key + i·γ).
class Stream {
public:
    explicit constexpr Stream(std::uint64_t key) : state_(key) {}
    Stream(std::uint64_t seed, std::string_view entity, std::string_view purpose, std::uint64_t index = 0)
        : state_(key(seed, entity, purpose, index)) {}

    std::uint64_t next() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal by Box-Muller, one variate per two uniforms.
    double normal() {
        const double u1 = 1.0 - uniform(); // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return static_cast<std::uint64_t>(uniform() * static_cast<double>(n)); }

private:
    std::uint64_t state_;
};

} // namespace attrib::rng
