#pragma once

// Deterministic randomness helpers. std::uniform_int_distribution and
// std::normal_distribution are implementation-defined, so every draw that
// influences persisted output goes through the fixed algorithms below to
// keep runs reproducible across compilers and platforms.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string_view>
#include <vector>

namespace gvl::rng {

inline constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

// splitmix64 finalizer; good avalanche for seed mixing
constexpr std::uint64_t finalize64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
    return finalize64(a ^ finalize64(b));
}

constexpr std::uint64_t hash64(std::string_view bytes, std::uint64_t seed = kFnvOffset) {
    std::uint64_t h = seed;
    for (char c : bytes) {
        h ^= static_cast<unsigned char>(c);
        h *= kFnvPrime;
    }
    return finalize64(h);
}

// One seed per (episode, role): seed = hash64(global_seed, dataset_id, episode_index, role).
inline std::uint64_t derive_seed(std::uint64_t global_seed, std::string_view dataset_id,
                                 std::uint64_t episode_index, std::string_view role) {
    std::uint64_t h = hash64(dataset_id, kFnvOffset);
    h = hash64(role, h);
    h = mix64(h, global_seed);
    h = mix64(h, episode_index);
    return h;
}

// Unbiased draw from [0, n) via rejection sampling.
inline std::uint64_t bounded(std::mt19937_64& gen, std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t limit =
        std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = gen();
    while (x >= limit) x = gen();
    return x % n;
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(std::mt19937_64& gen) {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

// Box-Muller; one fresh value per call (no cached spare, so calls stay stateless).
inline double gaussian(std::mt19937_64& gen, double mean, double sigma) {
    double u1 = uniform01(gen);
    while (u1 <= 0.0) u1 = uniform01(gen);
    const double u2 = uniform01(gen);
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + sigma * r * std::cos(2.0 * M_PI * u2);
}

template <typename T>
void fisher_yates(std::vector<T>& items, std::mt19937_64& gen) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(bounded(gen, i));
        std::swap(items[i - 1], items[j]);
    }
}

// Draws `count` distinct values from {0, ..., population-1}, uniformly and
// without replacement (partial Fisher-Yates). Result unsorted.
inline std::vector<std::uint32_t> sample_without_replacement(std::uint32_t population,
                                                             std::uint32_t count,
                                                             std::mt19937_64& gen) {
    std::vector<std::uint32_t> pool(population);
    for (std::uint32_t i = 0; i < population; ++i) pool[i] = i;
    if (count > population) count = population;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t j = i + static_cast<std::uint32_t>(bounded(gen, population - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(count);
    return pool;
}

} // namespace gvl::rng
